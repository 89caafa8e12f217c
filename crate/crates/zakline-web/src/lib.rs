//! Browser demo bindings: three interactive views of the complex-Zak-phase
//! pipeline, each returning a JSON payload for the static page in `www/`.
//!
//! Build with `wasm-pack build --target web --out-dir www/pkg` and serve the
//! `www/` directory; the functions also compile natively so the payloads are
//! unit-tested on the host.

use num_complex::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use zakline::berry::{self, DiffScheme, SweepOptions};
use zakline::gauge::{self, LoopGrid};
use zakline::models::{self, BlochModel, SshParams};
use zakline::Tolerances;

#[derive(Serialize)]
struct ErrorPayload {
    error: String,
}

fn error_json(message: impl Into<String>) -> String {
    serde_json::to_string(&ErrorPayload { error: message.into() }).unwrap()
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| error_json(e.to_string()))
}

#[derive(Serialize)]
struct SweepPayload {
    theta: Vec<f64>,
    broken: Vec<bool>,
    /// Numerical gamma per band: `null` where the pipeline failed.
    re_g: [Vec<Option<f64>>; 2],
    im_g: [Vec<Option<f64>>; 2],
    /// Closed-form reference, present on PT-unbroken rows.
    re_an: [Vec<Option<f64>>; 2],
    im_an: [Vec<Option<f64>>; 2],
}

/// Complex Zak phases of both bands over a theta sweep (the phase diagram
/// view): numerical values, closed-form reference, PT-broken mask.
#[wasm_bindgen]
pub fn sweep_json(t: f64, delta: f64, gamma: f64, m: usize, steps: usize) -> String {
    let template = match SshParams::new(t, delta, 0.0, gamma) {
        Ok(p) => p,
        Err(e) => return error_json(e.to_string()),
    };
    if steps == 0 || steps > 1024 {
        return error_json("steps must be between 1 and 1024");
    }
    let m = m.max(3) | 1;
    let thetas = berry::theta_linspace(0.0, 2.0 * std::f64::consts::PI, steps);
    let opt = SweepOptions {
        emit_analytic: true,
        scheme: DiffScheme::Central,
        ..Default::default()
    };
    let rows = berry::sweep(&template, &thetas, m, &opt);

    let mut payload = SweepPayload {
        theta: Vec::new(),
        broken: Vec::new(),
        re_g: [Vec::new(), Vec::new()],
        im_g: [Vec::new(), Vec::new()],
        re_an: [Vec::new(), Vec::new()],
        im_an: [Vec::new(), Vec::new()],
    };
    for row in rows {
        payload.theta.push(row.theta);
        payload.broken.push(row.pt_broken);
        for b in 0..2 {
            // report the principal-representative real part for plotting
            payload.re_g[b].push(row.gamma[b].map(|z| berry::principal_angle(z.re)));
            payload.im_g[b].push(row.gamma[b].map(|z| z.im));
            payload.re_an[b].push(row.gamma_analytic[b].map(|z| berry::principal_angle(z.re)));
            payload.im_an[b].push(row.gamma_analytic[b].map(|z| z.im));
        }
    }
    json(&payload)
}

#[derive(Serialize)]
struct GaugeTracePayload {
    k: Vec<f64>,
    band: usize,
    component: usize,
    delta_phi: f64,
    crossings: i64,
    gamma_re: f64,
    gamma_im: f64,
    raw_abs: Vec<f64>,
    raw_arg: Vec<f64>,
    traced_abs: Vec<f64>,
    traced_arg: Vec<f64>,
    smoothed_abs: Vec<f64>,
    smoothed_arg: Vec<f64>,
}

/// The gauge-smoothing stages for one band: modulus and argument of the
/// tracked left-eigenvector component as solved (arbitrary phases), after
/// phase tracing, and after the winding-corrected smoothing.
#[wasm_bindgen]
pub fn gauge_trace_json(t: f64, delta: f64, gamma: f64, theta: f64, m: usize, band: usize) -> String {
    let params = match SshParams::new(t, delta, theta, gamma) {
        Ok(p) => p,
        Err(e) => return error_json(e.to_string()),
    };
    if band != 1 && band != 2 {
        return error_json("band must be 1 or 2");
    }
    let m = m.clamp(3, 20_001) | 1;
    let model = BlochModel::Ssh(params);
    let grid = match LoopGrid::brillouin_zone(m) {
        Ok(g) => g,
        Err(e) => return error_json(e.to_string()),
    };
    let tol = Tolerances::default();
    let raw = match gauge::solve_along_loop(&model, &grid, &tol) {
        Ok(b) => b,
        Err(e) => return error_json(e.to_string()),
    };
    let track = raw.tracks[band - 1].clone();
    let traced = match gauge::trace_phases(track.clone(), &tol) {
        Ok(t) => t,
        Err(e) => return error_json(e.to_string()),
    };
    let winding = match gauge::phase_winding(&traced, tol.component) {
        Ok(w) => w,
        Err(e) => return error_json(e.to_string()),
    };
    let smoothed = match gauge::apply_smoothing(traced.clone(), &tol) {
        Ok(t) => t,
        Err(e) => return error_json(e.to_string()),
    };
    let bundle = gauge::SmoothedBundle { grid: raw.grid.clone(), tracks: vec![smoothed.clone()] };
    let gamma = match berry::zak_derivative(&bundle, band, DiffScheme::Central, &tol) {
        Ok(r) => r.gamma_principal,
        Err(e) => return error_json(e.to_string()),
    };

    let p = winding.component;
    // unit 2-norm restores the solver's raw texture (constant modulus for
    // this model, phases in arbitrary branches)
    let component_of = |v: &zakline::CVector| v[p];
    let raw_states: Vec<Complex64> = track
        .pairs
        .iter()
        .map(|pair| component_of(&(&pair.left / Complex64::new(pair.left.norm(), 0.0))))
        .collect();
    let traced_states: Vec<Complex64> = traced.pairs.iter().map(|q| component_of(&q.left)).collect();
    let smoothed_states: Vec<Complex64> =
        smoothed.pairs.iter().map(|q| component_of(&q.left)).collect();

    let payload = GaugeTracePayload {
        k: raw.grid.points().to_vec(),
        band,
        component: p + 1,
        delta_phi: winding.delta_phi,
        crossings: winding.crossings,
        gamma_re: gamma.re,
        gamma_im: gamma.im,
        raw_abs: raw_states.iter().map(|z| z.norm()).collect(),
        raw_arg: raw_states.iter().map(|z| z.arg()).collect(),
        traced_abs: traced_states.iter().map(|z| z.norm()).collect(),
        traced_arg: traced_states.iter().map(|z| z.arg()).collect(),
        smoothed_abs: smoothed_states.iter().map(|z| z.norm()).collect(),
        smoothed_arg: smoothed_states.iter().map(|z| z.arg()).collect(),
    };
    json(&payload)
}

#[derive(Serialize)]
struct BandsPayload {
    k: Vec<f64>,
    re_e: [Vec<f64>; 2],
    im_e: [Vec<f64>; 2],
    broken: bool,
    max_imag: f64,
}

/// Band structure `E±(k)` from the Pauli decomposition, with the PT verdict.
#[wasm_bindgen]
pub fn band_structure_json(t: f64, delta: f64, gamma: f64, theta: f64, m: usize) -> String {
    let params = match SshParams::new(t, delta, theta, gamma) {
        Ok(p) => p,
        Err(e) => return error_json(e.to_string()),
    };
    let m = m.clamp(3, 20_001) | 1;
    let grid = match LoopGrid::brillouin_zone(m) {
        Ok(g) => g,
        Err(e) => return error_json(e.to_string()),
    };
    let mut payload = BandsPayload {
        k: grid.points().to_vec(),
        re_e: [Vec::new(), Vec::new()],
        im_e: [Vec::new(), Vec::new()],
        broken: false,
        max_imag: 0.0,
    };
    for &k in grid.points() {
        let h = models::ssh_bloch(k, &params);
        let coeffs = match models::pauli_decompose(&h) {
            Ok(c) => c,
            Err(e) => return error_json(e.to_string()),
        };
        let (ep, em) = models::energies(&coeffs);
        // band 1 = lower branch, matching the eigensolver ordering
        payload.re_e[0].push(em.re);
        payload.im_e[0].push(em.im);
        payload.re_e[1].push(ep.re);
        payload.im_e[1].push(ep.im);
        payload.max_imag = payload.max_imag.max(ep.im.abs()).max(em.im.abs());
    }
    payload.broken = payload.max_imag > Tolerances::default().pt;
    json(&payload)
}
