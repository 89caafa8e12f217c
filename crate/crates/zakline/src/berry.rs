//! Complex Zak-phase evaluation, Wilson-loop cross-check, quantization tests
//! and parameter sweeps.
//!
//! Two independent routes to the same number:
//!
//! * [`zak_derivative`] integrates `i <chi|d phi>` over the smoothed,
//!   single-valued bundle with a finite-difference stencil;
//! * [`zak_wilson`] needs no gauge fixing at all: it accumulates logarithms
//!   of consecutive overlaps around the loop in the two-sided combination
//!   `(i/2) Σ [ Ln<chi_j|phi_{j+1}> - Ln<chi_{j+1}|phi_j> ]`, which telescopes
//!   away every per-point phase exactly and reduces to the standard Wilson
//!   loop (`-Σ arg`) in the Hermitian limit.
//!
//! In the PT-unbroken regime the real part of either result is quantized to
//! {0, pi} modulo 2 pi.

use num_complex::Complex64;
use thiserror::Error;

use crate::analytic;
use crate::eigsolver::bilinear;
use crate::gauge::{self, GaugeError, LoopGrid, SmoothedBundle};
use crate::models::{self, BlochModel, ModelError, PtClassification, SshParams};
use crate::Tolerances;

#[derive(Debug, Error)]
pub enum BerryError {
    #[error("no band with index {0} in the bundle")]
    NoSuchBand(usize),
    #[error(
        "bundle is not smoothed (endpoint mismatch {mismatch:.3e}); run the gauge pipeline first"
    )]
    NotSmoothed { mismatch: f64 },
    #[error("pairs are not normalized at grid point {index}: <chi|phi> = {overlap}")]
    NotNormalized { index: usize, overlap: Complex64 },
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which route produced a [`ZakResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Derivative,
    Wilson,
}

/// Finite-difference stencil for [`zak_derivative`].
///
/// `Central` is the default: its discretization bias is one order higher in
/// the grid spacing, and in the Hermitian limit its imaginary part vanishes
/// identically because `Σ_j Re<phi_j|phi_{j+1}>` and `Σ_j Re<phi_j|phi_{j-1}>`
/// coincide on a closed loop. `Forward` pairs term-by-term with the Wilson
/// telescoping and is kept for convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffScheme {
    #[default]
    Central,
    Forward,
}

/// One band's complex Zak phase with diagnostics.
#[derive(Debug, Clone)]
pub struct ZakResult {
    pub band_index: usize,
    /// Raw accumulated phase (radians).
    pub gamma: Complex64,
    /// Same value with the real part reduced to the representative in
    /// `(-pi, pi]`.
    pub gamma_principal: Complex64,
    pub method: Method,
    /// Grid size M used for the loop.
    pub grid_size: usize,
    /// Circular distance of `Re gamma` (mod 2 pi) from the nearer of {0, pi}.
    pub quant_residual: f64,
    /// PT classification of the underlying model over this grid, when the
    /// caller supplied one.
    pub pt_status: Option<PtClassification>,
    /// `|gamma_derivative - gamma_wilson|` when both routes were evaluated.
    pub oracle_gap: Option<f64>,
}

impl ZakResult {
    pub fn with_pt_status(mut self, status: PtClassification) -> Self {
        self.pt_status = Some(status);
        self
    }
}

/// Verdict of the quantization test.
#[derive(Debug, Clone, Copy)]
pub struct QuantizationVerdict {
    pub is_quantized: bool,
    /// Circular distance of `Re gamma` mod 2 pi from the nearer of {0, pi}.
    pub residual: f64,
    /// The nearer quantized value, 0 or pi.
    pub value: f64,
}

/// Reduce an angle to the representative in `(-pi, pi]`.
pub fn principal_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = x.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Circular distance between two angles.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    principal_angle(a - b).abs()
}

/// Distance between two complex phases, treating the real part as an angle
/// modulo 2 pi.
pub fn gamma_distance(a: Complex64, b: Complex64) -> f64 {
    let dre = circular_distance(a.re, b.re);
    let dim = a.im - b.im;
    (dre * dre + dim * dim).sqrt()
}

/// Test whether `Re gamma` is 0 or pi modulo 2 pi within `tol`.
pub fn quantization_check(gamma: Complex64, tol: f64) -> QuantizationVerdict {
    let d0 = circular_distance(gamma.re, 0.0);
    let dpi = circular_distance(gamma.re, std::f64::consts::PI);
    let (residual, value) = if d0 <= dpi { (d0, 0.0) } else { (dpi, std::f64::consts::PI) };
    QuantizationVerdict { is_quantized: residual <= tol, residual, value }
}

fn make_result(
    band_index: usize,
    gamma: Complex64,
    method: Method,
    grid_size: usize,
    tol: &Tolerances,
) -> ZakResult {
    let verdict = quantization_check(gamma, tol.quant);
    ZakResult {
        band_index,
        gamma,
        gamma_principal: Complex64::new(principal_angle(gamma.re), gamma.im),
        method,
        grid_size,
        quant_residual: verdict.residual,
        pt_status: None,
        oracle_gap: None,
    }
}

/// Numerical Zak phase from the smoothed bundle:
/// `gamma = i Σ_j <chi_j| (finite difference of phi at j)`.
///
/// Requires the bundle to be single-valued (smoothed); the closing duplicate
/// of the basepoint makes the loop wrap exact.
pub fn zak_derivative(
    bundle: &SmoothedBundle,
    band_index: usize,
    scheme: DiffScheme,
    tol: &Tolerances,
) -> Result<ZakResult, BerryError> {
    let track = bundle.band(band_index).ok_or(BerryError::NoSuchBand(band_index))?;
    if !track.smoothed {
        return Err(BerryError::NotSmoothed {
            mismatch: gauge::endpoint_mismatch(track),
        });
    }
    let mismatch = gauge::endpoint_mismatch(track);
    if mismatch > tol.closure {
        return Err(BerryError::NotSmoothed { mismatch });
    }

    // Unique cycle: the last stored point duplicates the basepoint.
    let u = track.pairs.len() - 1;
    let mut sum = Complex64::default();
    match scheme {
        DiffScheme::Forward => {
            for j in 0..u {
                let diff = &track.pairs[j + 1].right - &track.pairs[j].right;
                sum += bilinear(&track.pairs[j].left, &diff);
            }
        }
        DiffScheme::Central => {
            for j in 0..u {
                let jp = (j + 1) % u;
                let jm = (j + u - 1) % u;
                let diff = (&track.pairs[jp].right - &track.pairs[jm].right)
                    / Complex64::new(2.0, 0.0);
                sum += bilinear(&track.pairs[j].left, &diff);
            }
        }
    }
    let gamma = Complex64::i() * sum;
    Ok(make_result(band_index, gamma, Method::Derivative, track.pairs.len(), tol))
}

/// Gauge-invariant Wilson-loop route, applicable before smoothing: only
/// per-point normalization is required.
///
/// `gamma = (i/2) Σ_{j} [ Ln <chi_j|phi_{j+1}> - Ln <chi_{j+1}|phi_j> ]`
/// with principal logarithms and the index wrapping to the basepoint, so
/// every per-point regauging `chi -> chi e^{-i t}, phi -> phi e^{+i t}`
/// cancels between consecutive terms.
pub fn zak_wilson(
    bundle: &SmoothedBundle,
    band_index: usize,
    tol: &Tolerances,
) -> Result<ZakResult, BerryError> {
    let track = bundle.band(band_index).ok_or(BerryError::NoSuchBand(band_index))?;
    for (index, p) in track.pairs.iter().enumerate() {
        let s = bilinear(&p.left, &p.right);
        if (s - Complex64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(BerryError::NotNormalized { index, overlap: s });
        }
    }

    let u = track.pairs.len() - 1;
    let mut sum = Complex64::default();
    for j in 0..u {
        let jp = (j + 1) % u;
        let forward = bilinear(&track.pairs[j].left, &track.pairs[jp].right);
        let backward = bilinear(&track.pairs[jp].left, &track.pairs[j].right);
        if forward.norm() < tol.overlap || backward.norm() < tol.overlap {
            return Err(BerryError::Gauge(GaugeError::VanishingOverlap {
                at: bundle.grid.points()[j],
                overlap: forward.norm().min(backward.norm()),
            }));
        }
        sum += (forward.ln() - backward.ln()) / 2.0;
    }
    let gamma = Complex64::i() * sum;
    Ok(make_result(band_index, gamma, Method::Wilson, track.pairs.len(), tol))
}

/// Method selection for sweeps and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodSelection {
    Derivative,
    Wilson,
    #[default]
    Both,
}

impl MethodSelection {
    pub fn wants_derivative(self) -> bool {
        matches!(self, MethodSelection::Derivative | MethodSelection::Both)
    }
    pub fn wants_wilson(self) -> bool {
        matches!(self, MethodSelection::Wilson | MethodSelection::Both)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub method: MethodSelection,
    pub scheme: DiffScheme,
    pub emit_analytic: bool,
    pub tol: Tolerances,
    /// Worker threads for the row loop; `None` uses the global default.
    pub workers: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            method: MethodSelection::Both,
            scheme: DiffScheme::default(),
            emit_analytic: true,
            tol: Tolerances::default(),
            workers: None,
        }
    }
}

/// One theta point of a sweep. Values are per band (index 0 = band 1).
/// `gamma` holds the reported phase (derivative route when selected,
/// otherwise Wilson); failed stages leave `None` and set `error`.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub theta: f64,
    pub gamma: [Option<Complex64>; 2],
    pub gamma_analytic: [Option<Complex64>; 2],
    pub pt_broken: bool,
    pub quant_residual: [Option<f64>; 2],
    pub oracle_gap: [Option<f64>; 2],
    pub error: Option<String>,
}

/// Evaluate one theta point: PT classification, both Zak routes, analytic
/// reference in the unbroken regime.
pub fn sweep_row(template: &SshParams, theta: f64, m: usize, opt: &SweepOptions) -> SweepRow {
    let mut row = SweepRow {
        theta,
        gamma: [None, None],
        gamma_analytic: [None, None],
        pt_broken: false,
        quant_residual: [None, None],
        oracle_gap: [None, None],
        error: None,
    };
    let params = template.with_theta(theta);
    if let Err(e) = params.validate() {
        row.error = Some(e.to_string());
        return row;
    }
    let model = BlochModel::Ssh(params);

    let grid = match LoopGrid::brillouin_zone(m) {
        Ok(g) => g,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };

    match models::pt_classify(&model, &grid, opt.tol.pt) {
        Ok(cls) => row.pt_broken = cls.is_broken(),
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }

    if opt.emit_analytic && !row.pt_broken {
        if let Ok((g1, g2)) = analytic::analytic_from_ssh(&params) {
            row.gamma_analytic = [Some(g1), Some(g2)];
        }
    }

    let raw = match gauge::solve_along_loop(&model, &grid, &opt.tol) {
        Ok(b) => b,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };

    let mut wilson: [Option<ZakResult>; 2] = [None, None];
    if opt.method.wants_wilson() {
        for band in 1..=2 {
            match zak_wilson(&raw, band, &opt.tol) {
                Ok(r) => wilson[band - 1] = Some(r),
                Err(e) => row.error = Some(e.to_string()),
            }
        }
    }

    let mut derivative: [Option<ZakResult>; 2] = [None, None];
    if opt.method.wants_derivative() {
        let smoothed: Result<Vec<_>, GaugeError> = raw
            .tracks
            .into_iter()
            .map(|t| gauge::trace_phases(t, &opt.tol).and_then(|t| gauge::apply_smoothing(t, &opt.tol)))
            .collect();
        match smoothed {
            Ok(tracks) => {
                let bundle = SmoothedBundle { grid, tracks };
                for band in 1..=2 {
                    match zak_derivative(&bundle, band, opt.scheme, &opt.tol) {
                        Ok(r) => derivative[band - 1] = Some(r),
                        Err(e) => row.error = Some(e.to_string()),
                    }
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
    }

    for b in 0..2 {
        row.oracle_gap[b] = match (&derivative[b], &wilson[b]) {
            (Some(d), Some(w)) => Some(gamma_distance(d.gamma, w.gamma)),
            _ => None,
        };
        // Quantization is reported from the Wilson route when available: its
        // real part is the sharper of the two.
        row.quant_residual[b] = wilson[b]
            .as_ref()
            .or(derivative[b].as_ref())
            .map(|r| r.quant_residual);
        row.gamma[b] = if opt.method.wants_derivative() {
            derivative[b].as_ref().map(|r| r.gamma)
        } else {
            wilson[b].as_ref().map(|r| r.gamma)
        };
    }
    row
}

/// Run a theta sweep; rows never abort the whole run. Row order follows the
/// input grid regardless of the worker count.
pub fn sweep(template: &SshParams, theta_grid: &[f64], m: usize, opt: &SweepOptions) -> Vec<SweepRow> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let run = |pool: Option<rayon::ThreadPool>| -> Vec<SweepRow> {
            let work = || {
                theta_grid
                    .par_iter()
                    .map(|&theta| sweep_row(template, theta, m, opt))
                    .collect()
            };
            match pool {
                Some(p) => p.install(work),
                None => work(),
            }
        };
        let pool = opt.workers.and_then(|n| {
            rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()
        });
        #[allow(clippy::needless_return)]
        return run(pool);
    }
    #[cfg(not(feature = "parallel"))]
    {
        theta_grid
            .iter()
            .map(|&theta| sweep_row(template, theta, m, opt))
            .collect()
    }
}

/// Uniform theta grid on `[min, max)`.
pub fn theta_linspace(min: f64, max: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|s| min + (max - min) * s as f64 / steps as f64)
        .collect()
}

/// One row of a grid-refinement study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub m: usize,
    pub gamma: Complex64,
    /// Distance to the previous row's value, `None` for the first row.
    pub delta_prev: Option<f64>,
}

/// Evaluate the Zak phase of one band at increasing grid sizes and report
/// successive differences. Used to certify tolerances empirically.
pub fn convergence_study(
    model: &BlochModel,
    band_index: usize,
    m_list: &[usize],
    method: Method,
    scheme: DiffScheme,
    tol: &Tolerances,
) -> Result<Vec<ConvergenceRow>, BerryError> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let grid = LoopGrid::brillouin_zone(m)?;
        let gamma = match method {
            Method::Wilson => {
                let raw = gauge::solve_along_loop(model, &grid, tol)?;
                zak_wilson(&raw, band_index, tol)?.gamma
            }
            Method::Derivative => {
                let bundle = gauge::smooth_gauge(model, &grid, tol)?;
                zak_derivative(&bundle, band_index, scheme, tol)?.gamma
            }
        };
        let delta_prev = rows.last().map(|r: &ConvergenceRow| gamma_distance(gamma, r.gamma));
        rows.push(ConvergenceRow { m, gamma, delta_prev });
    }
    Ok(rows)
}
