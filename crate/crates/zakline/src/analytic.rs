//! Closed-form reference for the PT-symmetric SSH Zak phase.
//!
//! The complex Zak phases of the two bands are, in terms of the tunnelling
//! ratio `q = t+/t-` and the reduced gain/loss `eta = Gamma/(2 t-)`,
//!
//! ```text
//! gamma_{1/2} = pi Θ(q-1) ∓ i (eta/2) sqrt(nu/q) ( K(nu) + (q-1)/(q+1) Π(mu, nu) )
//! ```
//!
//! with `nu = 4q/((q+1)² - eta²)`, `mu = 4q/(q+1)²`, and the complete
//! elliptic integrals of the first and third kind. Band 1 carries the `-`
//! sign of the imaginary part (fixed by matching the numerical pipeline at
//! q = 3, eta = 1). Valid in the PT-unbroken regime `eta < |q - 1|`.

use num_complex::Complex64;
use thiserror::Error;

use crate::models::SshParams;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("PT-broken regime: eta = {eta} >= |q - 1| = {limit}; the closed form does not apply")]
    BrokenRegime { eta: f64, limit: f64 },
    #[error("degenerate tunnelling ratio q = 1: the gap closes and the Zak phase is ill-defined")]
    DegenerateRatio,
    #[error("quadrature failed to reach the requested tolerance")]
    NoConvergence,
}

/// Reduced inputs of the closed form, with the derived `nu`, `mu`.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticInputs {
    pub q: f64,
    pub eta: f64,
    pub nu: f64,
    pub mu: f64,
}

impl AnalyticInputs {
    /// Validate `(q, eta)` and derive `nu`, `mu`.
    pub fn new(q: f64, eta: f64) -> Result<Self, AnalyticError> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(AnalyticError::DomainError(format!("q must be > 0, got {q}")));
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(AnalyticError::DomainError(format!("eta must be >= 0, got {eta}")));
        }
        if q == 1.0 {
            return Err(AnalyticError::DegenerateRatio);
        }
        if eta >= (q - 1.0).abs() {
            return Err(AnalyticError::BrokenRegime { eta, limit: (q - 1.0).abs() });
        }
        let nu = 4.0 * q / ((q + 1.0) * (q + 1.0) - eta * eta);
        let mu = 4.0 * q / ((q + 1.0) * (q + 1.0));
        Ok(Self { q, eta, nu, mu })
    }

    pub fn from_ssh(p: &SshParams) -> Result<Self, AnalyticError> {
        let (tp, tm) = p.hopping_amplitudes();
        if tm <= 0.0 {
            return Err(AnalyticError::DomainError("t- must be positive".into()));
        }
        Self::new(tp / tm, p.gamma / (2.0 * tm))
    }
}

/// Complete elliptic integral of the first kind,
/// `K(nu) = ∫_0^{pi/2} dk / sqrt(1 - nu sin²k)`, for `0 <= nu < 1`.
pub fn elliptic_k(nu: f64) -> Result<f64, AnalyticError> {
    if !(0.0..1.0).contains(&nu) {
        return Err(AnalyticError::DomainError(format!("K requires 0 <= nu < 1, got {nu}")));
    }
    integrate(|k| {
        let s = k.sin();
        1.0 / (1.0 - nu * s * s).sqrt()
    })
}

/// Complete elliptic integral of the third kind,
/// `Π(mu, nu) = ∫_0^{pi/2} dk / ((1 - mu sin²k) sqrt(1 - nu sin²k))`,
/// for `0 <= nu < 1` and `mu < 1` (circular case).
pub fn elliptic_pi(mu: f64, nu: f64) -> Result<f64, AnalyticError> {
    if !(0.0..1.0).contains(&nu) {
        return Err(AnalyticError::DomainError(format!("Pi requires 0 <= nu < 1, got {nu}")));
    }
    if !(mu < 1.0) {
        return Err(AnalyticError::DomainError(format!("Pi requires mu < 1, got {mu}")));
    }
    integrate(|k| {
        let s = k.sin();
        let s2 = s * s;
        1.0 / ((1.0 - mu * s2) * (1.0 - nu * s2).sqrt())
    })
}

/// The closed-form complex Zak phases `(gamma_1, gamma_2)`.
///
/// `gamma_1` takes the `-` branch of the imaginary part, `gamma_2` the `+`
/// branch; their sum is `2 pi Θ(q-1)` exactly.
pub fn analytic_zak(q: f64, eta: f64) -> Result<(Complex64, Complex64), AnalyticError> {
    let inp = AnalyticInputs::new(q, eta)?;
    let re = if q > 1.0 { std::f64::consts::PI } else { 0.0 };
    let k = elliptic_k(inp.nu)?;
    let pi3 = elliptic_pi(inp.mu, inp.nu)?;
    let im = (eta / 2.0) * (inp.nu / q).sqrt() * (k + (q - 1.0) / (q + 1.0) * pi3);
    Ok((Complex64::new(re, -im), Complex64::new(re, im)))
}

/// Closed form evaluated at SSH parameters: derives `q = t+/t-` and
/// `eta = Gamma/(2 t-)` and delegates to [`analytic_zak`].
pub fn analytic_from_ssh(p: &SshParams) -> Result<(Complex64, Complex64), AnalyticError> {
    let inp = AnalyticInputs::from_ssh(p)?;
    analytic_zak(inp.q, inp.eta)
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature on [0, pi/2].
// ---------------------------------------------------------------------------

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1], kept at
// full published precision.
#[allow(clippy::excessive_precision)]
const KRONROD_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7/K15 panel: returns (kronrod estimate, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = (b - a) / 2.0;
    let mid = (a + b) / 2.0;
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for i in 0..8 {
        let node = KRONROD_NODES[i];
        let val = if node == 0.0 {
            f(mid)
        } else {
            f(mid - half * node) + f(mid + half * node)
        };
        kronrod += KRONROD_WEIGHTS[i] * val;
        // odd Kronrod indices are the embedded Gauss nodes
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * val;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive bisection to absolute tolerance 1e-12 with a hard cap on the
/// number of panels.
fn integrate<F: Fn(f64) -> f64>(f: F) -> Result<f64, AnalyticError> {
    const ABS_TOL: f64 = 1e-12;
    const MAX_PANELS: usize = 4096;

    let mut stack = vec![(0.0, std::f64::consts::FRAC_PI_2, ABS_TOL)];
    let mut total = 0.0;
    let mut panels = 0usize;
    while let Some((a, b, tol)) = stack.pop() {
        panels += 1;
        if panels > MAX_PANELS {
            return Err(AnalyticError::NoConvergence);
        }
        let (value, err) = gk15(&f, a, b);
        if !value.is_finite() {
            return Err(AnalyticError::NoConvergence);
        }
        if err <= tol || (b - a) < 1e-14 {
            total += value;
        } else {
            let mid = (a + b) / 2.0;
            stack.push((a, mid, tol / 2.0));
            stack.push((mid, b, tol / 2.0));
        }
    }
    Ok(total)
}
