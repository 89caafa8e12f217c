//! Bloch Hamiltonians: the PT-symmetric SSH chain and generic Fourier models.
//!
//! The SSH chain with alternating on-site gain/loss `+-i Gamma/2` has the
//! 2x2 Bloch matrix
//!
//! ```text
//! H(k) = [ -i Gamma/2         t- + t+ e^{ik} ]
//!        [ t- + t+ e^{-ik}    +i Gamma/2     ]
//! ```
//!
//! with hopping amplitudes `t± = t (1 ± Δ cosθ)`. Generic models are finite
//! Fourier series per matrix entry, which covers tight-binding Bloch
//! Hamiltonians exactly.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use thiserror::Error;

use crate::eigsolver::{self, EigError};
use crate::gauge::LoopGrid;
use crate::{CMatrix, Tolerances};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("config validation error: {0}")]
    ValidationError(String),
    #[error("operation requires a 2x2 model, got dim {0}")]
    NotTwoByTwo(usize),
    #[error(transparent)]
    Eig(#[from] EigError),
}

/// Parameters of the PT-symmetric SSH chain (lattice spacing fixed to 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SshParams {
    /// Mean tunnelling amplitude, > 0.
    pub t: f64,
    /// Dimerization strength, in [0, 1).
    pub delta: f64,
    /// Control parameter (radians) steering t+ vs t-.
    pub theta: f64,
    /// Gain/loss strength, >= 0.
    pub gamma: f64,
}

impl SshParams {
    pub fn new(t: f64, delta: f64, theta: f64, gamma: f64) -> Result<Self, ModelError> {
        let p = Self { t, delta, theta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(ModelError::InvalidParameter(format!("t must be > 0, got {}", self.t)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(ModelError::InvalidParameter(format!(
                "delta must be in [0, 1), got {}",
                self.delta
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !self.theta.is_finite() {
            return Err(ModelError::InvalidParameter("theta must be finite".into()));
        }
        let (tp, tm) = self.hopping_amplitudes();
        if tp < 0.0 || tm < 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "hopping amplitudes must be non-negative, got t+={tp}, t-={tm}"
            )));
        }
        Ok(())
    }

    /// `t± = t (1 ± Δ cosθ)`, returned as `(t_plus, t_minus)`.
    pub fn hopping_amplitudes(&self) -> (f64, f64) {
        let m = self.delta * self.theta.cos();
        (self.t * (1.0 + m), self.t * (1.0 - m))
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }
}

/// The SSH Bloch matrix at wave number `k`.
pub fn ssh_bloch(k: f64, p: &SshParams) -> CMatrix {
    let i = Complex64::i();
    let (tp, tm) = p.hopping_amplitudes();
    let tm = Complex64::new(tm, 0.0);
    let tp = Complex64::new(tp, 0.0);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            -i * p.gamma / 2.0,
            tm + tp * (i * k).exp(),
            tm + tp * (-i * k).exp(),
            i * p.gamma / 2.0,
        ],
    )
}

/// Pauli decomposition `H = n0 σ0 + n · σ` of a 2x2 matrix.
#[derive(Debug, Clone, Copy)]
pub struct PauliCoeffs {
    pub n0: Complex64,
    pub n: [Complex64; 3],
}

/// Coefficients from traces: `n0 = tr(H)/2`, `n_i = tr(σ_i H)/2`.
pub fn pauli_decompose(h: &CMatrix) -> Result<PauliCoeffs, ModelError> {
    if h.nrows() != 2 || h.ncols() != 2 {
        return Err(ModelError::NotTwoByTwo(h.nrows()));
    }
    let i = Complex64::i();
    Ok(PauliCoeffs {
        n0: (h[(0, 0)] + h[(1, 1)]) / 2.0,
        n: [
            (h[(0, 1)] + h[(1, 0)]) / 2.0,
            (h[(0, 1)] - h[(1, 0)]) * i / 2.0,
            (h[(0, 0)] - h[(1, 1)]) / 2.0,
        ],
    })
}

impl PauliCoeffs {
    /// Rebuild the matrix `n0 σ0 + n · σ`.
    pub fn reconstruct(&self) -> CMatrix {
        let i = Complex64::i();
        DMatrix::from_row_slice(
            2,
            2,
            &[
                self.n0 + self.n[2],
                self.n[0] - i * self.n[1],
                self.n[0] + i * self.n[1],
                self.n0 - self.n[2],
            ],
        )
    }

    /// Bilinear square `n · n` (no conjugation).
    pub fn n_dot_n(&self) -> Complex64 {
        self.n.iter().map(|z| z * z).sum()
    }
}

/// Band energies `E± = n0 ± sqrt(n · n)` with the principal square root.
pub fn energies(c: &PauliCoeffs) -> (Complex64, Complex64) {
    let root = c.n_dot_n().sqrt();
    (c.n0 + root, c.n0 - root)
}

/// Generic Bloch model: each entry is a finite Fourier series
/// `H(k)_{ij} = Σ_m c_m e^{i m k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierModel {
    dim: usize,
    /// (row, col, harmonic, coefficient)
    entries: Vec<(usize, usize, i32, Complex64)>,
}

impl FourierModel {
    pub fn new(dim: usize, entries: Vec<(usize, usize, i32, Complex64)>) -> Result<Self, ModelError> {
        if dim < 2 {
            return Err(ModelError::ValidationError(format!("dim must be >= 2, got {dim}")));
        }
        for &(r, c, _, _) in &entries {
            if r >= dim || c >= dim {
                return Err(ModelError::ValidationError(format!(
                    "entry index ({r},{c}) out of range for dim {dim}"
                )));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn matrix(&self, k: f64) -> CMatrix {
        let mut h = DMatrix::from_element(self.dim, self.dim, Complex64::default());
        let i = Complex64::i();
        for &(r, c, m, coeff) in &self.entries {
            h[(r, c)] += coeff * (i * (m as f64) * k).exp();
        }
        h
    }
}

/// A Bloch Hamiltonian: a map from the loop coordinate to a dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum BlochModel {
    Ssh(SshParams),
    Fourier(FourierModel),
}

impl BlochModel {
    pub fn dim(&self) -> usize {
        match self {
            BlochModel::Ssh(_) => 2,
            BlochModel::Fourier(f) => f.dim,
        }
    }

    pub fn matrix(&self, alpha: f64) -> CMatrix {
        match self {
            BlochModel::Ssh(p) => ssh_bloch(alpha, p),
            BlochModel::Fourier(f) => f.matrix(alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtStatus {
    Unbroken,
    Broken,
}

/// Result of scanning the spectrum over a loop for complex eigenvalues.
#[derive(Debug, Clone)]
pub struct PtClassification {
    pub status: PtStatus,
    /// Largest |Im E| found over the grid.
    pub max_imag_gap: f64,
    /// Loop coordinates where |Im E| first exceeds the tolerance.
    pub critical_points: Vec<f64>,
}

impl PtClassification {
    pub fn is_broken(&self) -> bool {
        self.status == PtStatus::Broken
    }
}

/// Classify the PT phase: broken iff any grid point carries an eigenvalue
/// with `|Im E| > tol_pt`.
pub fn pt_classify(
    model: &BlochModel,
    grid: &LoopGrid,
    tol_pt: f64,
) -> Result<PtClassification, ModelError> {
    let tol = Tolerances::default();
    let mut max_imag: f64 = 0.0;
    let mut critical = Vec::new();
    let mut prev_exceeded = false;
    for &alpha in grid.points() {
        let h = model.matrix(alpha);
        let eigs = eigsolver::eig_right(&h, &tol)?;
        let imag = eigs.iter().map(|(e, _)| e.im.abs()).fold(0.0f64, f64::max);
        max_imag = max_imag.max(imag);
        let exceeded = imag > tol_pt;
        if exceeded && !prev_exceeded {
            critical.push(alpha);
        }
        prev_exceeded = exceeded;
    }
    let status = if max_imag > tol_pt { PtStatus::Broken } else { PtStatus::Unbroken };
    Ok(PtClassification { status, max_imag_gap: max_imag, critical_points: critical })
}

/// Best-fit chiral symmetry generator for a 2x2 model.
///
/// A chiral symmetry `Λ = a · σ` (the σ0 part is forced to vanish) must
/// satisfy `a · n(k) = 0` at every k. The returned unit vector minimizes
/// `Σ_k |a · n(k)|²` (smallest eigenvector of the accumulated Gram matrix);
/// the residual is the root-mean-square of `|a · n(k)|` over the loop.
/// Returns `None` for the direction when the model has no Pauli content at
/// all (every direction is trivially chiral).
pub fn chiral_residual(
    model: &BlochModel,
    grid: &LoopGrid,
) -> Result<(Option<[f64; 3]>, f64), ModelError> {
    if model.dim() != 2 {
        return Err(ModelError::NotTwoByTwo(model.dim()));
    }
    // The closing duplicate of the basepoint is skipped so no k is counted twice.
    let mut gram = Matrix3::<f64>::zeros();
    let count = grid.len() - 1;
    for &alpha in &grid.points()[..count] {
        let coeffs = pauli_decompose(&model.matrix(alpha))?;
        for r in 0..3 {
            for c in 0..3 {
                // Re(n n^H) makes |a·n|^2 = a^T G a for real a.
                gram[(r, c)] += (coeffs.n[r] * coeffs.n[c].conj()).re;
            }
        }
    }
    let eig = nalgebra::SymmetricEigen::new(gram);
    let (mut min_idx, mut max_val) = (0usize, f64::MIN);
    let mut min_val = f64::MAX;
    for idx in 0..3 {
        let v = eig.eigenvalues[idx];
        if v < min_val {
            min_val = v;
            min_idx = idx;
        }
        max_val = max_val.max(v);
    }
    if max_val <= 1e-30 {
        return Ok((None, 0.0));
    }
    let dir = eig.eigenvectors.column(min_idx);
    let mut a = [dir[0], dir[1], dir[2]];
    // deterministic sign: largest-magnitude component positive
    let lead = (0..3).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap();
    if a[lead] < 0.0 {
        a.iter_mut().for_each(|x| *x = -*x);
    }
    let residual = (min_val.max(0.0) / count as f64).sqrt();
    Ok((Some(a), residual))
}

/// Parse an angle literal; the suffix `pi` multiplies by π (e.g. `0.3pi`).
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (body, factor) = match s.strip_suffix("pi") {
        Some(rest) => (rest.trim_end(), std::f64::consts::PI),
        None => (s, 1.0),
    };
    let value: f64 = if body.is_empty() || body == "-" {
        // bare "pi" / "-pi"
        if body == "-" { -1.0 } else { 1.0 }
    } else {
        body.parse().map_err(|_| format!("invalid number `{s}`"))?
    };
    Ok(value * factor)
}

/// Parse a flat `key=value` model config (`#` starts a comment).
///
/// SSH keys: `model=ssh`, `t`, `delta`, `gamma`, `theta` (with optional `pi`
/// suffix). Fourier keys: `model=fourier`, `dim`, and repeated
/// `entry=i,j,m,re,im` lines.
pub fn load_model(config_text: &str) -> Result<BlochModel, ModelError> {
    let mut kind: Option<String> = None;
    let mut t = None;
    let mut delta = None;
    let mut theta = None;
    let mut gamma = None;
    let mut dim: Option<usize> = None;
    let mut entries: Vec<(usize, usize, i32, Complex64)> = Vec::new();

    for (idx, raw) in config_text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ModelError::ParseError {
            line: line_no,
            message: format!("expected key=value, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |field: &str, v: &str| -> Result<f64, ModelError> {
            v.parse().map_err(|_| ModelError::ParseError {
                line: line_no,
                message: format!("field `{field}`: invalid number `{v}`"),
            })
        };
        match key {
            "model" => kind = Some(value.to_string()),
            "t" => t = Some(parse_f64("t", value)?),
            "delta" => delta = Some(parse_f64("delta", value)?),
            "gamma" => gamma = Some(parse_f64("gamma", value)?),
            "theta" => {
                theta = Some(parse_angle(value).map_err(|message| ModelError::ParseError {
                    line: line_no,
                    message: format!("field `theta`: {message}"),
                })?)
            }
            "dim" => {
                dim = Some(value.parse().map_err(|_| ModelError::ParseError {
                    line: line_no,
                    message: format!("field `dim`: invalid integer `{value}`"),
                })?)
            }
            "entry" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 5 {
                    return Err(ModelError::ParseError {
                        line: line_no,
                        message: format!("field `entry`: expected i,j,m,re,im, got `{value}`"),
                    });
                }
                let idx_parse = |field: &str, v: &str| -> Result<usize, ModelError> {
                    v.parse().map_err(|_| ModelError::ParseError {
                        line: line_no,
                        message: format!("field `entry.{field}`: invalid integer `{v}`"),
                    })
                };
                let r = idx_parse("i", parts[0])?;
                let c = idx_parse("j", parts[1])?;
                let m: i32 = parts[2].parse().map_err(|_| ModelError::ParseError {
                    line: line_no,
                    message: format!("field `entry.m`: invalid integer `{}`", parts[2]),
                })?;
                let re = parse_f64("entry.re", parts[3])?;
                let im = parse_f64("entry.im", parts[4])?;
                entries.push((r, c, m, Complex64::new(re, im)));
            }
            other => {
                return Err(ModelError::ParseError {
                    line: line_no,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
    }

    match kind.as_deref() {
        Some("ssh") => {
            let t = t.ok_or_else(|| ModelError::ValidationError("ssh model requires `t`".into()))?;
            let delta = delta
                .ok_or_else(|| ModelError::ValidationError("ssh model requires `delta`".into()))?;
            let gamma = gamma
                .ok_or_else(|| ModelError::ValidationError("ssh model requires `gamma`".into()))?;
            let theta = theta
                .ok_or_else(|| ModelError::ValidationError("ssh model requires `theta`".into()))?;
            Ok(BlochModel::Ssh(SshParams::new(t, delta, theta, gamma)?))
        }
        Some("fourier") => {
            let dim = dim
                .ok_or_else(|| ModelError::ValidationError("fourier model requires `dim`".into()))?;
            if entries.is_empty() {
                return Err(ModelError::ValidationError(
                    "fourier model requires at least one `entry`".into(),
                ));
            }
            Ok(BlochModel::Fourier(FourierModel::new(dim, entries)?))
        }
        Some(other) => Err(ModelError::ValidationError(format!("unknown model `{other}`"))),
        None => Err(ModelError::ValidationError("missing `model` key".into())),
    }
}
