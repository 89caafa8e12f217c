//! Complex Zak/Berry phases of non-Hermitian Bloch Hamiltonians.
//!
//! Non-Hermitian Hamiltonians with PT-symmetric gain/loss terms carry a
//! complex-valued generalization of the Berry phase, built from matched left
//! and right eigenvectors under the unconjugated (biorthogonal) pairing
//! `<chi|phi> = sum_i chi_i phi_i`. Evaluating it numerically requires the
//! eigenvector phases to be smooth and single-valued around the loop, which
//! raw diagonalization does not provide.
//!
//! This crate implements the full pipeline:
//!
//! * [`eigsolver`] — dense complex eigendecomposition for small matrices,
//!   producing biorthonormalized left/right pairs,
//! * [`models`] — Bloch Hamiltonians: the PT-symmetric SSH chain and generic
//!   finite Fourier models, plus Pauli decomposition and PT classification,
//! * [`gauge`] — the two-stage gauge-smoothing procedure along a discretized
//!   closed loop (phase tracing, winding correction, smoothing factors),
//! * [`berry`] — Zak-phase evaluation from the smoothed bundle, a
//!   gauge-invariant Wilson-loop cross-check, quantization tests and sweeps,
//! * [`analytic`] — the closed-form elliptic-integral reference for the
//!   PT-symmetric SSH model,
//! * [`cli`] — the `zakline` command-line front end (feature `cli`).

// Comparisons spelled `!(x > 0.0)` are deliberate: they reject NaN along
// with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod berry;
#[cfg(feature = "cli")]
pub mod cli;
pub mod eigsolver;
pub mod gauge;
pub mod models;

pub use num_complex::Complex64;

/// Complex dense square matrix (row-major semantics, energies in model units).
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Complex vector; used for both right (column) and left (row-form) eigenvectors.
pub type CVector = nalgebra::DVector<Complex64>;

/// Numerical tolerances shared across the pipeline.
///
/// Defaults are double-precision desk scale; the CLI exposes `--tol-*`
/// overrides for each field.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Eigenpair residual bound, relative to the matrix norm.
    pub resid: f64,
    /// Cross-band biorthogonality bound `|<chi_m|phi_n>|`, m != n.
    pub ortho: f64,
    /// Left/right eigenvalue matching tolerance.
    pub pair: f64,
    /// Self-orthogonality threshold `|<chi_n|phi_n>|` before normalization
    /// (smaller values indicate an exceptional point).
    pub selforth: f64,
    /// Eigenvalue distance below which a degenerate subspace is assumed.
    pub degeneracy: f64,
    /// Largest `|Im E|` still considered real for PT classification.
    pub pt: f64,
    /// Smallest usable consecutive overlap along the loop.
    pub overlap: f64,
    /// Component-modulus floor (relative to the largest modulus) for the
    /// winding-phase component.
    pub component: f64,
    /// Endpoint mismatch allowed after smoothing (single-valuedness).
    pub closure: f64,
    /// Quantization verdict threshold on the circular distance to {0, pi}.
    pub quant: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            resid: 1e-12,
            ortho: 1e-10,
            pair: 1e-8,
            selforth: 1e-10,
            degeneracy: 1e-9,
            pt: 1e-9,
            overlap: 1e-8,
            component: 1e-6,
            closure: 1e-8,
            quant: 1e-6,
        }
    }
}
