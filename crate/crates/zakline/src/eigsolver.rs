//! Dense complex non-Hermitian eigendecomposition for small matrices.
//!
//! Produces matched left/right eigenpairs normalized under the bilinear
//! (unconjugated) pairing `<chi|phi> = sum_i chi_i phi_i`. Left eigenvectors
//! are computed as right eigenvectors of the plain transpose, so the pairing
//! needs no conjugation anywhere downstream. 2x2 matrices use the closed-form
//! quadratic decomposition; larger dimensions go through a complex Schur
//! decomposition followed by triangular back-substitution.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::{CMatrix, CVector, Tolerances};

#[derive(Debug, Error)]
pub enum EigError {
    #[error("matrix must be square with dim >= 2, got {rows}x{cols}")]
    InvalidShape { rows: usize, cols: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error(
        "eigenvalue {eigenvalue} is defective: geometric multiplicity {geometric} \
         below algebraic multiplicity {algebraic} (exceptional point)"
    )]
    DefectiveMatrix {
        eigenvalue: Complex64,
        geometric: usize,
        algebraic: usize,
    },
    #[error("eigensolver failed to converge")]
    NoConvergence,
    #[error("left and right eigenvalue lists do not match: {left} vs {right}")]
    LeftRightMismatch { left: Complex64, right: Complex64 },
    #[error(
        "ambiguous eigenvalue pairing: {a} and {b} are closer than tol_pair \
         but outside the degeneracy tolerance"
    )]
    PairingAmbiguous { a: Complex64, b: Complex64 },
    #[error(
        "self-orthogonal eigenpair at eigenvalue {eigenvalue}: |<chi|phi>| = {overlap:.3e} \
         (exceptional point)"
    )]
    SelfOrthogonal { eigenvalue: Complex64, overlap: f64 },
    #[error("degenerate subspace is numerically rank-deficient (pivot {pivot:.3e})")]
    SubspaceCollapse { pivot: f64 },
}

/// One band's eigenvalue with matched left (row-form) and right eigenvectors.
#[derive(Debug, Clone)]
pub struct BiorthPair {
    /// 1-based band label.
    pub band_index: usize,
    pub eigenvalue: Complex64,
    /// Left eigenvector chi, stored in row form: `chi H = E chi`.
    pub left: CVector,
    /// Right eigenvector phi: `H phi = E phi`.
    pub right: CVector,
}

/// All bands of one matrix, biorthonormalized and sorted by eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenSet {
    pub pairs: Vec<BiorthPair>,
}

/// Bilinear pairing `<chi|phi> = sum_i chi_i phi_i` — no complex conjugation.
pub fn bilinear(chi: &CVector, phi: &CVector) -> Complex64 {
    chi.iter().zip(phi.iter()).map(|(a, b)| a * b).sum()
}

/// Frobenius norm, used as the matrix scale for relative tolerances.
pub fn matrix_norm(h: &CMatrix) -> f64 {
    h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn validate(h: &CMatrix) -> Result<(), EigError> {
    if h.nrows() != h.ncols() || h.nrows() < 2 {
        return Err(EigError::InvalidShape {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EigError::NonFinite);
    }
    Ok(())
}

/// Deterministic eigenvalue ordering: by real part, ties by imaginary part.
fn eigenvalue_cmp(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Right eigendecomposition `H phi_n = E_n phi_n`.
///
/// Eigenvectors come back with unit 2-norm, sorted by `(Re E, Im E)`.
/// Returns [`EigError::DefectiveMatrix`] when a repeated eigenvalue has too
/// few independent eigenvectors.
pub fn eig_right(h: &CMatrix, tol: &Tolerances) -> Result<Vec<(Complex64, CVector)>, EigError> {
    validate(h)?;
    let mut out = if h.nrows() == 2 {
        eig2(h, tol)?
    } else {
        eig_schur(h, tol)?
    };
    out.sort_by(|a, b| eigenvalue_cmp(&a.0, &b.0));
    Ok(out)
}

/// Left eigendecomposition `chi_n H = E_n chi_n`, rows returned as vectors.
///
/// Implemented as the right eigenproblem of the plain (unconjugated)
/// transpose, so `<chi|phi>` downstream needs no conjugation.
pub fn eig_left(h: &CMatrix, tol: &Tolerances) -> Result<Vec<(Complex64, CVector)>, EigError> {
    validate(h)?;
    eig_right(&h.transpose(), tol)
}

/// Closed-form 2x2 eigendecomposition.
fn eig2(h: &CMatrix, tol: &Tolerances) -> Result<Vec<(Complex64, CVector)>, EigError> {
    let (a, b, c, d) = (h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
    let scale = matrix_norm(h).max(f64::MIN_POSITIVE);
    let mean = (a + d) / 2.0;
    let disc = (a - d) * (a - d) / 4.0 + b * c;
    let root = disc.sqrt(); // principal branch
    let lam = [mean - root, mean + root];

    if (lam[0] - lam[1]).norm() <= tol.degeneracy * scale {
        // Repeated eigenvalue: geometric multiplicity 2 only for scalar matrices.
        let off = b.norm().max(c.norm()).max((a - d).norm() / 2.0);
        if off > tol.degeneracy * scale {
            return Err(EigError::DefectiveMatrix {
                eigenvalue: mean,
                geometric: 1,
                algebraic: 2,
            });
        }
        return Ok(vec![
            (mean, unit_vector(2, 0)),
            (mean, unit_vector(2, 1)),
        ]);
    }

    let mut out = Vec::with_capacity(2);
    for &l in &lam {
        // (H - l) v = 0: rows give two candidate null vectors; take the larger.
        let cand1 = DVector::from_vec(vec![b, l - a]);
        let cand2 = DVector::from_vec(vec![l - d, c]);
        let v = if cand1.norm() >= cand2.norm() { cand1 } else { cand2 };
        let n = v.norm();
        if n <= f64::MIN_POSITIVE {
            // Distinct eigenvalues but no candidate row: matrix is diagonal.
            let idx = if (l - a).norm() <= (l - d).norm() { 0 } else { 1 };
            out.push((l, unit_vector(2, idx)));
        } else {
            out.push((l, v / Complex64::new(n, 0.0)));
        }
    }
    Ok(out)
}

fn unit_vector(dim: usize, idx: usize) -> CVector {
    let mut v = DVector::from_element(dim, Complex64::default());
    v[idx] = Complex64::new(1.0, 0.0);
    v
}

/// General dense path: complex Schur form, then back-substitution on the
/// triangular factor for the eigenvectors.
fn eig_schur(h: &CMatrix, tol: &Tolerances) -> Result<Vec<(Complex64, CVector)>, EigError> {
    let n = h.nrows();
    let scale = matrix_norm(h).max(f64::MIN_POSITIVE);
    let schur = h
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(EigError::NoConvergence)?;
    let (q, t) = schur.unpack();

    let mut out: Vec<(Complex64, CVector)> = Vec::with_capacity(n);
    for i in 0..n {
        let lam = t[(i, i)];
        // Solve (T - lam I) y = 0 with y[i] = 1, y[k] = 0 for k > i.
        let mut y = DVector::from_element(n, Complex64::default());
        y[i] = Complex64::new(1.0, 0.0);
        for k in (0..i).rev() {
            let mut num = Complex64::default();
            for m in (k + 1)..=i {
                num += t[(k, m)] * y[m];
            }
            let mut den = t[(k, k)] - lam;
            // Guarded division: near-equal diagonal entries (degenerate or
            // defective clusters) get a floor; rank checks below sort out
            // which of the two it was.
            let floor = f64::EPSILON * scale;
            if den.norm() < floor {
                den = Complex64::new(floor, 0.0);
            }
            y[k] = -num / den;
        }
        let v = &q * y;
        let norm = v.norm();
        out.push((lam, v / Complex64::new(norm, 0.0)));
    }

    check_cluster_ranks(&out, tol, scale)?;
    Ok(out)
}

/// For each group of (near-)equal eigenvalues, verify that the computed
/// eigenvectors actually span a subspace of matching dimension.
fn check_cluster_ranks(
    pairs: &[(Complex64, CVector)],
    tol: &Tolerances,
    scale: f64,
) -> Result<(), EigError> {
    let n = pairs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalue_cmp(&pairs[a].0, &pairs[b].0));

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && (pairs[order[end]].0 - pairs[order[end - 1]].0).norm() <= tol.degeneracy * scale
        {
            end += 1;
        }
        let size = end - start;
        if size > 1 {
            let dim = pairs[0].1.len();
            let mut m = DMatrix::from_element(dim, size, Complex64::default());
            for (col, &idx) in order[start..end].iter().enumerate() {
                m.set_column(col, &pairs[idx].1);
            }
            let sv = m.singular_values();
            let rank = sv.iter().filter(|&&s| s > 1e-6).count();
            if rank < size {
                return Err(EigError::DefectiveMatrix {
                    eigenvalue: pairs[order[start]].0,
                    geometric: rank,
                    algebraic: size,
                });
            }
        }
        start = end;
    }
    Ok(())
}

/// Match left and right eigenpairs by eigenvalue proximity and normalize each
/// pair so that `<chi_n|phi_n> = 1` under the bilinear pairing.
///
/// Both vectors are divided by the principal square root of the raw overlap.
/// Degenerate clusters are additionally passed through
/// [`biorthogonal_gram_schmidt`] so the whole set satisfies
/// `<chi_m|phi_n> = delta_mn`.
pub fn pair_and_biorthonormalize(
    lefts: Vec<(Complex64, CVector)>,
    rights: Vec<(Complex64, CVector)>,
    tol: &Tolerances,
) -> Result<EigenSet, EigError> {
    if lefts.len() != rights.len() {
        return Err(EigError::LeftRightMismatch {
            left: Complex64::new(lefts.len() as f64, 0.0),
            right: Complex64::new(rights.len() as f64, 0.0),
        });
    }
    let mut lefts = lefts;
    let mut rights = rights;
    lefts.sort_by(|a, b| eigenvalue_cmp(&a.0, &b.0));
    rights.sort_by(|a, b| eigenvalue_cmp(&a.0, &b.0));

    let scale = rights
        .iter()
        .map(|(e, _)| e.norm())
        .fold(1.0f64, f64::max);

    // Gaps between the degeneracy tolerance and the pairing tolerance cannot
    // be matched unambiguously.
    for w in rights.windows(2) {
        let gap = (w[1].0 - w[0].0).norm();
        if gap > tol.degeneracy * scale && gap < tol.pair * scale {
            return Err(EigError::PairingAmbiguous { a: w[0].0, b: w[1].0 });
        }
    }

    let mut pairs = Vec::with_capacity(rights.len());
    for (n, ((el, chi), (er, phi))) in lefts.into_iter().zip(rights).enumerate() {
        if (el - er).norm() > tol.pair * scale {
            return Err(EigError::LeftRightMismatch { left: el, right: er });
        }
        let (chi, phi) = normalize_pair(chi, phi, er, tol)?;
        pairs.push(BiorthPair {
            band_index: n + 1,
            eigenvalue: er,
            left: chi,
            right: phi,
        });
    }

    // Degenerate clusters need an explicit within-cluster orthonormalization.
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len()
            && (pairs[end].eigenvalue - pairs[end - 1].eigenvalue).norm()
                <= tol.degeneracy * scale
        {
            end += 1;
        }
        if end - start > 1 {
            let cluster: Vec<BiorthPair> = pairs[start..end].to_vec();
            let fixed = biorthogonal_gram_schmidt(&cluster, None, tol)?;
            for (slot, p) in pairs[start..end].iter_mut().zip(fixed) {
                slot.left = p.left;
                slot.right = p.right;
            }
        }
        start = end;
    }

    Ok(EigenSet { pairs })
}

/// Normalize one left/right pair: divide both by the principal square root of
/// the bilinear overlap. Vectors are first scaled to unit 2-norm so the
/// self-orthogonality test is scale-free.
fn normalize_pair(
    chi: CVector,
    phi: CVector,
    eigenvalue: Complex64,
    tol: &Tolerances,
) -> Result<(CVector, CVector), EigError> {
    let chi = &chi / Complex64::new(chi.norm(), 0.0);
    let phi = &phi / Complex64::new(phi.norm(), 0.0);
    let s = bilinear(&chi, &phi);
    if s.norm() < tol.selforth {
        return Err(EigError::SelfOrthogonal {
            eigenvalue,
            overlap: s.norm(),
        });
    }
    let root = s.sqrt(); // principal branch
    Ok((chi / root, phi / root))
}

/// Biorthogonal Gram-Schmidt on a degenerate subspace.
///
/// Without a reference, the pairs are orthonormalized in place. With a
/// reference (the pairs at the neighbouring grid point), the subspace is
/// first recombined so that `<chi_m|phi_n(ref)> ~ delta_mn` and
/// `<chi_m(ref)|phi_n> ~ delta_mn`, which keeps band tracking continuous
/// through the degeneracy.
pub fn biorthogonal_gram_schmidt(
    subspace: &[BiorthPair],
    reference: Option<&[BiorthPair]>,
    tol: &Tolerances,
) -> Result<Vec<BiorthPair>, EigError> {
    let d = subspace.len();
    if d == 0 {
        return Ok(Vec::new());
    }

    let mut lefts: Vec<CVector> = subspace.iter().map(|p| p.left.clone()).collect();
    let mut rights: Vec<CVector> = subspace.iter().map(|p| p.right.clone()).collect();

    if let Some(refs) = reference {
        if refs.len() != d {
            return Err(EigError::SubspaceCollapse { pivot: 0.0 });
        }
        // W[m][n] = <chi_m | phi_n(ref)>; new chi_n = sum_m (W^-1)[n][m] chi_m.
        let w = DMatrix::from_fn(d, d, |m, n| bilinear(&lefts[m], &refs[n].right));
        let v = DMatrix::from_fn(d, d, |m, n| bilinear(&refs[m].left, &rights[n]));
        let w_inv = invert_checked(w)?;
        let v_inv = invert_checked(v)?;
        let old_lefts = lefts.clone();
        let old_rights = rights.clone();
        for n in 0..d {
            let mut chi = DVector::from_element(old_lefts[0].len(), Complex64::default());
            let mut phi = DVector::from_element(old_rights[0].len(), Complex64::default());
            for m in 0..d {
                chi += &old_lefts[m] * w_inv[(n, m)];
                phi += &old_rights[m] * v_inv[(m, n)];
            }
            lefts[n] = chi;
            rights[n] = phi;
        }
    }

    // Two-sided Gram-Schmidt under the bilinear pairing.
    let mut out = Vec::with_capacity(d);
    for n in 0..d {
        let mut chi = lefts[n].clone();
        let mut phi = rights[n].clone();
        for done in out.iter().take(n) {
            let done: &BiorthPair = done;
            let c = bilinear(&done.left, &phi);
            phi -= &done.right * c;
            let c = bilinear(&chi, &done.right);
            chi -= &done.left * c;
        }
        let s = bilinear(&chi, &phi);
        let floor = chi.norm() * phi.norm();
        if s.norm() <= tol.selforth.max(1e-12 * floor) || floor <= f64::MIN_POSITIVE {
            return Err(EigError::SubspaceCollapse { pivot: s.norm() });
        }
        let root = s.sqrt();
        out.push(BiorthPair {
            band_index: subspace[n].band_index,
            eigenvalue: subspace[n].eigenvalue,
            left: chi / root,
            right: phi / root,
        });
    }
    Ok(out)
}

fn invert_checked(m: DMatrix<Complex64>) -> Result<DMatrix<Complex64>, EigError> {
    let svd = m.clone().svd(false, false);
    let smin = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax <= 0.0 || smin / smax < 1e-9 {
        return Err(EigError::SubspaceCollapse { pivot: smin });
    }
    m.try_inverse().ok_or(EigError::SubspaceCollapse { pivot: smin })
}

/// Convenience: full decomposition of one matrix into a biorthonormal set.
pub fn decompose(h: &CMatrix, tol: &Tolerances) -> Result<EigenSet, EigError> {
    let rights = eig_right(h, tol)?;
    let lefts = eig_left(h, tol)?;
    pair_and_biorthonormalize(lefts, rights, tol)
}
