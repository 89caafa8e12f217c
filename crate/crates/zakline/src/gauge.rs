//! Two-stage gauge smoothing of a biorthogonal eigenbasis along a closed loop.
//!
//! Raw diagonalization attaches an arbitrary global phase to the eigenvectors
//! at every grid point. Stage one removes the point-to-point arbitrariness by
//! rotating each pair so its overlaps with the previous point are real and
//! non-negative, then renormalizing. The result is smooth inside the loop but
//! generally not single-valued: the basepoint and endpoint states differ by a
//! leftover phase. Stage two measures that phase from one tracked vector
//! component — including the winding correction `X` counting branch crossings
//! of its argument — and distributes the compensation linearly around the
//! loop, making the basis single-valued.

use num_complex::Complex64;
use thiserror::Error;

use crate::eigsolver::{self, bilinear, BiorthPair, EigError};
use crate::models::BlochModel;
use crate::{CVector, Tolerances};

#[derive(Debug, Error)]
pub enum GaugeError {
    #[error("loop grid invalid: {0}")]
    InvalidGrid(String),
    #[error(
        "band tracking ambiguous at alpha = {at}: overlap matrix is far from a permutation \
         (band crossing or grid too coarse)"
    )]
    BandCrossing { at: f64 },
    #[error(
        "vanishing consecutive overlap |<chi|phi>| = {overlap:.3e} at alpha = {at}: \
         refine the grid or check for a band crossing / exceptional point"
    )]
    VanishingOverlap { at: f64, overlap: f64 },
    #[error("no vector component stays above the modulus floor along the whole loop")]
    NoUsableComponent,
    #[error("track must be phase-traced before this operation")]
    NotTraced,
    #[error(
        "endpoint mismatch {mismatch:.3e} after smoothing exceeds the closure tolerance \
         (wrong winding count or a missed discontinuity)"
    )]
    ClosureFailure { mismatch: f64 },
    #[error(transparent)]
    Eig(#[from] EigError),
}

/// Ordered discretization of a closed loop; the last point is the basepoint
/// shifted by one period and is identified with it.
#[derive(Debug, Clone)]
pub struct LoopGrid {
    points: Vec<f64>,
    period: f64,
}

impl LoopGrid {
    pub fn new(points: Vec<f64>, period: f64) -> Result<Self, GaugeError> {
        if points.len() < 3 {
            return Err(GaugeError::InvalidGrid(format!(
                "need at least 3 points, got {} (grid too coarse)",
                points.len()
            )));
        }
        if !points.windows(2).all(|w| w[1] > w[0]) {
            return Err(GaugeError::InvalidGrid("points must be strictly increasing".into()));
        }
        if !(period > 0.0) {
            return Err(GaugeError::InvalidGrid(format!("period must be > 0, got {period}")));
        }
        let span = points[points.len() - 1] - points[0];
        if (span - period).abs() > 1e-9 * period {
            return Err(GaugeError::InvalidGrid(format!(
                "span {span} does not match the period {period}"
            )));
        }
        Ok(Self { points, period })
    }

    /// Uniform closed grid of `m` points covering one period, endpoint included.
    pub fn closed_uniform(start: f64, period: f64, m: usize) -> Result<Self, GaugeError> {
        if m < 3 {
            return Err(GaugeError::InvalidGrid(format!(
                "need at least 3 points, got {m} (grid too coarse)"
            )));
        }
        let points = (0..m)
            .map(|j| start + period * j as f64 / (m - 1) as f64)
            .collect();
        Self::new(points, period)
    }

    /// The Brillouin zone `[-pi, pi]` as a closed loop of `m` points.
    pub fn brillouin_zone(m: usize) -> Result<Self, GaugeError> {
        Self::closed_uniform(-std::f64::consts::PI, 2.0 * std::f64::consts::PI, m)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// Winding data of one traced band: total phase change of the tracked
/// component, the signed crossing count, and the component index.
#[derive(Debug, Clone, Copy)]
pub struct WindingData {
    /// Total unwrapped phase change of component `p` from basepoint to endpoint.
    pub delta_phi: f64,
    /// Signed count of argument crossings over the borders of `[-pi, pi)`.
    pub crossings: i64,
    /// Tracked component index.
    pub component: usize,
}

/// One band followed around the loop: one biorthonormal pair per grid point.
#[derive(Debug, Clone)]
pub struct BandTrack {
    pub band_index: usize,
    pub pairs: Vec<BiorthPair>,
    pub traced: bool,
    pub smoothed: bool,
    pub winding: Option<WindingData>,
}

/// All bands over one loop.
#[derive(Debug, Clone)]
pub struct SmoothedBundle {
    pub grid: LoopGrid,
    pub tracks: Vec<BandTrack>,
}

impl SmoothedBundle {
    pub fn band(&self, band_index: usize) -> Option<&BandTrack> {
        self.tracks.iter().find(|t| t.band_index == band_index)
    }
}

/// Diagonalize the model at every grid point and follow bands by overlap
/// continuity. The output still carries arbitrary per-point phases.
///
/// Degenerate eigenvalue clusters are re-aligned against the neighbouring
/// point through the biorthogonal Gram-Schmidt reference path.
pub fn solve_along_loop(
    model: &BlochModel,
    grid: &LoopGrid,
    tol: &Tolerances,
) -> Result<SmoothedBundle, GaugeError> {
    let dim = model.dim();
    let mut per_point: Vec<Vec<BiorthPair>> = Vec::with_capacity(grid.len());

    for (j, &alpha) in grid.points().iter().enumerate() {
        let h = model.matrix(alpha);
        let set = eigsolver::decompose(&h, tol)?;
        let mut pairs = set.pairs;

        if j > 0 {
            let prev = &per_point[j - 1];
            pairs = match_to_previous(prev, pairs, alpha, tol)?;
        }
        debug_assert_eq!(pairs.len(), dim);
        per_point.push(pairs);
    }

    let tracks = (0..dim)
        .map(|n| BandTrack {
            band_index: n + 1,
            pairs: per_point.iter().map(|pt| pt[n].clone()).collect(),
            traced: false,
            smoothed: false,
            winding: None,
        })
        .collect();

    Ok(SmoothedBundle { grid: grid.clone(), tracks })
}

/// Reorder `current` so that band `n` continues `prev[n]`, using the
/// magnitude of `<chi_prev|phi_cur>` as the matching score.
fn match_to_previous(
    prev: &[BiorthPair],
    current: Vec<BiorthPair>,
    alpha: f64,
    tol: &Tolerances,
) -> Result<Vec<BiorthPair>, GaugeError> {
    let d = prev.len();
    let scale = current
        .iter()
        .map(|p| p.eigenvalue.norm())
        .fold(1.0f64, f64::max);

    // Degenerate clusters are aligned to the previous point first; afterwards
    // the overlap matrix is near-permutation and greedy assignment is safe.
    let mut current = current;
    let clusters = degenerate_clusters(&current, tol.degeneracy * scale);
    for cluster in &clusters {
        // Reference pairs: previous-point bands with the largest overlap onto
        // the cluster's right subspace, one per cluster member.
        let mut scored: Vec<(f64, usize)> = (0..d)
            .map(|m| {
                let s: f64 = cluster
                    .iter()
                    .map(|&n| bilinear(&prev[m].left, &current[n].right).norm_sqr())
                    .sum();
                (s, m)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut ref_idx: Vec<usize> = scored[..cluster.len()].iter().map(|&(_, m)| m).collect();
        ref_idx.sort_unstable();
        let refs: Vec<BiorthPair> = ref_idx.iter().map(|&m| prev[m].clone()).collect();
        let members: Vec<BiorthPair> = cluster.iter().map(|&n| current[n].clone()).collect();
        let aligned = eigsolver::biorthogonal_gram_schmidt(&members, Some(&refs), tol)?;
        for (&n, p) in cluster.iter().zip(aligned) {
            current[n] = p;
        }
    }

    let mut ovl = vec![vec![0.0f64; d]; d];
    for (m, pm) in prev.iter().enumerate() {
        for (n, pn) in current.iter().enumerate() {
            ovl[m][n] = bilinear(&pm.left, &pn.right).norm();
        }
    }

    // Greedy assignment on the largest overlaps.
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(d * d);
    for (m, row) in ovl.iter().enumerate() {
        for (n, &v) in row.iter().enumerate() {
            entries.push((v, m, n));
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut row_of = vec![usize::MAX; d];
    let mut col_used = vec![false; d];
    let mut row_used = vec![false; d];
    for (_, m, n) in entries {
        if !row_used[m] && !col_used[n] {
            row_used[m] = true;
            col_used[n] = true;
            row_of[m] = n;
        }
    }

    // Ambiguity check: each selected overlap must dominate the competing
    // entries in its row and column. Cluster members were reference-aligned
    // above, so a remaining tie means a genuine band crossing.
    #[allow(clippy::needless_range_loop)]
    for m in 0..d {
        let n = row_of[m];
        let chosen = ovl[m][n];
        for other in 0..d {
            let competitor = if other != n { ovl[m][other] } else { 0.0 };
            let competitor = competitor.max(if other != m { ovl[other][n] } else { 0.0 });
            if chosen < 1.2 * competitor {
                return Err(GaugeError::BandCrossing { at: alpha });
            }
        }
    }

    let mut out: Vec<Option<BiorthPair>> = current.into_iter().map(Some).collect();
    let mut reordered = Vec::with_capacity(d);
    for m in 0..d {
        let mut p = out[row_of[m]].take().expect("assignment is a permutation");
        p.band_index = prev[m].band_index;
        reordered.push(p);
    }
    Ok(reordered)
}

fn degenerate_clusters(pairs: &[BiorthPair], tol_abs: f64) -> Vec<Vec<usize>> {
    // pairs arrive sorted by eigenvalue from the solver
    let mut clusters = Vec::new();
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len()
            && (pairs[end].eigenvalue - pairs[end - 1].eigenvalue).norm() <= tol_abs
        {
            end += 1;
        }
        if end - start > 1 {
            clusters.push((start..end).collect());
        }
        start = end;
    }
    clusters
}

/// Stage one: iteratively rotate each pair so both consecutive overlaps with
/// the previous point are real and non-negative, then renormalize.
///
/// The basepoint keeps one arbitrary phase, fixed here by making the tracked
/// component of `chi` at the basepoint real and positive, so repeated runs
/// are reproducible.
pub fn trace_phases(track: BandTrack, tol: &Tolerances) -> Result<BandTrack, GaugeError> {
    let mut track = track;
    let component = usable_component(&track, tol.component)?;

    // Basepoint phase fixing preserves <chi|phi> = 1.
    let theta = track.pairs[0].left[component].arg();
    let rot = Complex64::from_polar(1.0, -theta);
    track.pairs[0].left *= rot;
    track.pairs[0].right *= rot.conj();

    for j in 1..track.pairs.len() {
        let (head, tail) = track.pairs.split_at_mut(j);
        let prev = &head[j - 1];
        let cur = &mut tail[0];

        let a = bilinear(&cur.left, &prev.right);
        let b = bilinear(&prev.left, &cur.right);
        if a.norm() < tol.overlap || b.norm() < tol.overlap {
            return Err(GaugeError::VanishingOverlap {
                at: j as f64,
                overlap: a.norm().min(b.norm()),
            });
        }
        cur.left *= Complex64::from_polar(1.0, -a.arg());
        cur.right *= Complex64::from_polar(1.0, -b.arg());

        // Renormalize: the two phase factors above displace <chi|phi> from 1
        // by their product, removed symmetrically by the principal root.
        let s = bilinear(&cur.left, &cur.right);
        let root = s.sqrt();
        cur.left /= root;
        cur.right /= root;
    }

    track.traced = true;
    track.winding = None;
    track.smoothed = false;
    Ok(track)
}

/// Lowest component index whose modulus stays above `tol_component` times the
/// global maximum modulus at every grid point. The argument of a near-zero
/// component is numerical noise, so the component must be usable everywhere.
fn usable_component(track: &BandTrack, tol_component: f64) -> Result<usize, GaugeError> {
    let dim = track.pairs[0].left.len();
    let max_mod = track
        .pairs
        .iter()
        .flat_map(|p| p.left.iter())
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    let floor = tol_component * max_mod;
    'component: for p in 0..dim {
        for pair in &track.pairs {
            if pair.left[p].norm() <= floor {
                continue 'component;
            }
        }
        return Ok(p);
    }
    Err(GaugeError::NoUsableComponent)
}

/// Stage-two bookkeeping: total phase change of the tracked left-vector
/// component around the loop.
///
/// `delta_phi = arg_M - arg_1 + 2 pi X`, where the args are the stored
/// principal values and `X` counts their signed crossings of the borders of
/// `[-pi, pi)`: a stored jump from the `-pi` side up to the `+pi` side
/// decrements `X`, the opposite jump increments it. This reproduces standard
/// phase unwrapping.
pub fn phase_winding(track: &BandTrack, tol_component: f64) -> Result<WindingData, GaugeError> {
    if !track.traced {
        return Err(GaugeError::NotTraced);
    }
    let component = usable_component(track, tol_component)?;
    let mut args: Vec<f64> = track.pairs.iter().map(|p| p.left[component].arg()).collect();

    // Endpoint-on-cut tie-break. When the total drift is an exact odd
    // multiple of pi (quantized configurations), the closing point lands on
    // the branch cut and its principal argument is decided by rounding noise.
    // Canonicalize it against the direction of arrival: a descending path
    // reaching -pi has completed the downward crossing (and mirrored for an
    // ascending path into +pi). Observables are unchanged either way; this
    // only pins the crossing count.
    let pi = std::f64::consts::PI;
    let m = args.len();
    if pi - args[m - 1].abs() < 1e-10 {
        let arrival = wrap_angle(args[m - 1] - args[m - 2]);
        if arrival < 0.0 && args[m - 1] < 0.0 {
            args[m - 1] += 2.0 * pi;
        } else if arrival > 0.0 && args[m - 1] > 0.0 {
            args[m - 1] -= 2.0 * pi;
        }
    }

    let mut crossings: i64 = 0;
    for w in args.windows(2) {
        let d = w[1] - w[0];
        if d > pi {
            crossings -= 1;
        } else if d < -pi {
            crossings += 1;
        }
    }
    let delta_phi = args[m - 1] - args[0] + 2.0 * pi * crossings as f64;
    Ok(WindingData { delta_phi, crossings, component })
}

/// The smoothing profile: the simplest function with `f(0) = 0` and
/// `f(1) = delta_phi` is the linear one.
pub fn smoothing_function(delta_phi: f64, x: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x));
    delta_phi * x
}

/// Stage two: multiply the states at grid point `j` by the compensating
/// phase factors `e^{ -i f((j-1)/(M-1)) }` (left) and conjugate (right).
///
/// Afterwards the endpoint states coincide with the basepoint states; the
/// residual mismatch is checked against the closure tolerance.
pub fn apply_smoothing(track: BandTrack, tol: &Tolerances) -> Result<BandTrack, GaugeError> {
    let mut track = track;
    let winding = match track.winding {
        Some(w) => w,
        None => {
            let w = phase_winding(&track, tol.component)?;
            track.winding = Some(w);
            w
        }
    };
    let m = track.pairs.len();
    for (j, pair) in track.pairs.iter_mut().enumerate() {
        let x = j as f64 / (m - 1) as f64;
        let f = smoothing_function(winding.delta_phi, x);
        let rot = Complex64::from_polar(1.0, -f);
        pair.left *= rot;
        pair.right *= rot.conj();
    }

    let mismatch = endpoint_mismatch(&track);
    if mismatch > tol.closure {
        return Err(GaugeError::ClosureFailure { mismatch });
    }
    track.smoothed = true;
    Ok(track)
}

fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = x.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Largest componentwise deviation between the endpoint and basepoint states.
pub fn endpoint_mismatch(track: &BandTrack) -> f64 {
    let first = &track.pairs[0];
    let last = &track.pairs[track.pairs.len() - 1];
    let d1 = max_abs_diff(&first.left, &last.left);
    let d2 = max_abs_diff(&first.right, &last.right);
    d1.max(d2)
}

fn max_abs_diff(a: &CVector, b: &CVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0f64, f64::max)
}

/// The full two-stage pipeline: solve along the loop, trace the phases of
/// each band, measure the winding, and smooth.
pub fn smooth_gauge(
    model: &BlochModel,
    grid: &LoopGrid,
    tol: &Tolerances,
) -> Result<SmoothedBundle, GaugeError> {
    let bundle = solve_along_loop(model, grid, tol)?;
    let tracks = bundle
        .tracks
        .into_iter()
        .map(|t| {
            let t = trace_phases(t, tol)?;
            apply_smoothing(t, tol)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SmoothedBundle { grid: bundle.grid, tracks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::SshParams;
    use nalgebra::DVector;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn unbroken_model() -> BlochModel {
        BlochModel::Ssh(SshParams::new(1.0, 0.5, 0.0, 1.0).unwrap())
    }

    #[test]
    fn grid_construction_and_validation() {
        let g = LoopGrid::brillouin_zone(101).unwrap();
        assert_eq!(g.len(), 101);
        assert!((g.points()[0] + PI).abs() < 1e-15);
        assert!((g.points()[100] - PI).abs() < 1e-15);
        assert!((g.points()[50]).abs() < 1e-12, "odd M places k=0 on the grid");
        assert!(LoopGrid::brillouin_zone(2).is_err());
        assert!(LoopGrid::new(vec![0.0, 1.0, 0.5], 0.5, ).is_err());
        assert!(LoopGrid::new(vec![0.0, 1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn constant_model_has_constant_tracks() {
        // H(alpha) = sigma1 for every alpha
        let f = crate::models::FourierModel::new(
            2,
            vec![(0, 1, 0, c(1., 0.)), (1, 0, 0, c(1., 0.))],
        )
        .unwrap();
        let grid = LoopGrid::brillouin_zone(51).unwrap();
        let bundle = solve_along_loop(&BlochModel::Fourier(f), &grid, &tol()).unwrap();
        for (n, expect) in [(0usize, -1.0), (1usize, 1.0)] {
            for p in &bundle.tracks[n].pairs {
                assert!((p.eigenvalue - c(expect, 0.)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalue_continuity_along_loop() {
        let grid = LoopGrid::brillouin_zone(101).unwrap();
        let bundle = solve_along_loop(&unbroken_model(), &grid, &tol()).unwrap();
        // Lipschitz-style bound: max step change below 10 * period/M * max|dE/dk|.
        // For the SSH bands |dE/dk| <= t+ t- / min|E| + ...; 4.0 is a generous cap
        // derived from the closed form at these parameters.
        let step_cap = 10.0 * grid.period() / grid.len() as f64 * 4.0;
        for track in &bundle.tracks {
            for w in track.pairs.windows(2) {
                assert!((w[1].eigenvalue - w[0].eigenvalue).norm() < step_cap);
            }
        }
    }

    #[test]
    fn tracing_removes_pure_phases() {
        // Two-point toy track: previous (1,0),(1,0); current has extra phases.
        let mk = |z: Complex64| {
            let mut v = DVector::from_element(2, Complex64::default());
            v[0] = z;
            v
        };
        let track = BandTrack {
            band_index: 1,
            pairs: vec![
                BiorthPair {
                    band_index: 1,
                    eigenvalue: c(0., 0.),
                    left: mk(c(1., 0.)),
                    right: mk(c(1., 0.)),
                },
                BiorthPair {
                    band_index: 1,
                    eigenvalue: c(0., 0.),
                    left: mk(Complex64::from_polar(1.0, PI / 4.0)),
                    right: mk(Complex64::from_polar(1.0, -PI / 4.0)),
                },
                BiorthPair {
                    band_index: 1,
                    eigenvalue: c(0., 0.),
                    left: mk(c(1., 0.)),
                    right: mk(c(1., 0.)),
                },
            ],
            traced: false,
            smoothed: false,
            winding: None,
        };
        let traced = trace_phases(track, &tol()).unwrap();
        for p in &traced.pairs {
            assert!((p.left[0] - c(1., 0.)).norm() < 1e-14);
            assert!((p.right[0] - c(1., 0.)).norm() < 1e-14);
        }
    }

    #[test]
    fn traced_track_has_real_nonnegative_consecutive_overlaps() {
        let grid = LoopGrid::brillouin_zone(201).unwrap();
        let bundle = solve_along_loop(&unbroken_model(), &grid, &tol()).unwrap();
        for track in bundle.tracks {
            let traced = trace_phases(track, &tol()).unwrap();
            for w in traced.pairs.windows(2) {
                let a = bilinear(&w[1].left, &w[0].right);
                let b = bilinear(&w[0].left, &w[1].right);
                assert!(a.im.abs() <= 1e-12 && a.re >= 0.0, "overlap a = {a}");
                assert!(b.im.abs() <= 1e-12 && b.re >= 0.0, "overlap b = {b}");
                let s = bilinear(&w[1].left, &w[1].right);
                assert!((s - c(1., 0.)).norm() <= 1e-10, "normalization s = {s}");
            }
        }
    }

    #[test]
    fn vanishing_overlap_detected() {
        // (1,1)/sqrt(2) and (1,-1)/sqrt(2) are each normalized under the
        // bilinear pairing but mutually orthogonal; the first component stays
        // usable everywhere so the failure is the overlap, not the component.
        let plus = DVector::from_vec(vec![c(1., 0.), c(1., 0.)]) / c(std::f64::consts::SQRT_2, 0.);
        let minus =
            DVector::from_vec(vec![c(1., 0.), c(-1., 0.)]) / c(std::f64::consts::SQRT_2, 0.);
        let mk = |v: &CVector| BiorthPair {
            band_index: 1,
            eigenvalue: c(0., 0.),
            left: v.clone(),
            right: v.clone(),
        };
        let track = BandTrack {
            band_index: 1,
            pairs: vec![mk(&plus), mk(&minus), mk(&plus)],
            traced: false,
            smoothed: false,
            winding: None,
        };
        match trace_phases(track, &tol()) {
            Err(GaugeError::VanishingOverlap { .. }) => {}
            other => panic!("expected VanishingOverlap, got {other:?}"),
        }
    }

    fn synthetic_track_from_args(args: &[f64]) -> BandTrack {
        let pairs = args
            .iter()
            .map(|&a| {
                let mut left = DVector::from_element(2, Complex64::default());
                left[0] = Complex64::from_polar(1.0, a);
                let mut right = DVector::from_element(2, Complex64::default());
                right[0] = Complex64::from_polar(1.0, -a);
                BiorthPair { band_index: 1, eigenvalue: c(0., 0.), left, right }
            })
            .collect();
        BandTrack { band_index: 1, pairs, traced: true, smoothed: false, winding: None }
    }

    #[test]
    fn winding_no_crossing() {
        let track = synthetic_track_from_args(&[0.0, 0.5, 1.0]);
        let w = phase_winding(&track, 1e-6).unwrap();
        assert_eq!(w.crossings, 0);
        assert!((w.delta_phi - 1.0).abs() < 1e-14);
        assert_eq!(w.component, 0);
    }

    #[test]
    fn winding_upward_crossing_counts_plus_one() {
        // stored args jump from +3.1 down to -3.1: true phase crossed +pi upward
        let track = synthetic_track_from_args(&[3.0, 3.1, -3.1, -3.0]);
        let w = phase_winding(&track, 1e-6).unwrap();
        assert_eq!(w.crossings, 1);
        let expect = -3.0 - 3.0 + 2.0 * PI;
        assert!((w.delta_phi - expect).abs() < 1e-12, "delta_phi = {}", w.delta_phi);
    }

    #[test]
    fn winding_downward_crossing_counts_minus_one() {
        let track = synthetic_track_from_args(&[-3.0, -3.1, 3.1, 3.0]);
        let w = phase_winding(&track, 1e-6).unwrap();
        assert_eq!(w.crossings, -1);
    }

    #[test]
    fn no_usable_component_reported() {
        // component 0 dies at one point, component 1 is zero everywhere
        let mut track = synthetic_track_from_args(&[0.0, 0.1, 0.2]);
        track.pairs[1].left[0] = c(0., 0.);
        match phase_winding(&track, 1e-6) {
            Err(GaugeError::NoUsableComponent) => {}
            other => panic!("expected NoUsableComponent, got {other:?}"),
        }
    }

    #[test]
    fn smoothing_function_boundary_conditions() {
        assert_eq!(smoothing_function(0.7, 0.0), 0.0);
        assert_eq!(smoothing_function(0.7, 1.0), 0.7);
        assert!((smoothing_function(PI, 0.5) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn smoothing_factors_linear_in_index() {
        // M = 3, delta_phi = pi/2: left factors (1, e^{-i pi/4}, e^{-i pi/2})
        let mut track = synthetic_track_from_args(&[0.0, PI / 4.0, PI / 2.0]);
        track.winding = Some(WindingData { delta_phi: PI / 2.0, crossings: 0, component: 0 });
        let before: Vec<Complex64> = track.pairs.iter().map(|p| p.left[0]).collect();
        let smoothed = apply_smoothing(track, &tol()).unwrap();
        for (j, p) in smoothed.pairs.iter().enumerate() {
            let factor = Complex64::from_polar(1.0, -(PI / 2.0) * j as f64 / 2.0);
            assert!((p.left[0] - before[j] * factor).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_winding_track_unchanged_by_smoothing() {
        let mut track = synthetic_track_from_args(&[0.3, 0.3, 0.3]);
        track.winding = Some(WindingData { delta_phi: 0.0, crossings: 0, component: 0 });
        let before: Vec<Complex64> = track.pairs.iter().map(|p| p.left[0]).collect();
        let smoothed = apply_smoothing(track, &tol()).unwrap();
        for (j, p) in smoothed.pairs.iter().enumerate() {
            assert!((p.left[0] - before[j]).norm() < 1e-15);
        }
    }

    #[test]
    fn full_pipeline_invariants_hold() {
        let grid = LoopGrid::brillouin_zone(201).unwrap();
        let bundle = smooth_gauge(&unbroken_model(), &grid, &tol()).unwrap();
        assert_eq!(bundle.tracks.len(), 2);
        for track in &bundle.tracks {
            assert!(track.smoothed);
            assert!(endpoint_mismatch(track) <= 1e-8);
            for p in &track.pairs {
                let s = bilinear(&p.left, &p.right);
                assert!((s - c(1., 0.)).norm() <= 1e-10);
            }
        }
        // cross-band biorthonormality at every point
        let (t1, t2) = (&bundle.tracks[0], &bundle.tracks[1]);
        for (p1, p2) in t1.pairs.iter().zip(t2.pairs.iter()) {
            assert!(bilinear(&p1.left, &p2.right).norm() <= 1e-10);
            assert!(bilinear(&p2.left, &p1.right).norm() <= 1e-10);
        }
    }

    #[test]
    fn hermitian_pipeline_keeps_left_conjugate_of_right() {
        let model = BlochModel::Ssh(SshParams::new(1.0, 0.5, 0.0, 0.0).unwrap());
        let grid = LoopGrid::brillouin_zone(101).unwrap();
        let bundle = smooth_gauge(&model, &grid, &tol()).unwrap();
        for track in &bundle.tracks {
            for p in &track.pairs {
                let diff: f64 = p
                    .left
                    .iter()
                    .zip(p.right.iter())
                    .map(|(a, b)| (a - b.conj()).norm())
                    .fold(0.0, f64::max);
                assert!(diff < 1e-9, "left != conj(right) by {diff}");
            }
        }
    }

    #[test]
    fn refinement_halves_the_smoothed_state_error() {
        // Doubling the resolution must shrink the per-point state change at
        // the shared grid points roughly linearly in the spacing.
        let model = unbroken_model();
        let tol = tol();
        let bundle_at = |m: usize| {
            smooth_gauge(&model, &LoopGrid::brillouin_zone(m).unwrap(), &tol).unwrap()
        };
        let coarse = bundle_at(101);
        let mid = bundle_at(201);
        let fine = bundle_at(401);
        // even indices of the finer grid coincide with the coarser one
        let sup_diff = |a: &SmoothedBundle, b: &SmoothedBundle| -> f64 {
            let mut worst = 0.0f64;
            for (ta, tb) in a.tracks.iter().zip(&b.tracks) {
                for (j, pa) in ta.pairs.iter().enumerate() {
                    let pb = &tb.pairs[2 * j];
                    worst = worst.max(max_abs_diff(&pa.left, &pb.left));
                }
            }
            worst
        };
        let d1 = sup_diff(&coarse, &mid);
        let d2 = sup_diff(&mid, &fine);
        assert!(d2 < 0.75 * d1, "expected ~linear decay, got {d1} -> {d2}");
    }

    #[test]
    fn random_per_point_phases_do_not_change_the_smoothed_bundle() {
        use rand::{Rng, SeedableRng};
        let grid = LoopGrid::brillouin_zone(101).unwrap();
        let model = unbroken_model();
        let reference = smooth_gauge(&model, &grid, &tol()).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let raw = solve_along_loop(&model, &grid, &tol()).unwrap();
        let tracks: Vec<BandTrack> = raw
            .tracks
            .into_iter()
            .map(|mut t| {
                for p in &mut t.pairs {
                    // independent unit phases on left and right, then re-normalize
                    let u = Complex64::from_polar(1.0, rng.gen_range(-PI..PI));
                    let v = Complex64::from_polar(1.0, rng.gen_range(-PI..PI));
                    p.left *= u;
                    p.right *= v;
                    let s = bilinear(&p.left, &p.right).sqrt();
                    p.left /= s;
                    p.right /= s;
                }
                let t = trace_phases(t, &tol()).unwrap();
                apply_smoothing(t, &tol()).unwrap()
            })
            .collect();

        for (a, b) in reference.tracks.iter().zip(&tracks) {
            for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
                assert!(max_abs_diff(&pa.left, &pb.left) < 1e-10);
                assert!(max_abs_diff(&pa.right, &pb.right) < 1e-10);
            }
        }
    }
}

