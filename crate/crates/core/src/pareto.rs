//! Pareto dominance, non-dominated filtering, exact bi-objective
//! hypervolume, and box decompositions of the non-dominated region.
//!
//! Everything here uses the minimization convention: smaller is better in
//! every coordinate, and the reference point is an upper bound on the region
//! of interest. Exact hypervolume is implemented for two objectives (the
//! staircase sum); higher dimensions fall back to the Monte Carlo estimator
//! [`hypervolume_mc`].

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::seedstream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParetoError {
    DimensionMismatch,
    /// Exact hypervolume is only available for two objectives.
    UnsupportedDimension(usize),
    NonFinite,
}

impl core::fmt::Display for ParetoError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParetoError::DimensionMismatch => write!(f, "objective vectors differ in length"),
            ParetoError::UnsupportedDimension(m) => {
                write!(f, "exact hypervolume unsupported for {m} objectives (use hypervolume_mc)")
            }
            ParetoError::NonFinite => write!(f, "objective vector has non-finite entries"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParetoError {}

/// `a` dominates `b`: at least as good everywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    assert_eq!(a.len(), b.len(), "objective vectors differ in length");
    let mut strict = false;
    for (&x, &y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Maximal non-dominated subset, sorted by the first objective ascending,
/// duplicates collapsed. Works for any number of objectives.
pub fn pareto_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut keep: Vec<usize> = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if i != j && (dominates(q, p) || (q == p && j < i)) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    let mut front: Vec<Vec<f64>> = keep.into_iter().map(|i| points[i].clone()).collect();
    front.sort_by(|a, b| a.partial_cmp(b).unwrap());
    front
}

/// Fast two-objective front: sorted by the first objective ascending (second
/// strictly descending), duplicates collapsed.
pub fn pareto_front_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut sorted: Vec<[f64; 2]> = points.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut front: Vec<[f64; 2]> = Vec::new();
    let mut best_y = f64::INFINITY;
    for p in sorted {
        if p[1] < best_y {
            best_y = p[1];
            front.push(p);
        }
    }
    front
}

fn check_finite(points: &[Vec<f64>], reference: &[f64]) -> Result<(), ParetoError> {
    if reference.iter().any(|v| !v.is_finite()) {
        return Err(ParetoError::NonFinite);
    }
    for p in points {
        if p.len() != reference.len() {
            return Err(ParetoError::DimensionMismatch);
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ParetoError::NonFinite);
        }
    }
    Ok(())
}

/// Exact dominated hypervolume between `points` and the reference point.
/// Dominated and beyond-reference points contribute nothing; two objectives
/// only.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64, ParetoError> {
    check_finite(points, reference)?;
    if reference.len() != 2 {
        return Err(ParetoError::UnsupportedDimension(reference.len()));
    }
    let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    Ok(hypervolume_2d(&pts, [reference[0], reference[1]]))
}

/// Two-objective staircase hypervolume of an arbitrary point set.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let below: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .collect();
    let front = pareto_front_2d(&below);
    let mut hv = 0.0;
    let mut prev_y = reference[1];
    for p in &front {
        hv += (reference[0] - p[0]) * (prev_y - p[1]);
        prev_y = p[1];
    }
    hv
}

/// Monte Carlo hypervolume estimate for any number of objectives: uniform
/// sampling over the box spanned by the front's coordinate-wise minimum and
/// the reference point.
pub fn hypervolume_mc(
    points: &[Vec<f64>],
    reference: &[f64],
    samples: usize,
    seed: u64,
) -> Result<f64, ParetoError> {
    check_finite(points, reference)?;
    let m = reference.len();
    let below: Vec<&Vec<f64>> = points
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(a, r)| a < r))
        .collect();
    if below.is_empty() {
        return Ok(0.0);
    }
    let mut lo = vec![f64::INFINITY; m];
    for p in &below {
        for (l, &v) in lo.iter_mut().zip(p.iter()) {
            if v < *l {
                *l = v;
            }
        }
    }
    let mut volume = 1.0;
    for k in 0..m {
        volume *= reference[k] - lo[k];
    }
    let mut rng = seedstream::rng(seed, "hv-mc", 0);
    let mut hit = 0usize;
    let mut z = vec![0.0; m];
    for _ in 0..samples {
        for k in 0..m {
            z[k] = lo[k] + (reference[k] - lo[k]) * rng.gen::<f64>();
        }
        if below.iter().any(|p| p.iter().zip(&z).all(|(a, b)| a <= b)) {
            hit += 1;
        }
    }
    Ok(volume * hit as f64 / samples as f64)
}

/// Hypervolume of each prefix of an observation sequence; non-decreasing.
pub fn hv_trace(points: &[Vec<f64>], reference: &[f64]) -> Result<Vec<f64>, ParetoError> {
    check_finite(points, reference)?;
    if reference.len() != 2 {
        return Err(ParetoError::UnsupportedDimension(reference.len()));
    }
    let reference = [reference[0], reference[1]];
    let mut trace = Vec::with_capacity(points.len());
    let mut seen: Vec<[f64; 2]> = Vec::with_capacity(points.len());
    for p in points {
        seen.push([p[0], p[1]]);
        trace.push(hypervolume_2d(&seen, reference));
    }
    Ok(trace)
}

/// One axis-aligned box of a decomposition, `[lower, upper)` per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2 {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Box2 {
    pub fn volume(&self) -> f64 {
        (self.upper[0] - self.lower[0]).max(0.0) * (self.upper[1] - self.lower[1]).max(0.0)
    }
}

/// Reference point, current non-dominated front, and the vertical-slab box
/// decomposition of the region not dominated by any front member.
///
/// The decomposition turns hypervolume improvement into a single pass over
/// `front.len() + 1` slabs, which is what makes the acquisition function's
/// inner loop cheap: [`ParetoState::hvi`] for one candidate and
/// [`ParetoState::hvi_joint`] for a batch.
#[derive(Debug, Clone)]
pub struct ParetoState {
    reference: [f64; 2],
    front: Vec<[f64; 2]>,
    /// Slab t spans `[x_lo[t], x_lo[t+1])` horizontally (last one ends at the
    /// reference), with free vertical room below `y_hi[t]`.
    x_lo: Vec<f64>,
    y_hi: Vec<f64>,
}

impl ParetoState {
    /// Build the state from an arbitrary point set (filtered to its front).
    pub fn new(points: &[[f64; 2]], reference: [f64; 2]) -> Self {
        let below: Vec<[f64; 2]> = points
            .iter()
            .copied()
            .filter(|p| p[0] < reference[0] && p[1] < reference[1])
            .collect();
        let front = pareto_front_2d(&below);
        let mut x_lo = Vec::with_capacity(front.len() + 1);
        let mut y_hi = Vec::with_capacity(front.len() + 1);
        x_lo.push(f64::NEG_INFINITY);
        y_hi.push(reference[1]);
        for p in &front {
            x_lo.push(p[0]);
            y_hi.push(p[1]);
        }
        ParetoState { reference, front, x_lo, y_hi }
    }

    pub fn reference(&self) -> [f64; 2] {
        self.reference
    }

    pub fn front(&self) -> &[[f64; 2]] {
        &self.front
    }

    /// Hypervolume dominated by the front w.r.t. the reference point.
    pub fn hypervolume(&self) -> f64 {
        let mut hv = 0.0;
        let mut prev_y = self.reference[1];
        for p in &self.front {
            hv += (self.reference[0] - p[0]) * (prev_y - p[1]);
            prev_y = p[1];
        }
        hv
    }

    /// The boxes of the decomposition, clipped below at `lower`. Their union
    /// is exactly the non-dominated region between `lower` and the reference
    /// point; there are `front.len() + 1` of them.
    pub fn boxes(&self, lower: [f64; 2]) -> Vec<Box2> {
        let n = self.x_lo.len();
        let mut out = Vec::with_capacity(n);
        for t in 0..n {
            let x_hi = if t + 1 < n { self.x_lo[t + 1] } else { self.reference[0] };
            out.push(Box2 {
                lower: [self.x_lo[t].max(lower[0]), lower[1]],
                upper: [x_hi, self.y_hi[t]],
            });
        }
        out
    }

    /// Exact hypervolume improvement of adding one candidate outcome:
    /// `HV(front ∪ {q}) − HV(front)`, computed as the candidate's clipped
    /// overlap with each slab.
    pub fn hvi(&self, q: [f64; 2]) -> f64 {
        if q[0] >= self.reference[0] || q[1] >= self.reference[1] {
            return 0.0;
        }
        let n = self.x_lo.len();
        let mut total = 0.0;
        for t in 0..n {
            let x_hi = if t + 1 < n { self.x_lo[t + 1] } else { self.reference[0] };
            if x_hi <= q[0] {
                continue;
            }
            let height = self.y_hi[t] - q[1];
            if height <= 0.0 {
                // slabs only get shallower to the right; nothing further
                break;
            }
            let width = x_hi - self.x_lo[t].max(q[0]);
            if width > 0.0 {
                total += width * height;
            }
        }
        total
    }

    /// Joint hypervolume improvement of a set of candidate outcomes,
    /// `HV(front ∪ Q) − HV(front)`.
    pub fn hvi_joint(&self, qs: &[[f64; 2]]) -> f64 {
        match qs.len() {
            0 => 0.0,
            1 => self.hvi(qs[0]),
            _ => {
                let mut all: Vec<[f64; 2]> = self.front.clone();
                all.extend_from_slice(qs);
                hypervolume_2d(&all, self.reference) - self.hypervolume()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn dominates_examples() {
        assert!(dominates(&[0.5, 0.5], &[0.6, 0.7]));
        assert!(!dominates(&[0.5, 0.7], &[0.6, 0.5]));
        assert!(!dominates(&[0.6, 0.5], &[0.5, 0.7]));
        assert!(!dominates(&[0.5, 0.5], &[0.5, 0.5]));
    }

    #[test]
    fn front_examples() {
        let pts = vec![
            vec![1.0, 3.0],
            vec![2.0, 2.0],
            vec![3.0, 1.0],
            vec![2.5, 2.5],
        ];
        let front = pareto_front(&pts);
        assert_eq!(front, vec![vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0]]);
        assert_eq!(pareto_front(&[vec![4.0, 2.0]]), vec![vec![4.0, 2.0]]);
        // duplicates collapse to a single representative
        let front = pareto_front(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(front.len(), 1);
    }

    /// O(n^2) reference filter, kept deliberately naive.
    fn brute_force_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for p in points {
            let dominated = points.iter().any(|q| dominates(q, p));
            if !dominated && !out.contains(p) {
                out.push(p.clone());
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    #[test]
    fn front_matches_brute_force_on_random_sets() {
        let mut rng = crate::seedstream::rng(11, "pareto-test", 0);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> =
                (0..200).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            assert_eq!(pareto_front(&pts), brute_force_front(&pts));
            let fast: Vec<Vec<f64>> = pareto_front_2d(
                &pts.iter().map(|p| [p[0], p[1]]).collect::<Vec<_>>(),
            )
            .iter()
            .map(|p| p.to_vec())
            .collect();
            assert_eq!(fast, brute_force_front(&pts));
        }
    }

    #[test]
    fn hypervolume_examples() {
        let hv = hypervolume(&[vec![0.75, 0.9]], &[1.0, 1.0]).unwrap();
        assert!((hv - 0.025).abs() < 1e-15);
        let hv = hypervolume(&[vec![0.5, 0.8], vec![0.8, 0.5]], &[1.0, 1.0]).unwrap();
        assert!((hv - 0.16).abs() < 1e-15);
        assert_eq!(hypervolume(&[], &[1.0, 1.0]).unwrap(), 0.0);
        // boundary and beyond-reference points contribute nothing
        let hv = hypervolume(&[vec![1.0, 0.2], vec![0.3, 1.4]], &[1.0, 1.0]).unwrap();
        assert_eq!(hv, 0.0);
        assert!(matches!(
            hypervolume(&[vec![0.1, 0.2, 0.3]], &[1.0, 1.0, 1.0]),
            Err(ParetoError::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn hypervolume_scale_equivariance() {
        let pts = vec![vec![0.2, 0.7], vec![0.5, 0.4], vec![0.9, 0.1]];
        let base = hypervolume(&pts, &[1.0, 1.0]).unwrap();
        let c = 3.5;
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| vec![c * p[0], c * p[1]]).collect();
        let hv = hypervolume(&scaled, &[c, c]).unwrap();
        assert!((hv - c * c * base).abs() < 1e-12);
    }

    #[test]
    fn mc_estimator_close_to_exact() {
        let pts = vec![vec![0.2, 0.7], vec![0.5, 0.4], vec![0.9, 0.1]];
        let exact = hypervolume(&pts, &[1.0, 1.0]).unwrap();
        let mc = hypervolume_mc(&pts, &[1.0, 1.0], 200_000, 3).unwrap();
        assert!((mc - exact).abs() < 0.01, "mc={mc} exact={exact}");
        // 3-D sanity: single point, analytic volume
        let mc = hypervolume_mc(&[vec![0.5, 0.5, 0.5]], &[1.0, 1.0, 1.0], 10_000, 4).unwrap();
        assert!((mc - 0.125).abs() < 1e-12);
    }

    #[test]
    fn empty_front_decomposition_is_one_box() {
        let state = ParetoState::new(&[], [1.0, 1.0]);
        let boxes = state.boxes([0.0, 0.0]);
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0], Box2 { lower: [0.0, 0.0], upper: [1.0, 1.0] });
        assert!((state.hvi([0.25, 0.25]) - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn single_point_decomposition() {
        let state = ParetoState::new(&[[0.5, 0.5]], [1.0, 1.0]);
        let boxes = state.boxes([0.0, 0.0]);
        assert_eq!(boxes.len(), 2);
        let hvi = state.hvi([0.4, 0.4]);
        let with = hypervolume_2d(&[[0.4, 0.4], [0.5, 0.5]], [1.0, 1.0]);
        let without = hypervolume_2d(&[[0.5, 0.5]], [1.0, 1.0]);
        assert!((hvi - (with - without)).abs() < 1e-15);
        assert!((hvi - 0.11).abs() < 1e-15);
    }

    #[test]
    fn hvi_matches_hv_difference_on_random_instances() {
        let mut rng = crate::seedstream::rng(5, "pareto-test", 1);
        for _ in 0..1000 {
            let n = rng.gen_range(0..12);
            let pts: Vec<[f64; 2]> =
                (0..n).map(|_| [rng.gen::<f64>() * 1.4, rng.gen::<f64>() * 1.4]).collect();
            let q = [rng.gen::<f64>() * 1.4, rng.gen::<f64>() * 1.4];
            let state = ParetoState::new(&pts, [1.0, 1.0]);
            let mut with = pts.clone();
            with.push(q);
            let diff = hypervolume_2d(&with, [1.0, 1.0]) - hypervolume_2d(&pts, [1.0, 1.0]);
            assert!(
                (state.hvi(q) - diff).abs() < 1e-12,
                "hvi={} diff={}",
                state.hvi(q),
                diff
            );
        }
    }

    #[test]
    fn joint_hvi_matches_hv_difference() {
        let mut rng = crate::seedstream::rng(5, "pareto-test", 2);
        for _ in 0..200 {
            let pts: Vec<[f64; 2]> =
                (0..6).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            let qs: Vec<[f64; 2]> =
                (0..3).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            let state = ParetoState::new(&pts, [1.0, 1.0]);
            let mut all = pts.clone();
            all.extend_from_slice(&qs);
            let diff = hypervolume_2d(&all, [1.0, 1.0]) - hypervolume_2d(&pts, [1.0, 1.0]);
            assert!((state.hvi_joint(&qs) - diff).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_is_monotone_and_stabilizes() {
        let pts = vec![
            vec![0.9, 0.9],
            vec![0.5, 0.6],
            vec![0.6, 0.5],
            vec![0.55, 0.65], // dominated: no change from here on
            vec![0.7, 0.7],
        ];
        let trace = hv_trace(&pts, &[1.0, 1.0]).unwrap();
        assert_eq!(trace.len(), 5);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(trace[2], trace[4]);
        // nothing below the reference point: flat zero
        let trace = hv_trace(&[vec![1.2, 0.4], vec![1.0, 1.0]], &[1.0, 1.0]).unwrap();
        assert_eq!(trace, vec![0.0, 0.0]);
    }

    #[test]
    fn hv_monotone_under_added_points() {
        let mut rng = crate::seedstream::rng(9, "pareto-test", 3);
        let mut pts: Vec<Vec<f64>> = Vec::new();
        let mut last = 0.0;
        for _ in 0..100 {
            pts.push(vec![rng.gen::<f64>() * 1.2, rng.gen::<f64>() * 1.2]);
            let hv = hypervolume(&pts, &[1.0, 1.0]).unwrap();
            assert!(hv >= last);
            last = hv;
        }
        // hypervolume of the filtered front equals hypervolume of the set
        let front = pareto_front(&pts);
        let hv_front = hypervolume(&front, &[1.0, 1.0]).unwrap();
        assert!((hv_front - last).abs() < 1e-12);
    }
}
