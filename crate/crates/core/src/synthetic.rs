//! Synthetic bi-objective benchmark problems over the built-in 24-parameter
//! space, used to exercise the optimizer end to end where the real training
//! pipeline would otherwise sit.
//!
//! Every problem is a pure function of `(name, seed, configuration)`;
//! optional observation noise is derived from a fingerprint of the
//! configuration so repeated evaluations of the same point agree. Each
//! problem reports a dense approximation of its true Pareto front for regret
//! and coverage reporting.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::seedstream;
use crate::space::{self, Configuration, ParamValue, SearchSpace, UnitPoint};

pub const PROBLEM_NAMES: [&str; 3] = ["sparse-quadratic", "staircase-tradeoff", "dtlz2-embedded"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownProblem(pub String);

impl core::fmt::Display for UnknownProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "unknown synthetic problem `{}` (known: {:?})", self.0, PROBLEM_NAMES)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UnknownProblem {}

#[derive(Debug, Clone)]
enum Kind {
    /// Each objective is a weighted quadratic over the same four active
    /// dimensions with conflicting optima.
    SparseQuadratic {
        active: Vec<usize>,
        centers: [Vec<f64>; 2],
        weights: [Vec<f64>; 2],
        scales: [f64; 2],
    },
    /// A piecewise-constant tradeoff producing a non-convex front.
    StaircaseTradeoff {
        t_dim: usize,
        penalty_dims: Vec<usize>,
        steps: usize,
    },
    /// The classic two-objective spherical landscape on one position
    /// dimension plus a few distance dimensions.
    Dtlz2Embedded {
        position_dim: usize,
        g_dims: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    name: String,
    seed: u64,
    noise_sd: f64,
    space: SearchSpace,
    kind: Kind,
}

fn distinct_dims<R: Rng>(rng: &mut R, count: usize, dim: usize) -> Vec<usize> {
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let k = rng.gen_range(0..dim);
        if !picked.contains(&k) {
            picked.push(k);
        }
    }
    picked
}

impl SyntheticProblem {
    pub fn new(name: &str, seed: u64) -> Result<Self, UnknownProblem> {
        Self::with_noise(name, seed, 0.0)
    }

    pub fn with_noise(name: &str, seed: u64, noise_sd: f64) -> Result<Self, UnknownProblem> {
        let space = space::lightconv24();
        let d = space.dim();
        let mut rng = seedstream::rng(seed, "synthetic-problem", 0);
        let kind = match name {
            "sparse-quadratic" => {
                let active = distinct_dims(&mut rng, 4, d);
                let mut centers = [vec![0.0; 4], vec![0.0; 4]];
                let mut weights = [vec![0.0; 4], vec![0.0; 4]];
                for k in 0..4 {
                    centers[0][k] = 0.15 + 0.30 * rng.gen::<f64>();
                    centers[1][k] = 0.55 + 0.30 * rng.gen::<f64>();
                    weights[0][k] = 0.5 + rng.gen::<f64>();
                    weights[1][k] = 0.5 + rng.gen::<f64>();
                }
                // scale so a uniform random point averages 1.7 per objective
                let mut scales = [0.0; 2];
                for j in 0..2 {
                    let mut expectation = 0.0;
                    for k in 0..4 {
                        let c = centers[j][k];
                        expectation += weights[j][k] * (1.0 / 12.0 + (0.5 - c) * (0.5 - c));
                    }
                    scales[j] = 1.7 / expectation;
                }
                Kind::SparseQuadratic { active, centers, weights, scales }
            }
            "staircase-tradeoff" => {
                let dims = distinct_dims(&mut rng, 4, d);
                Kind::StaircaseTradeoff {
                    t_dim: dims[0],
                    penalty_dims: dims[1..].to_vec(),
                    steps: 5,
                }
            }
            "dtlz2-embedded" => {
                let dims = distinct_dims(&mut rng, 6, d);
                Kind::Dtlz2Embedded { position_dim: dims[0], g_dims: dims[1..].to_vec() }
            }
            other => return Err(UnknownProblem(other.into())),
        };
        Ok(SyntheticProblem { name: name.into(), seed, noise_sd, space, kind })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    /// Noise-free objective values at a unit-cube point.
    pub fn evaluate_unit(&self, point: &UnitPoint) -> [f64; 2] {
        let u = point.coords();
        match &self.kind {
            Kind::SparseQuadratic { active, centers, weights, scales } => {
                let mut f = [0.0; 2];
                for j in 0..2 {
                    let mut v = 0.0;
                    for (k, &dim) in active.iter().enumerate() {
                        let c = u[dim] - centers[j][k];
                        v += weights[j][k] * c * c;
                    }
                    f[j] = scales[j] * v;
                }
                f
            }
            Kind::StaircaseTradeoff { t_dim, penalty_dims, steps } => {
                let t = u[*t_dim];
                let mut pen = 0.0;
                for &k in penalty_dims {
                    let c = u[k] - 0.5;
                    pen += 2.0 * c * c;
                }
                let s = *steps as f64;
                let stair = crate::math::ceil((1.0 - t) * s) / s;
                [0.1 + 0.85 * t + pen, 0.1 + 0.85 * stair + pen]
            }
            Kind::Dtlz2Embedded { position_dim, g_dims } => {
                let theta = u[*position_dim] * crate::math::PI / 2.0;
                let mut g = 0.0;
                for &k in g_dims {
                    let c = u[k] - 0.5;
                    g += c * c;
                }
                [(1.0 + g) * crate::math::cos(theta), (1.0 + g) * crate::math::sin(theta)]
            }
        }
    }

    /// Objective values for a configuration, with observation noise when the
    /// problem was built with `noise_sd > 0`. Pure in
    /// `(name, seed, configuration)`.
    pub fn evaluate(&self, config: &Configuration) -> Result<[f64; 2], space::SpaceError> {
        let point = self.space.encode(config)?;
        let mut f = self.evaluate_unit(&point);
        if self.noise_sd > 0.0 {
            let mut rng =
                seedstream::rng(self.seed, "synthetic-noise", config_fingerprint(config));
            f[0] += self.noise_sd * seedstream::standard_normal(&mut rng);
            f[1] += self.noise_sd * seedstream::standard_normal(&mut rng);
        }
        Ok(f)
    }

    /// The unit-cube minimizer of one objective (continuous relaxation).
    pub fn objective_optimum(&self, objective: usize) -> UnitPoint {
        let d = self.space.dim();
        let mut u = vec![0.5; d];
        match &self.kind {
            Kind::SparseQuadratic { active, centers, .. } => {
                for (k, &dim) in active.iter().enumerate() {
                    u[dim] = centers[objective][k];
                }
            }
            Kind::StaircaseTradeoff { t_dim, penalty_dims, .. } => {
                u[*t_dim] = if objective == 0 { 0.0 } else { 1.0 };
                for &k in penalty_dims {
                    u[k] = 0.5;
                }
            }
            Kind::Dtlz2Embedded { position_dim, g_dims } => {
                u[*position_dim] = if objective == 0 { 1.0 } else { 0.0 };
                for &k in g_dims {
                    u[k] = 0.5;
                }
            }
        }
        UnitPoint(u)
    }

    /// Dense approximation of the true (noise-free) Pareto front.
    pub fn true_front(&self, resolution: usize) -> Vec<[f64; 2]> {
        let resolution = resolution.max(2);
        let mut pts: Vec<[f64; 2]> = Vec::with_capacity(resolution);
        match &self.kind {
            Kind::SparseQuadratic { active, centers, weights, scales } => {
                // scalarization sweep; diagonal quadratics have a closed-form
                // weighted-average minimizer per dimension
                for i in 0..resolution {
                    let lam = i as f64 / (resolution - 1) as f64;
                    let mut u = vec![0.5; self.space.dim()];
                    for (k, &dim) in active.iter().enumerate() {
                        let a = lam * scales[0] * weights[0][k];
                        let b = (1.0 - lam) * scales[1] * weights[1][k];
                        u[dim] = (a * centers[0][k] + b * centers[1][k]) / (a + b);
                    }
                    pts.push(self.evaluate_unit(&UnitPoint(u)));
                }
            }
            Kind::StaircaseTradeoff { t_dim, .. } => {
                for i in 0..resolution {
                    let mut u = vec![0.5; self.space.dim()];
                    u[*t_dim] = i as f64 / (resolution - 1) as f64;
                    pts.push(self.evaluate_unit(&UnitPoint(u)));
                }
            }
            Kind::Dtlz2Embedded { position_dim, .. } => {
                for i in 0..resolution {
                    let mut u = vec![0.5; self.space.dim()];
                    u[*position_dim] = i as f64 / (resolution - 1) as f64;
                    pts.push(self.evaluate_unit(&UnitPoint(u)));
                }
            }
        }
        crate::pareto::pareto_front_2d(&pts)
    }
}

/// Stable 64-bit fingerprint of a configuration's values.
pub fn config_fingerprint(config: &Configuration) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for (name, value) in &config.values {
        for &b in name.as_bytes() {
            h = (h ^ b as u64).wrapping_mul(0x1000_0000_01b3);
        }
        let v = match value {
            ParamValue::Int(i) => *i as u64,
            ParamValue::Bool(b) => 0x8000_0000_0000_0000 | *b as u64,
        };
        h = (h ^ v).wrapping_mul(0x1000_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_and_unknown_names() {
        for name in PROBLEM_NAMES {
            SyntheticProblem::new(name, 3).unwrap();
        }
        assert!(SyntheticProblem::new("bogus", 3).is_err());
    }

    #[test]
    fn sparse_quadratic_optimum_is_zero() {
        let p = SyntheticProblem::new("sparse-quadratic", 17).unwrap();
        let f = p.evaluate_unit(&p.objective_optimum(0));
        assert!(f[0].abs() < 1e-12);
        assert!(f[1] > 0.0, "conflicting objectives");
        let f = p.evaluate_unit(&p.objective_optimum(1));
        assert!(f[1].abs() < 1e-12);
        assert!(f[0] > 0.0);
    }

    #[test]
    fn evaluation_is_pure_in_seed_and_config() {
        let config = crate::space::lightconv24_default();
        let a = SyntheticProblem::with_noise("sparse-quadratic", 5, 0.1).unwrap();
        let b = SyntheticProblem::with_noise("sparse-quadratic", 5, 0.1).unwrap();
        assert_eq!(a.evaluate(&config).unwrap(), b.evaluate(&config).unwrap());
        let c = SyntheticProblem::with_noise("sparse-quadratic", 6, 0.1).unwrap();
        assert_ne!(a.evaluate(&config).unwrap(), c.evaluate(&config).unwrap());
        // noise perturbs the clean value
        let clean = SyntheticProblem::new("sparse-quadratic", 5).unwrap();
        assert_ne!(a.evaluate(&config).unwrap(), clean.evaluate(&config).unwrap());
    }

    #[test]
    fn dtlz2_front_lies_on_unit_circle() {
        let p = SyntheticProblem::new("dtlz2-embedded", 9).unwrap();
        let front = p.true_front(100);
        assert!(front.len() >= 90);
        for f in &front {
            let r2 = f[0] * f[0] + f[1] * f[1];
            assert!((r2 - 1.0).abs() < 1e-12, "front point off the circle: {f:?}");
        }
        // no random point may dominate a front point
        let mut rng = seedstream::rng(4, "dtlz2-check", 0);
        for _ in 0..2000 {
            let u: Vec<f64> = (0..24).map(|_| rng.gen::<f64>()).collect();
            let f = p.evaluate_unit(&UnitPoint(u));
            for fp in &front {
                assert!(!crate::pareto::dominates(&f, &fp.to_vec()));
            }
        }
    }

    #[test]
    fn staircase_front_is_nonconvex() {
        let p = SyntheticProblem::new("staircase-tradeoff", 2).unwrap();
        let front = p.true_front(400);
        assert!(front.len() >= 4);
        // witness: some front point lies strictly above the chord joining its
        // neighbors, which a convex front forbids
        let mut witness = false;
        for w in front.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let t = (b[0] - a[0]) / (c[0] - a[0]);
            let chord = a[1] + t * (c[1] - a[1]);
            if b[1] > chord + 1e-9 {
                witness = true;
            }
        }
        assert!(witness, "expected a non-convex front");
    }

    #[test]
    fn evaluates_grid_configurations() {
        let p = SyntheticProblem::new("sparse-quadratic", 11).unwrap();
        let configs = crate::sobol::sobol_init(p.space(), 16, 3).unwrap();
        for c in configs {
            let f = p.evaluate(&c).unwrap();
            assert!(f[0].is_finite() && f[1].is_finite());
            assert!(f[0] >= 0.0 && f[1] >= 0.0);
        }
    }
}
