//! The No-U-Turn sampler.
//!
//! A single-chain NUTS implementation over any differentiable log density:
//! leapfrog integration, trajectory doubling with multinomial sampling within
//! the tree, the classic position-difference U-turn criterion evaluated in
//! the diagonal metric, dual-averaging step-size adaptation toward a target
//! acceptance statistic, and Stan-style windowed adaptation of a diagonal
//! mass matrix during warmup. Deterministic for a fixed seed.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::seedstream;

/// Energy error beyond which a leapfrog step counts as divergent.
const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// A differentiable (unnormalized) log density.
pub trait LogDensity {
    fn dim(&self) -> usize;
    /// Value of the log density at `x`; gradient written into `grad`.
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutsSettings {
    pub warmup_steps: usize,
    pub samples: usize,
    pub thinning: usize,
    pub max_tree_depth: usize,
    pub target_accept: f64,
    pub seed: u64,
}

impl NutsSettings {
    /// 512 warmup steps, 256 collected samples thinned by 16.
    pub fn standard(seed: u64) -> Self {
        NutsSettings {
            warmup_steps: 512,
            samples: 256,
            thinning: 16,
            max_tree_depth: 10,
            target_accept: 0.8,
            seed,
        }
    }

    /// Reduced budget for CI-scale runs: 128 warmup, 64 samples thinned by 8.
    pub fn test_scale(seed: u64) -> Self {
        NutsSettings {
            warmup_steps: 128,
            samples: 64,
            thinning: 8,
            max_tree_depth: 8,
            target_accept: 0.8,
            seed,
        }
    }

    pub fn retained(&self) -> usize {
        self.samples / self.thinning
    }

    fn check(&self) -> Result<(), NutsError> {
        if self.warmup_steps == 0 {
            return Err(NutsError::InvalidSettings("warmup_steps must be >= 1"));
        }
        if self.samples == 0 || self.thinning == 0 || self.samples % self.thinning != 0 {
            return Err(NutsError::InvalidSettings(
                "samples must be a positive multiple of thinning",
            ));
        }
        if self.max_tree_depth == 0 || self.max_tree_depth > 16 {
            return Err(NutsError::InvalidSettings("max_tree_depth must be in 1..=16"));
        }
        if !(0.0 < self.target_accept && self.target_accept < 1.0) {
            return Err(NutsError::InvalidSettings("target_accept must be in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NutsError {
    InvalidSettings(&'static str),
    /// Log density not finite at the initial point.
    BadInitialPoint,
}

impl core::fmt::Display for NutsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NutsError::InvalidSettings(msg) => write!(f, "invalid NUTS settings: {msg}"),
            NutsError::BadInitialPoint => {
                write!(f, "log density is not finite at the initial point")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NutsError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NutsDiagnostics {
    pub step_size: f64,
    /// Mean acceptance statistic over post-warmup transitions.
    pub mean_accept: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub max_depth_hits: usize,
    pub total_leapfrogs: usize,
}

impl NutsDiagnostics {
    /// Divergent post-warmup transitions as a fraction of all of them.
    pub fn divergence_rate(&self, samples: usize) -> f64 {
        if samples == 0 {
            0.0
        } else {
            self.divergences as f64 / samples as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct NutsRun {
    /// All post-warmup draws, in order (thinning is the caller's business).
    pub draws: Vec<Vec<f64>>,
    pub diagnostics: NutsDiagnostics,
}

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

struct Tree {
    minus: State,
    plus: State,
    proposal: State,
    log_sum_w: f64,
    accept_sum: f64,
    n_leapfrog: usize,
    divergent: bool,
    turning: bool,
}

struct Chain<'a, T: LogDensity> {
    target: &'a T,
    inv_mass: Vec<f64>,
    step_size: f64,
    rng: ChaCha8Rng,
    n_leapfrog: usize,
}

impl<'a, T: LogDensity> Chain<'a, T> {
    fn energy(&self, s: &State) -> f64 {
        let mut kinetic = 0.0;
        for (p, im) in s.p.iter().zip(&self.inv_mass) {
            kinetic += p * p * im;
        }
        -s.logp + 0.5 * kinetic
    }

    fn eval(&mut self, q: Vec<f64>, p: Vec<f64>) -> State {
        let mut grad = vec![0.0; q.len()];
        let logp = self.target.logp_grad(&q, &mut grad);
        State { q, p, grad, logp }
    }

    fn leapfrog(&mut self, from: &State, eps: f64) -> State {
        self.n_leapfrog += 1;
        let half = 0.5 * eps;
        let mut p: Vec<f64> = from
            .p
            .iter()
            .zip(&from.grad)
            .map(|(p, g)| p + half * g)
            .collect();
        let q: Vec<f64> = from
            .q
            .iter()
            .zip(p.iter().zip(&self.inv_mass))
            .map(|(q, (p, im))| q + eps * im * p)
            .collect();
        let mut state = self.eval(q, p.clone());
        if state.logp.is_finite() && state.grad.iter().all(|g| g.is_finite()) {
            for (p, g) in p.iter_mut().zip(&state.grad) {
                *p += half * g;
            }
            state.p = p;
            state
        } else {
            // off the support: poison the state so it registers as divergent
            state.logp = f64::NEG_INFINITY;
            state
        }
    }

    fn draw_momentum(&mut self, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|i| seedstream::standard_normal(&mut self.rng) / math::sqrt(self.inv_mass[i]))
            .collect()
    }

    /// U-turn test between the two ends of a trajectory span.
    fn is_turning(&self, minus: &State, plus: &State) -> bool {
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for k in 0..minus.q.len() {
            let dq = plus.q[k] - minus.q[k];
            fwd += dq * self.inv_mass[k] * plus.p[k];
            bwd += dq * self.inv_mass[k] * minus.p[k];
        }
        fwd < 0.0 || bwd < 0.0
    }

    fn leaf(&mut self, from: &State, eps_signed: f64, h0: f64) -> Tree {
        let state = self.leapfrog(from, eps_signed);
        let h = self.energy(&state);
        let delta = h - h0;
        let divergent = !delta.is_finite() || delta > DIVERGENCE_THRESHOLD;
        let log_w = if divergent { f64::NEG_INFINITY } else { -delta };
        let accept = if delta.is_finite() {
            math::exp((-delta).min(0.0))
        } else {
            0.0
        };
        Tree {
            minus: state.clone(),
            plus: state.clone(),
            proposal: state,
            log_sum_w: log_w,
            accept_sum: accept,
            n_leapfrog: 1,
            divergent,
            turning: false,
        }
    }

    fn build_tree(&mut self, from: &State, eps_signed: f64, depth: usize, h0: f64) -> Tree {
        if depth == 0 {
            return self.leaf(from, eps_signed, h0);
        }
        let mut inner = self.build_tree(from, eps_signed, depth - 1, h0);
        if inner.divergent || inner.turning {
            return inner;
        }
        let outer_start = if eps_signed > 0.0 { inner.plus.clone() } else { inner.minus.clone() };
        let outer = self.build_tree(&outer_start, eps_signed, depth - 1, h0);

        inner.n_leapfrog += outer.n_leapfrog;
        inner.accept_sum += outer.accept_sum;
        if outer.divergent || outer.turning {
            inner.divergent = outer.divergent;
            inner.turning = outer.turning;
            return inner;
        }
        let total = math::log_add_exp(inner.log_sum_w, outer.log_sum_w);
        if math::ln(self.rng.gen::<f64>()) < outer.log_sum_w - total {
            inner.proposal = outer.proposal;
        }
        inner.log_sum_w = total;
        if eps_signed > 0.0 {
            inner.plus = outer.plus;
        } else {
            inner.minus = outer.minus;
        }
        inner.turning = self.is_turning(&inner.minus, &inner.plus);
        inner
    }

    /// One NUTS transition; returns (new state, mean accept stat, divergent,
    /// hit max depth).
    fn transition(&mut self, current: State, max_depth: usize) -> (State, f64, bool, bool) {
        let dim = current.q.len();
        let p = self.draw_momentum(dim);
        let start = State { p, ..current };
        let h0 = self.energy(&start);

        let mut traj_minus = start.clone();
        let mut traj_plus = start.clone();
        let mut sample = start.clone();
        let mut log_sum_w = 0.0; // the initial state carries weight exp(0)
        let mut accept_sum = 0.0;
        let mut n_leapfrog = 0usize;
        let mut divergent = false;
        let mut hit_max_depth = true;

        for depth in 0..max_depth {
            let forward = (self.rng.gen::<u32>() & 1) == 1;
            let eps_signed = if forward { self.step_size } else { -self.step_size };
            let from = if forward { traj_plus.clone() } else { traj_minus.clone() };
            let subtree = self.build_tree(&from, eps_signed, depth, h0);
            accept_sum += subtree.accept_sum;
            n_leapfrog += subtree.n_leapfrog;
            if subtree.divergent {
                divergent = true;
                hit_max_depth = false;
                break;
            }
            if subtree.turning {
                hit_max_depth = false;
                break;
            }
            // biased progressive sampling toward the new subtree
            if math::ln(self.rng.gen::<f64>()) < subtree.log_sum_w - log_sum_w {
                sample = subtree.proposal.clone();
            }
            log_sum_w = math::log_add_exp(log_sum_w, subtree.log_sum_w);
            if forward {
                traj_plus = subtree.plus;
            } else {
                traj_minus = subtree.minus;
            }
            if self.is_turning(&traj_minus, &traj_plus) {
                hit_max_depth = false;
                break;
            }
        }
        let accept = if n_leapfrog > 0 { accept_sum / n_leapfrog as f64 } else { 0.0 };
        (sample, accept, divergent, hit_max_depth)
    }

    /// Reasonable-step-size heuristic: double or halve until the one-step
    /// acceptance ratio crosses 1/2.
    fn find_initial_step(&mut self, state: &State) -> f64 {
        let dim = state.q.len();
        let mut eps = 1.0;
        let p = self.draw_momentum(dim);
        let start = State { p, ..state.clone() };
        let h0 = self.energy(&start);
        let ratio = |chain: &mut Self, eps: f64, start: &State| -> f64 {
            let next = chain.leapfrog(start, eps);
            let h = chain.energy(&next);
            math::exp(h0 - h)
        };
        let mut a = ratio(self, eps, &start);
        if !a.is_finite() {
            a = 0.0;
        }
        let dir: f64 = if a > 0.5 { 1.0 } else { -1.0 };
        for _ in 0..60 {
            let mut a = ratio(self, eps, &start);
            if !a.is_finite() {
                a = 0.0;
            }
            if (dir > 0.0 && a <= 0.5) || (dir < 0.0 && a >= 0.5) {
                break;
            }
            eps *= math::powf(2.0, dir);
            if !(1e-10..=1e10).contains(&eps) {
                break;
            }
        }
        eps
    }
}

/// Dual-averaging state for step-size adaptation.
struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    m: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, delta: f64) -> Self {
        DualAveraging {
            mu: math::ln(10.0 * eps0),
            h_bar: 0.0,
            log_eps: math::ln(eps0),
            log_eps_bar: 0.0,
            m: 0.0,
            delta,
        }
    }

    fn update(&mut self, accept: f64) -> f64 {
        self.m += 1.0;
        let frac = 1.0 / (self.m + Self::T0);
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.delta - accept);
        self.log_eps = self.mu - math::sqrt(self.m) / Self::GAMMA * self.h_bar;
        let eta = math::powf(self.m, -Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
        math::exp(self.log_eps)
    }

    fn adapted(&self) -> f64 {
        math::exp(self.log_eps_bar)
    }
}

/// Online mean/variance accumulator.
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Welford { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for k in 0..x.len() {
            let d = x[k] - self.mean[k];
            self.mean[k] += d / self.n as f64;
            self.m2[k] += d * (x[k] - self.mean[k]);
        }
    }

    /// Regularized sample variance, shrunk gently toward a small floor.
    fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|m2| {
                let var = if self.n > 1 { m2 / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Warmup schedule: a step-size-only opening buffer, expanding mass-matrix
/// windows, and a step-size-only closing buffer.
fn adaptation_windows(warmup: usize) -> (usize, usize, Vec<usize>) {
    let (init_buffer, term_buffer, first_window);
    if warmup >= 150 {
        init_buffer = 75;
        term_buffer = 50;
        first_window = 25;
    } else {
        init_buffer = (0.15 * warmup as f64) as usize;
        term_buffer = (0.10 * warmup as f64) as usize;
        first_window = warmup - init_buffer - term_buffer;
    }
    let slow_end = warmup - term_buffer;
    let mut boundaries = Vec::new();
    let mut start = init_buffer;
    let mut size = first_window.max(1);
    while start < slow_end {
        let mut end = start + size;
        // absorb a final window too small to double
        if end + 2 * size > slow_end {
            end = slow_end;
        }
        boundaries.push(end.min(slow_end));
        start = end;
        size *= 2;
    }
    (init_buffer, term_buffer, boundaries)
}

/// Run NUTS from `init`, returning all post-warmup draws.
pub fn sample<T: LogDensity>(
    target: &T,
    init: &[f64],
    settings: &NutsSettings,
) -> Result<NutsRun, NutsError> {
    settings.check()?;
    let dim = target.dim();
    assert_eq!(init.len(), dim, "initial point dimension mismatch");

    let mut chain = Chain {
        target,
        inv_mass: vec![1.0; dim],
        step_size: 1.0,
        rng: seedstream::rng(settings.seed, "nuts-chain", 0),
        n_leapfrog: 0,
    };
    let mut current = chain.eval(init.to_vec(), vec![0.0; dim]);
    if !current.logp.is_finite() || current.grad.iter().any(|g| !g.is_finite()) {
        return Err(NutsError::BadInitialPoint);
    }

    chain.step_size = chain.find_initial_step(&current);
    let mut averaging = DualAveraging::new(chain.step_size, settings.target_accept);
    let (init_buffer, _, window_ends) = adaptation_windows(settings.warmup_steps);
    let mut welford = Welford::new(dim);
    let mut next_window = 0usize;

    let mut diagnostics = NutsDiagnostics::default();

    for step in 0..settings.warmup_steps {
        let (state, accept, divergent, _) = chain.transition(current, settings.max_tree_depth);
        current = state;
        if divergent {
            diagnostics.warmup_divergences += 1;
        }
        chain.step_size = averaging.update(accept);

        if next_window < window_ends.len() && step >= init_buffer {
            welford.push(&current.q);
            if step + 1 == window_ends[next_window] {
                chain.inv_mass = welford.regularized_variance();
                welford = Welford::new(dim);
                next_window += 1;
                // metric changed: re-derive the step size and restart averaging
                chain.step_size = chain.find_initial_step(&current);
                averaging = DualAveraging::new(chain.step_size, settings.target_accept);
            }
        }
    }
    chain.step_size = averaging.adapted();

    let mut draws = Vec::with_capacity(settings.samples);
    let mut accept_total = 0.0;
    for _ in 0..settings.samples {
        let (state, accept, divergent, hit_max) =
            chain.transition(current, settings.max_tree_depth);
        current = state;
        accept_total += accept;
        if divergent {
            diagnostics.divergences += 1;
        }
        if hit_max {
            diagnostics.max_depth_hits += 1;
        }
        draws.push(current.q.clone());
    }

    diagnostics.step_size = chain.step_size;
    diagnostics.mean_accept = accept_total / settings.samples as f64;
    diagnostics.total_leapfrogs = chain.n_leapfrog;
    Ok(NutsRun { draws, diagnostics })
}
