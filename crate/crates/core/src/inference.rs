//! Hyperparameter inference for the GP surrogates.
//!
//! Two fitting routes share the same kernel and likelihood code: a MAP point
//! estimate under weak priors (multi-start L-BFGS), and fully Bayesian NUTS
//! under the sparse axis-aligned subspace (SAAS) prior — a half-Cauchy global
//! shrinkage `tau` with half-Cauchy priors on each inverse lengthscale, which
//! concentrates the posterior on models that "turn off" most dimensions
//! unless the data insists otherwise.
//!
//! Sampling runs in an unconstrained parameterization (`log` for the positive
//! parameters, a scaled logit for the mean constant on [-1, 1]) with
//! change-of-variables corrections included; the MAP objective deliberately
//! omits the Jacobian so it maximizes the constrained-space posterior.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gp::{self, GpDataset, GpError, GpHyperParams};
use crate::math;
use crate::nuts::{self, LogDensity, NutsDiagnostics, NutsError, NutsSettings};
use crate::seedstream;

/// Affine transform fitted to raw targets: `standardized = (y - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

impl Standardization {
    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn invert_variance(&self, var: f64) -> f64 {
        var * self.std * self.std
    }
}

/// Shift targets to empirical mean zero and population standard deviation
/// one. Constant vectors map to all zeros with the std recorded as 1.
pub fn standardize(targets: &[f64]) -> (Vec<f64>, Standardization) {
    assert!(!targets.is_empty(), "standardize requires at least one value");
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    let mut std = math::sqrt(var);
    if !(std > 1e-10 * (math::abs(mean) + 1.0)) {
        std = 1.0;
    }
    let t = Standardization { mean, std };
    (targets.iter().map(|&y| t.apply(y)).collect(), t)
}

/// The SAAS prior: global half-Cauchy shrinkage on inverse lengthscales plus
/// Gamma priors on the variances and a uniform prior on the mean constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaasPriorSpec {
    /// Scale of the half-Cauchy prior on the global shrinkage `tau`.
    pub shrinkage_scale: f64,
    pub noise_shape: f64,
    pub noise_rate: f64,
    pub signal_shape: f64,
    pub signal_rate: f64,
    /// Interpret the Gamma second parameters as rates (default) or scales.
    pub gamma_as_rate: bool,
}

impl Default for SaasPriorSpec {
    fn default() -> Self {
        SaasPriorSpec {
            shrinkage_scale: 0.1,
            noise_shape: 0.9,
            noise_rate: 10.0,
            signal_shape: 2.0,
            signal_rate: 0.15,
            gamma_as_rate: true,
        }
    }
}

impl SaasPriorSpec {
    fn check(&self) -> Result<(), InferenceError> {
        let ok = self.shrinkage_scale > 0.0
            && self.noise_shape > 0.0
            && self.noise_rate > 0.0
            && self.signal_shape > 0.0
            && self.signal_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(InferenceError::InvalidPrior)
        }
    }

    fn noise_rate_eff(&self) -> f64 {
        if self.gamma_as_rate { self.noise_rate } else { 1.0 / self.noise_rate }
    }

    fn signal_rate_eff(&self) -> f64 {
        if self.gamma_as_rate { self.signal_rate } else { 1.0 / self.signal_rate }
    }
}

/// Half-Cauchy log density (support x >= 0).
pub fn half_cauchy_log_density(x: f64, scale: f64) -> f64 {
    math::ln(2.0) - math::ln(math::PI) - math::ln(scale) - math::ln(1.0 + (x / scale) * (x / scale))
}

fn gamma_log_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * math::ln(rate) - math::ln_gamma(shape) + (shape - 1.0) * math::ln(x) - rate * x
}

/// GP hyperparameters plus the SAAS global shrinkage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaasParams {
    pub hyper: GpHyperParams,
    pub shrinkage: f64,
}

impl SaasParams {
    /// Layout: `[mean_u, log s2, log noise, log tau, log(1/l_1..d)]`.
    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.hyper.dim() + 4);
        let m = self.hyper.mean_const;
        u.push(math::ln((1.0 + m) / (1.0 - m))); // inverse of 2*sigmoid - 1
        u.push(math::ln(self.hyper.signal_var));
        u.push(math::ln(self.hyper.noise_var));
        u.push(math::ln(self.shrinkage));
        for l in &self.hyper.lengthscales {
            u.push(-math::ln(*l));
        }
        u
    }

    pub fn from_unconstrained(u: &[f64]) -> Self {
        let d = u.len() - 4;
        let sig = 1.0 / (1.0 + math::exp(-u[0]));
        SaasParams {
            hyper: GpHyperParams {
                mean_const: 2.0 * sig - 1.0,
                signal_var: math::exp(u[1]),
                noise_var: math::exp(u[2]),
                lengthscales: u[4..].iter().map(|r| math::exp(-r)).collect(),
            },
            shrinkage: math::exp(u[3]),
        }
        .assert_dim(d)
    }

    fn assert_dim(self, d: usize) -> Self {
        debug_assert_eq!(self.hyper.dim(), d);
        self
    }
}

/// Prior-only log density in constrained space (no likelihood, no Jacobian).
pub fn saas_prior_log_density(params: &SaasParams, prior: &SaasPriorSpec) -> f64 {
    let mut lp = half_cauchy_log_density(params.shrinkage, prior.shrinkage_scale);
    for l in &params.hyper.lengthscales {
        lp += half_cauchy_log_density(1.0 / l, params.shrinkage);
    }
    lp += gamma_log_density(params.hyper.noise_var, prior.noise_shape, prior.noise_rate_eff());
    lp += gamma_log_density(params.hyper.signal_var, prior.signal_shape, prior.signal_rate_eff());
    lp += -math::ln(2.0); // uniform on [-1, 1]
    lp
}

/// Guard against `exp` overflow far outside the plausible region.
const UNCONSTRAINED_BOUND: f64 = 40.0;

/// The NUTS target: SAAS log posterior over the unconstrained vector,
/// including change-of-variables corrections.
pub struct SaasPosterior<'a> {
    data: &'a GpDataset,
    prior: &'a SaasPriorSpec,
}

impl<'a> SaasPosterior<'a> {
    pub fn new(data: &'a GpDataset, prior: &'a SaasPriorSpec) -> Self {
        SaasPosterior { data, prior }
    }
}

impl<'a> LogDensity for SaasPosterior<'a> {
    fn dim(&self) -> usize {
        self.data.dim() + 4
    }

    fn logp_grad(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        if u.iter().any(|v| math::abs(*v) > UNCONSTRAINED_BOUND) {
            return f64::NEG_INFINITY;
        }
        let d = self.data.dim();
        let params = SaasParams::from_unconstrained(u);
        let (lml, lml_grad) = match gp::log_marginal_likelihood_grad(&params.hyper, self.data) {
            Ok(v) => v,
            Err(_) => return f64::NEG_INFINITY,
        };

        let prior = self.prior;
        let m = params.hyper.mean_const;
        let s2 = params.hyper.signal_var;
        let noise = params.hyper.noise_var;
        let tau = params.shrinkage;
        let (a_s, b_s) = (prior.signal_shape, prior.signal_rate_eff());
        let (a_n, b_n) = (prior.noise_shape, prior.noise_rate_eff());
        let scale = prior.shrinkage_scale;

        let mut lp = lml;
        // mean: uniform prior plus logit Jacobian log((1 - m^2)/2)
        lp += -math::ln(2.0) + math::ln((1.0 - m * m) / 2.0);
        grad[0] = lml_grad.mean_const * (1.0 - m * m) / 2.0 - m;
        // variances: Gamma priors plus log-transform Jacobians
        lp += gamma_log_density(s2, a_s, b_s) + math::ln(s2);
        grad[1] = lml_grad.log_signal_var + a_s - b_s * s2;
        lp += gamma_log_density(noise, a_n, b_n) + math::ln(noise);
        grad[2] = lml_grad.log_noise_var + a_n - b_n * noise;
        // global shrinkage: half-Cauchy plus Jacobian
        lp += half_cauchy_log_density(tau, scale) + math::ln(tau);
        let tau2 = tau * tau;
        grad[3] = -2.0 * tau2 / (scale * scale + tau2) + 1.0;
        // inverse lengthscales: half-Cauchy(tau) plus Jacobians
        for k in 0..d {
            let inv_l = 1.0 / params.hyper.lengthscales[k];
            lp += half_cauchy_log_density(inv_l, tau) + math::ln(inv_l);
            let il2 = inv_l * inv_l;
            grad[3] += -1.0 + 2.0 * il2 / (tau2 + il2);
            grad[4 + k] = -lml_grad.log_lengthscales[k] - 2.0 * il2 / (tau2 + il2) + 1.0;
        }
        lp
    }
}

/// SAAS log posterior and its gradient in the unconstrained
/// parameterization, evaluated at a constrained-space point.
pub fn log_posterior_saas(
    params: &SaasParams,
    data: &GpDataset,
    prior: &SaasPriorSpec,
) -> Result<(f64, Vec<f64>), InferenceError> {
    prior.check()?;
    if data.dim() != params.hyper.dim() {
        return Err(InferenceError::Gp(GpError::DimensionMismatch));
    }
    let target = SaasPosterior::new(data, prior);
    let u = params.to_unconstrained();
    let mut grad = vec![0.0; u.len()];
    let lp = target.logp_grad(&u, &mut grad);
    Ok((lp, grad))
}

/// One posterior draw (or point estimate) of the hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperDraw {
    pub params: GpHyperParams,
    /// SAAS global shrinkage alongside the draw; absent for MAP fits.
    pub shrinkage: Option<f64>,
}

/// Posterior over one objective's GP: hyperparameter draws plus the target
/// standardization they were fitted under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePosterior {
    pub draws: Vec<HyperDraw>,
    pub standardization: Standardization,
    pub diagnostics: Option<NutsDiagnostics>,
}

impl ObjectivePosterior {
    pub fn median_lengthscales(&self) -> Vec<f64> {
        let d = self.draws[0].params.dim();
        (0..d)
            .map(|k| {
                let mut v: Vec<f64> =
                    self.draws.iter().map(|dr| dr.params.lengthscales[k]).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v[v.len() / 2]
            })
            .collect()
    }

    pub fn median_inverse_lengthscales(&self) -> Vec<f64> {
        self.median_lengthscales().iter().map(|l| 1.0 / l).collect()
    }
}

/// Posterior ensembles for all objectives of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEnsemble {
    pub objectives: Vec<ObjectivePosterior>,
}

/// Serializable summary of one objective's fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnosticsRecord {
    pub objective: usize,
    pub draws: usize,
    pub step_size: Option<f64>,
    pub mean_accept: Option<f64>,
    pub divergences: Option<usize>,
    pub divergence_rate: Option<f64>,
    /// Set when more than a quarter of post-warmup transitions diverged.
    pub divergence_warning: bool,
    pub median_lengthscales: Vec<f64>,
}

impl PosteriorEnsemble {
    pub fn diagnostics_records(&self, samples: usize) -> Vec<FitDiagnosticsRecord> {
        self.objectives
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let rate = o.diagnostics.as_ref().map(|d| d.divergence_rate(samples));
                FitDiagnosticsRecord {
                    objective: i,
                    draws: o.draws.len(),
                    step_size: o.diagnostics.as_ref().map(|d| d.step_size),
                    mean_accept: o.diagnostics.as_ref().map(|d| d.mean_accept),
                    divergences: o.diagnostics.as_ref().map(|d| d.divergences),
                    divergence_rate: rate,
                    divergence_warning: rate.map(|r| r > 0.25).unwrap_or(false),
                    median_lengthscales: o.median_lengthscales(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InferenceError {
    Gp(GpError),
    Nuts(NutsError),
    InvalidPrior,
    TooFewPoints { n: usize, required: usize },
    AllRestartsFailed { attempts: usize, detail: String },
}

impl core::fmt::Display for InferenceError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            InferenceError::Gp(e) => write!(f, "{e}"),
            InferenceError::Nuts(e) => write!(f, "{e}"),
            InferenceError::InvalidPrior => write!(f, "prior scales/shapes/rates must be positive"),
            InferenceError::TooFewPoints { n, required } => {
                write!(f, "fit requires at least {required} points, got {n}")
            }
            InferenceError::AllRestartsFailed { attempts, detail } => {
                write!(f, "all {attempts} optimizer restarts failed: {detail}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for InferenceError {}

impl From<GpError> for InferenceError {
    fn from(e: GpError) -> Self {
        InferenceError::Gp(e)
    }
}

impl From<NutsError> for InferenceError {
    fn from(e: NutsError) -> Self {
        InferenceError::Nuts(e)
    }
}

/// MAP objective (negated log posterior) over `[mean_u, log s2, log noise,
/// log(1/l_1..d)]`: marginal likelihood plus the weak priors — the same Gamma
/// priors on the variances and independent HC(1) on each inverse lengthscale,
/// with no global shrinkage and no Jacobian terms.
fn map_neg_log_posterior(
    u: &[f64],
    grad_out: &mut [f64],
    data: &GpDataset,
    prior: &SaasPriorSpec,
) -> f64 {
    grad_out.fill(0.0);
    if u.iter().any(|v| math::abs(*v) > UNCONSTRAINED_BOUND) {
        return f64::INFINITY;
    }
    let d = data.dim();
    let sig = 1.0 / (1.0 + math::exp(-u[0]));
    let m = 2.0 * sig - 1.0;
    let params = GpHyperParams {
        mean_const: m,
        signal_var: math::exp(u[1]),
        noise_var: math::exp(u[2]),
        lengthscales: u[3..].iter().map(|r| math::exp(-r)).collect(),
    };
    let (lml, lml_grad) = match gp::log_marginal_likelihood_grad(&params, data) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let (a_s, b_s) = (prior.signal_shape, prior.signal_rate_eff());
    let (a_n, b_n) = (prior.noise_shape, prior.noise_rate_eff());

    let mut lp = lml;
    lp += -math::ln(2.0);
    grad_out[0] = lml_grad.mean_const * (1.0 - m * m) / 2.0;
    lp += gamma_log_density(params.signal_var, a_s, b_s);
    grad_out[1] = lml_grad.log_signal_var + (a_s - 1.0) - b_s * params.signal_var;
    lp += gamma_log_density(params.noise_var, a_n, b_n);
    grad_out[2] = lml_grad.log_noise_var + (a_n - 1.0) - b_n * params.noise_var;
    for k in 0..d {
        let inv_l = 1.0 / params.lengthscales[k];
        lp += half_cauchy_log_density(inv_l, 1.0);
        let il2 = inv_l * inv_l;
        grad_out[3 + k] = -lml_grad.log_lengthscales[k] - 2.0 * il2 / (1.0 + il2);
    }
    for g in grad_out.iter_mut() {
        *g = -*g;
    }
    -lp
}

fn map_params_from_unconstrained(u: &[f64]) -> GpHyperParams {
    let sig = 1.0 / (1.0 + math::exp(-u[0]));
    GpHyperParams {
        mean_const: 2.0 * sig - 1.0,
        signal_var: math::exp(u[1]),
        noise_var: math::exp(u[2]),
        lengthscales: u[3..].iter().map(|r| math::exp(-r)).collect(),
    }
}

/// MAP point estimate on standardized targets: best of `restarts` L-BFGS
/// runs from scattered starting points. Deterministic given the seed.
pub fn fit_map(
    data: &GpDataset,
    restarts: usize,
    seed: u64,
) -> Result<(HyperDraw, f64), InferenceError> {
    if data.len() < 2 {
        return Err(InferenceError::TooFewPoints { n: data.len(), required: 2 });
    }
    let restarts = restarts.max(1);
    let prior = SaasPriorSpec::default();
    let d = data.dim();
    let mut rng = seedstream::rng(seed, "map-restarts", 0);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut failures = 0usize;
    let mut last_error = String::new();
    for restart in 0..restarts {
        let mut x0 = vec![0.0; d + 3];
        if restart == 0 {
            x0[1] = 0.0; // s2 = 1
            x0[2] = math::ln(0.05);
            // lengthscales start at 1
        } else {
            x0[0] = seedstream::standard_normal(&mut rng) * 0.5;
            x0[1] = math::ln(0.1) + rng.gen::<f64>() * (math::ln(4.0) - math::ln(0.1));
            x0[2] = math::ln(1e-4) + rng.gen::<f64>() * (math::ln(0.25) - math::ln(1e-4));
            for k in 0..d {
                // inverse lengthscales between 0.5 and 10
                x0[3 + k] = math::ln(0.5) + rng.gen::<f64>() * (math::ln(10.0) - math::ln(0.5));
            }
        }
        let result = lbfgs::minimize(
            |u, g| map_neg_log_posterior(u, g, data, &prior),
            &x0,
            &lbfgs::Options::default(),
        );
        match result {
            Ok(r) => {
                if best.as_ref().map(|(v, _)| r.value < *v).unwrap_or(true) {
                    best = Some((r.value, r.x));
                }
            }
            Err(e) => {
                failures += 1;
                last_error = format!("{e:?}");
            }
        }
    }
    match best {
        Some((value, x)) => Ok((
            HyperDraw { params: map_params_from_unconstrained(&x), shrinkage: None },
            -value,
        )),
        None => Err(InferenceError::AllRestartsFailed { attempts: failures, detail: last_error }),
    }
}

/// NUTS over the SAAS posterior on standardized targets. Collects
/// `settings.samples` draws after warmup and retains every
/// `settings.thinning`-th.
pub fn fit_nuts(
    data: &GpDataset,
    prior: &SaasPriorSpec,
    settings: &NutsSettings,
) -> Result<(Vec<HyperDraw>, NutsDiagnostics), InferenceError> {
    if data.len() < 2 {
        return Err(InferenceError::TooFewPoints { n: data.len(), required: 2 });
    }
    prior.check()?;
    let d = data.dim();
    let target = SaasPosterior::new(data, prior);
    // start with everything "turned off": large lengthscales, modest noise
    let init = SaasParams {
        hyper: GpHyperParams {
            mean_const: 0.0,
            signal_var: 1.0,
            noise_var: 0.05,
            lengthscales: vec![10.0; d],
        },
        shrinkage: prior.shrinkage_scale,
    };
    let run = nuts::sample(&target, &init.to_unconstrained(), settings)?;
    let draws = run
        .draws
        .iter()
        .skip(settings.thinning - 1)
        .step_by(settings.thinning)
        .map(|u| {
            let p = SaasParams::from_unconstrained(u);
            HyperDraw { params: p.hyper, shrinkage: Some(p.shrinkage) }
        })
        .collect();
    Ok((draws, run.diagnostics))
}

/// How hyperparameters are fitted for each objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum FitMethod {
    Map { restarts: usize },
    SaasNuts { prior: SaasPriorSpec, settings: NutsSettings },
}

impl FitMethod {
    pub fn default_map() -> Self {
        FitMethod::Map { restarts: 8 }
    }

    pub fn default_saas(seed: u64) -> Self {
        FitMethod::SaasNuts {
            prior: SaasPriorSpec::default(),
            settings: NutsSettings::standard(seed),
        }
    }
}

/// Standardize one objective's raw targets and fit with the chosen method.
/// The per-objective seed is derived from the method's base seed and the
/// objective index so independent objectives get independent streams.
pub fn fit_objective(
    inputs: &crate::linalg::Mat,
    raw_targets: &[f64],
    method: &FitMethod,
    objective_index: usize,
) -> Result<ObjectivePosterior, InferenceError> {
    let (std_targets, standardization) = standardize(raw_targets);
    let data = GpDataset::new(inputs.clone(), std_targets)?;
    match method {
        FitMethod::Map { restarts } => {
            let seed = seedstream::derive(0x4d41_50, "map-objective", objective_index as u64);
            let (draw, _) = fit_map(&data, *restarts, seed)?;
            Ok(ObjectivePosterior { draws: vec![draw], standardization, diagnostics: None })
        }
        FitMethod::SaasNuts { prior, settings } => {
            let mut s = settings.clone();
            s.seed = seedstream::derive(settings.seed, "nuts-objective", objective_index as u64);
            let (draws, diagnostics) = fit_nuts(&data, prior, &s)?;
            Ok(ObjectivePosterior { draws, standardization, diagnostics: Some(diagnostics) })
        }
    }
}

/// Fit every objective of a multi-output dataset; objectives are independent
/// GPs sharing the same inputs.
pub fn fit_ensemble(
    inputs: &crate::linalg::Mat,
    objectives: &[Vec<f64>],
    method: &FitMethod,
) -> Result<PosteriorEnsemble, InferenceError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let results: Result<Vec<_>, _> = objectives
            .par_iter()
            .enumerate()
            .map(|(k, ys)| fit_objective(inputs, ys, method, k))
            .collect();
        Ok(PosteriorEnsemble { objectives: results? })
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut fitted = Vec::with_capacity(objectives.len());
        for (k, ys) in objectives.iter().enumerate() {
            fitted.push(fit_objective(inputs, ys, method, k)?);
        }
        Ok(PosteriorEnsemble { objectives: fitted })
    }
}

/// Limited-memory BFGS with a strong-Wolfe line search.
mod lbfgs {
    use alloc::collections::VecDeque;
    use alloc::vec;
    use alloc::vec::Vec;

    use crate::linalg::dot;

    #[derive(Debug, Clone)]
    pub struct Options {
        pub memory: usize,
        pub max_iters: usize,
        pub grad_tol: f64,
    }

    impl Default for Options {
        fn default() -> Self {
            Options { memory: 8, max_iters: 200, grad_tol: 1e-5 }
        }
    }

    #[derive(Debug, Clone)]
    pub struct Minimum {
        pub x: Vec<f64>,
        pub value: f64,
        #[allow(dead_code)]
        pub grad_norm: f64,
        #[allow(dead_code)]
        pub iterations: usize,
        #[allow(dead_code)]
        pub converged: bool,
    }

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub enum LbfgsError {
        /// Objective not finite at the starting point.
        BadStart,
        /// No progress possible from the starting point.
        Stuck,
    }

    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;

    /// Strong-Wolfe line search (bracket and zoom). Returns the accepted
    /// step with its value and gradient, or None.
    #[allow(clippy::too_many_arguments)]
    fn wolfe_search<F: FnMut(&[f64], &mut [f64]) -> f64>(
        f: &mut F,
        x: &[f64],
        direction: &[f64],
        f0: f64,
        g0_dot_d: f64,
        init_step: f64,
    ) -> Option<(f64, f64, Vec<f64>, Vec<f64>)> {
        let n = x.len();
        let mut xt = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let eval = |f: &mut F, a: f64, xt: &mut Vec<f64>, grad: &mut Vec<f64>| -> (f64, f64) {
            for i in 0..n {
                xt[i] = x[i] + a * direction[i];
            }
            let v = f(xt, grad);
            (v, dot(grad, direction))
        };

        let mut a_prev = 0.0;
        let mut f_prev = f0;
        let mut a = init_step;
        let mut bracket: Option<(f64, f64, f64)> = None; // (lo, f_lo, hi)
        for iter in 0..20 {
            let (ft, gt) = eval(f, a, &mut xt, &mut grad);
            if !ft.is_finite() || ft > f0 + C1 * a * g0_dot_d || (iter > 0 && ft >= f_prev) {
                bracket = Some((a_prev, f_prev, a));
                break;
            }
            if gt.abs() <= -C2 * g0_dot_d {
                return Some((a, ft, xt, grad));
            }
            if gt >= 0.0 {
                bracket = Some((a, ft, a_prev));
                break;
            }
            a_prev = a;
            f_prev = ft;
            a *= 2.0;
        }
        let (mut lo, mut f_lo, mut hi) = bracket?;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let (fm, gm) = eval(f, mid, &mut xt, &mut grad);
            if !fm.is_finite() || fm > f0 + C1 * mid * g0_dot_d || fm >= f_lo {
                hi = mid;
            } else {
                if gm.abs() <= -C2 * g0_dot_d {
                    return Some((mid, fm, xt, grad));
                }
                if gm * (hi - lo) >= 0.0 {
                    hi = lo;
                }
                lo = mid;
                f_lo = fm;
            }
            if (hi - lo).abs() < 1e-16 * (1.0 + lo.abs()) {
                break;
            }
        }
        // fall back to the best sufficient-decrease point found
        if f_lo < f0 && lo > 0.0 {
            let (fl, _) = eval(f, lo, &mut xt, &mut grad);
            return Some((lo, fl, xt, grad));
        }
        None
    }

    pub fn minimize<F: FnMut(&[f64], &mut [f64]) -> f64>(
        mut f: F,
        x0: &[f64],
        opts: &Options,
    ) -> Result<Minimum, LbfgsError> {
        let n = x0.len();
        let mut x = x0.to_vec();
        let mut grad = vec![0.0; n];
        let mut value = f(&x, &mut grad);
        if !value.is_finite() {
            return Err(LbfgsError::BadStart);
        }
        let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, rho)
        let mut made_progress = false;

        for iteration in 0..opts.max_iters {
            let grad_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
            if grad_norm <= opts.grad_tol {
                return Ok(Minimum { x, value, grad_norm, iterations: iteration, converged: true });
            }
            // two-loop recursion
            let mut direction: Vec<f64> = grad.iter().map(|g| -g).collect();
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let alpha = rho * dot(s, &direction);
                for i in 0..n {
                    direction[i] -= alpha * y[i];
                }
                alphas.push(alpha);
            }
            if let Some((s, y, _)) = history.back() {
                let gamma = dot(s, y) / dot(y, y);
                for dv in direction.iter_mut() {
                    *dv *= gamma;
                }
            }
            for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
                let beta = rho * dot(y, &direction);
                for i in 0..n {
                    direction[i] += (alpha - beta) * s[i];
                }
            }
            let g_dot_d = dot(&grad, &direction);
            if g_dot_d >= 0.0 {
                // not a descent direction; reset to steepest descent
                history.clear();
                direction = grad.iter().map(|g| -g).collect();
            }
            let g_dot_d = dot(&grad, &direction);
            let init_step = if history.is_empty() {
                1.0 / grad_norm.max(1.0)
            } else {
                1.0
            };
            match wolfe_search(&mut f, &x, &direction, value, g_dot_d, init_step) {
                Some((_, new_value, new_x, new_grad)) => {
                    let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 * crate::math::sqrt(dot(&s, &s) * dot(&y, &y)) {
                        if history.len() == opts.memory {
                            history.pop_front();
                        }
                        history.push_back((s, y, 1.0 / sy));
                    }
                    let stalled = (value - new_value).abs()
                        <= 1e-13 * value.abs().max(new_value.abs()).max(1.0);
                    x = new_x;
                    grad = new_grad;
                    value = new_value;
                    made_progress = true;
                    if stalled {
                        let grad_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
                        return Ok(Minimum {
                            x,
                            value,
                            grad_norm,
                            iterations: iteration + 1,
                            converged: true,
                        });
                    }
                }
                None => {
                    if made_progress {
                        let grad_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
                        return Ok(Minimum {
                            x,
                            value,
                            grad_norm,
                            iterations: iteration,
                            converged: false,
                        });
                    }
                    return Err(LbfgsError::Stuck);
                }
            }
        }
        let grad_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        Ok(Minimum { x, value, grad_norm, iterations: opts.max_iters, converged: false })
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn minimizes_quadratic() {
            let r = minimize(
                |x, g| {
                    g[0] = 2.0 * (x[0] - 3.0);
                    g[1] = 8.0 * (x[1] + 1.0);
                    (x[0] - 3.0) * (x[0] - 3.0) + 4.0 * (x[1] + 1.0) * (x[1] + 1.0)
                },
                &[0.0, 0.0],
                &Options::default(),
            )
            .unwrap();
            assert!(r.converged);
            assert!((r.x[0] - 3.0).abs() < 1e-5);
            assert!((r.x[1] + 1.0).abs() < 1e-5);
        }

        #[test]
        fn minimizes_rosenbrock() {
            let r = minimize(
                |x, g| {
                    let (a, b) = (x[0], x[1]);
                    g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                    g[1] = 200.0 * (b - a * a);
                    (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
                },
                &[-1.2, 1.0],
                &Options { max_iters: 500, ..Options::default() },
            )
            .unwrap();
            assert!((r.x[0] - 1.0).abs() < 1e-4, "{:?}", r.x);
            assert!((r.x[1] - 1.0).abs() < 1e-4);
        }
    }
}
