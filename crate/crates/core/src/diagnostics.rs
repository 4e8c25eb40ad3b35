//! Model-quality diagnostics: leave-one-out cross-validation for comparing
//! the MAP and SAAS-NUTS fitting routes on the same data.
//!
//! Every fold refits from scratch on the remaining points (no rank-one
//! shortcuts), predicts the held-out point including observation noise, and
//! un-standardizes back to the raw target scale. Ensemble predictions are
//! moment-matched mixtures over the hyperparameter draws.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::gp::{FittedGp, GpDataset};
use crate::inference::{
    fit_map, fit_nuts, standardize, FitMethod, HyperDraw, InferenceError, Standardization,
};
use crate::linalg::Mat;
use crate::math;
use crate::seedstream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvPoint {
    pub index: usize,
    pub observed: f64,
    pub pred_mean: f64,
    /// Predictive variance of the observed value (latent + noise),
    /// un-standardized.
    pub pred_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvResult {
    pub per_point: Vec<LoocvPoint>,
    pub rmse: f64,
    /// Mean negative log predictive density under the moment-matched
    /// Gaussian.
    pub mean_nlpd: f64,
    /// Spearman rank correlation between predictions and observations.
    pub rank_correlation: f64,
    pub failed_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoocvError {
    TooFewPoints { n: usize, required: usize },
    AllFoldsFailed,
}

impl core::fmt::Display for LoocvError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LoocvError::TooFewPoints { n, required } => {
                write!(f, "leave-one-out requires at least {required} points, got {n}")
            }
            LoocvError::AllFoldsFailed => write!(f, "every leave-one-out fold failed to fit"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LoocvError {}

/// Mixture mean and variance over per-draw Gaussians (law of total
/// variance: mean of variances plus variance of means).
pub fn mixture_moments(means: &[f64], vars: &[f64]) -> (f64, f64) {
    let s = means.len() as f64;
    let mean = means.iter().sum::<f64>() / s;
    let mean_var = vars.iter().sum::<f64>() / s;
    let var_mean = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / s;
    (mean, mean_var + var_mean)
}

fn predict_heldout(
    draws: &[HyperDraw],
    std: Standardization,
    train: &GpDataset,
    x_held: &[f64],
) -> Result<(f64, f64), InferenceError> {
    let query = Mat::from_vec(1, x_held.len(), x_held.to_vec());
    let mut means = Vec::with_capacity(draws.len());
    let mut vars = Vec::with_capacity(draws.len());
    for draw in draws {
        let fitted = FittedGp::fit(draw.params.clone(), train)?;
        let pred = fitted.predict(&query);
        means.push(pred.mean[0]);
        vars.push(pred.cov[(0, 0)] + draw.params.noise_var);
    }
    let (m, v) = mixture_moments(&means, &vars);
    Ok((std.invert(m), std.invert_variance(v)))
}

fn run_fold(
    inputs: &Mat,
    raw_targets: &[f64],
    method: &FitMethod,
    seed: u64,
    i: usize,
) -> Result<LoocvPoint, InferenceError> {
    let n = raw_targets.len();
    let mut fold_targets = Vec::with_capacity(n - 1);
    for (j, y) in raw_targets.iter().enumerate() {
        if j != i {
            fold_targets.push(*y);
        }
    }
    let (std_targets, std) = standardize(&fold_targets);
    let train = GpDataset::new(inputs.without_row(i), std_targets)?;
    let fold_seed = seedstream::derive(seed, "loocv-fold", i as u64);
    let draws = match method {
        FitMethod::Map { restarts } => {
            let (draw, _) = fit_map(&train, *restarts, fold_seed)?;
            alloc::vec![draw]
        }
        FitMethod::SaasNuts { prior, settings } => {
            let mut s = settings.clone();
            s.seed = fold_seed;
            let (draws, _) = fit_nuts(&train, prior, &s)?;
            draws
        }
    };
    let (pred_mean, pred_var) = predict_heldout(&draws, std, &train, inputs.row(i))?;
    Ok(LoocvPoint { index: i, observed: raw_targets[i], pred_mean, pred_var: pred_var.max(0.0) })
}

/// Leave-one-out cross-validation of one objective under the given fitting
/// method. Folds are independent; failed folds are excluded from the metrics
/// and counted.
pub fn loocv(
    inputs: &Mat,
    raw_targets: &[f64],
    method: &FitMethod,
    seed: u64,
) -> Result<LoocvResult, LoocvError> {
    let n = raw_targets.len();
    if n < 3 {
        return Err(LoocvError::TooFewPoints { n, required: 3 });
    }

    #[cfg(feature = "parallel")]
    let fold_results: Vec<Result<LoocvPoint, InferenceError>> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| run_fold(inputs, raw_targets, method, seed, i))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let fold_results: Vec<Result<LoocvPoint, InferenceError>> =
        (0..n).map(|i| run_fold(inputs, raw_targets, method, seed, i)).collect();

    let mut per_point = Vec::with_capacity(n);
    let mut failed_folds = 0usize;
    for r in fold_results {
        match r {
            Ok(p) => per_point.push(p),
            Err(_) => failed_folds += 1,
        }
    }
    if per_point.is_empty() {
        return Err(LoocvError::AllFoldsFailed);
    }

    let m = per_point.len() as f64;
    let rmse = math::sqrt(
        per_point.iter().map(|p| (p.pred_mean - p.observed) * (p.pred_mean - p.observed)).sum::<f64>()
            / m,
    );
    let mean_nlpd = per_point
        .iter()
        .map(|p| {
            let var = p.pred_var.max(1e-300);
            0.5 * (math::ln(2.0 * math::PI * var) + (p.observed - p.pred_mean).powi(2) / var)
        })
        .sum::<f64>()
        / m;
    let preds: Vec<f64> = per_point.iter().map(|p| p.pred_mean).collect();
    let obs: Vec<f64> = per_point.iter().map(|p| p.observed).collect();
    let rank_correlation = spearman(&preds, &obs);

    Ok(LoocvResult { per_point, rmse, mean_nlpd, rank_correlation, failed_folds })
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut out = alloc::vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        let da = ra[i] - ma;
        let db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / math::sqrt(va * vb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]) + 1.0).abs() < 1e-12);
        // monotone transform invariance
        let a = [0.3_f64, -1.0, 2.0, 0.7];
        let b: Vec<f64> = a.iter().map(|x| f64::exp(*x)).collect();
        assert!((spearman(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_moments_law_of_total_variance() {
        let means = [1.0, 3.0, 2.0];
        let vars = [0.5, 0.25, 1.0];
        let (m, v) = mixture_moments(&means, &vars);
        assert!((m - 2.0).abs() < 1e-15);
        let mean_vars = (0.5 + 0.25 + 1.0) / 3.0;
        let var_means = ((1.0_f64 - 2.0).powi(2) + (3.0_f64 - 2.0).powi(2) + 0.0) / 3.0;
        assert!((v - (mean_vars + var_means)).abs() < 1e-15);
        assert!(v >= mean_vars);
    }

    #[test]
    fn loocv_on_linear_data_is_accurate() {
        let n = 10;
        let inputs = Mat::from_vec(n, 1, (0..n).map(|i| i as f64 / (n - 1) as f64).collect());
        let targets: Vec<f64> = (0..n).map(|i| 2.0 * (i as f64 / (n - 1) as f64) - 1.0).collect();
        let result = loocv(&inputs, &targets, &FitMethod::Map { restarts: 3 }, 7).unwrap();
        assert_eq!(result.per_point.len(), n);
        assert_eq!(result.failed_folds, 0);
        let target_sd = {
            let m = targets.iter().sum::<f64>() / n as f64;
            (targets.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / n as f64).sqrt()
        };
        assert!(result.rmse < 0.2 * target_sd, "rmse {} vs sd {}", result.rmse, target_sd);
        assert!(result.rank_correlation > 0.95);
    }

    #[test]
    fn loocv_on_pure_noise_matches_constant_baseline() {
        let n = 24;
        let mut rng = seedstream::rng(3, "loocv-noise", 0);
        let inputs = Mat::from_vec(n, 2, (0..2 * n).map(|_| rng.gen::<f64>()).collect());
        let targets: Vec<f64> = (0..n).map(|_| seedstream::standard_normal(&mut rng)).collect();
        let result = loocv(&inputs, &targets, &FitMethod::Map { restarts: 3 }, 11).unwrap();
        // constant-mean Gaussian baseline on the raw targets
        let mean = targets.iter().sum::<f64>() / n as f64;
        let var = targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
        let baseline =
            0.5 * ((2.0 * core::f64::consts::PI * var).ln() + 1.0);
        assert!(
            (result.mean_nlpd - baseline).abs() < 0.6,
            "nlpd {} vs baseline {}",
            result.mean_nlpd,
            baseline
        );
        assert!(result.rank_correlation.abs() < 0.5);
    }

    #[test]
    fn loocv_requires_three_points() {
        let inputs = Mat::from_vec(2, 1, alloc::vec![0.0, 1.0]);
        assert!(matches!(
            loocv(&inputs, &[0.0, 1.0], &FitMethod::Map { restarts: 1 }, 0),
            Err(LoocvError::TooFewPoints { .. })
        ));
    }
}
