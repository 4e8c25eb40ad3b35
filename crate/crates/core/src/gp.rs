//! Gaussian-process regression with a constant mean and ARD Matérn-5/2
//! kernel: marginal likelihood, its analytic gradient, and the posterior
//! predictive distribution.
//!
//! The gradient is reported in log-space for the positive hyperparameters
//! (signal variance, noise variance, lengthscales), which is the
//! parameterization both the MAP optimizer and the NUTS sampler work in.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{CholeskyFactor, Mat};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperParams {
    pub mean_const: f64,
    pub signal_var: f64,
    pub noise_var: f64,
    pub lengthscales: Vec<f64>,
}

impl GpHyperParams {
    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn check(&self) -> Result<(), GpError> {
        if !(self.signal_var > 0.0) || !self.signal_var.is_finite() {
            return Err(GpError::InvalidHyperParams("signal_var must be positive"));
        }
        if !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return Err(GpError::InvalidHyperParams("noise_var must be positive"));
        }
        if self.lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(GpError::InvalidHyperParams("lengthscales must be positive"));
        }
        if !self.mean_const.is_finite() {
            return Err(GpError::InvalidHyperParams("mean_const must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpDataset {
    inputs: Mat,
    targets: Vec<f64>,
}

impl GpDataset {
    /// Inputs must lie in the unit cube; one target per row.
    pub fn new(inputs: Mat, targets: Vec<f64>) -> Result<Self, GpError> {
        if inputs.rows() != targets.len() {
            return Err(GpError::DimensionMismatch);
        }
        for i in 0..inputs.rows() {
            for &v in inputs.row(i) {
                if !(0.0..=1.0).contains(&v) {
                    return Err(GpError::InputOutsideUnitCube);
                }
            }
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(GpError::NonFiniteTarget);
        }
        Ok(GpDataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn inputs(&self) -> &Mat {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// The dataset with observation `i` removed (leave-one-out folds).
    pub fn without_point(&self, i: usize) -> GpDataset {
        let mut targets = self.targets.clone();
        targets.remove(i);
        GpDataset { inputs: self.inputs.without_row(i), targets }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    pub mean: Vec<f64>,
    /// Latent-function covariance, observation noise excluded.
    pub cov: Mat,
}

impl PredictiveDistribution {
    pub fn variances(&self) -> Vec<f64> {
        (0..self.mean.len()).map(|i| self.cov[(i, i)]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GpError {
    DimensionMismatch,
    InvalidHyperParams(&'static str),
    InputOutsideUnitCube,
    NonFiniteTarget,
    EmptyDataset,
    NotPositiveDefinite,
}

impl core::fmt::Display for GpError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GpError::DimensionMismatch => write!(f, "input dimensions do not match"),
            GpError::InvalidHyperParams(msg) => write!(f, "invalid hyperparameters: {msg}"),
            GpError::InputOutsideUnitCube => write!(f, "inputs must lie in [0, 1]^d"),
            GpError::NonFiniteTarget => write!(f, "targets must be finite"),
            GpError::EmptyDataset => write!(f, "operation requires a non-empty dataset"),
            GpError::NotPositiveDefinite => {
                write!(f, "kernel matrix not positive definite after jitter escalation")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GpError {}

impl From<crate::linalg::NotPositiveDefinite> for GpError {
    fn from(_: crate::linalg::NotPositiveDefinite) -> Self {
        GpError::NotPositiveDefinite
    }
}

/// Matérn-5/2 correlation at scaled distance `r`.
#[inline(always)]
fn matern52(r: f64) -> f64 {
    (1.0 + math::SQRT_5 * r + (5.0 / 3.0) * r * r) * math::exp(-math::SQRT_5 * r)
}

#[inline(always)]
fn scaled_sq_dist(a: &[f64], b: &[f64], inv_l2: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        let d = a[k] - b[k];
        s += d * d * inv_l2[k];
    }
    s
}

fn inv_lengthscales_sq(params: &GpHyperParams) -> Vec<f64> {
    params.lengthscales.iter().map(|l| 1.0 / (l * l)).collect()
}

/// Cross-covariance matrix between the rows of `x` and `x2`.
pub fn kernel_matrix(params: &GpHyperParams, x: &Mat, x2: &Mat) -> Result<Mat, GpError> {
    params.check()?;
    if x.cols() != params.dim() || x2.cols() != params.dim() {
        return Err(GpError::DimensionMismatch);
    }
    let inv_l2 = inv_lengthscales_sq(params);
    let s2 = params.signal_var;
    let mut k = Mat::zeros(x.rows(), x2.rows());
    for i in 0..x.rows() {
        let xi = x.row(i);
        let row = k.row_mut(i);
        for j in 0..x2.rows() {
            let r = math::sqrt(scaled_sq_dist(xi, x2.row(j), &inv_l2));
            row[j] = s2 * matern52(r);
        }
    }
    Ok(k)
}

/// Symmetric train covariance `s^2 C + noise I`, with the scaled pairwise
/// distances of the upper triangle returned for gradient reuse.
fn train_covariance(params: &GpHyperParams, x: &Mat) -> (Mat, Vec<f64>) {
    let n = x.rows();
    let inv_l2 = inv_lengthscales_sq(params);
    let s2 = params.signal_var;
    let mut k = Mat::zeros(n, n);
    let mut dists = Vec::with_capacity(n.saturating_sub(1) * n / 2);
    for i in 0..n {
        k[(i, i)] = s2 + params.noise_var;
        for j in (i + 1)..n {
            let r = math::sqrt(scaled_sq_dist(x.row(i), x.row(j), &inv_l2));
            let v = s2 * matern52(r);
            k[(i, j)] = v;
            k[(j, i)] = v;
            dists.push(r);
        }
    }
    (k, dists)
}

/// Log marginal likelihood of the data under the GP.
pub fn log_marginal_likelihood(params: &GpHyperParams, data: &GpDataset) -> Result<f64, GpError> {
    params.check()?;
    if data.is_empty() {
        return Err(GpError::EmptyDataset);
    }
    if data.dim() != params.dim() {
        return Err(GpError::DimensionMismatch);
    }
    let n = data.len();
    let (k, _) = train_covariance(params, data.inputs());
    let chol = CholeskyFactor::new_with_jitter(&k)?;
    let resid: Vec<f64> = data.targets().iter().map(|y| y - params.mean_const).collect();
    let alpha = chol.solve(&resid);
    Ok(-0.5 * crate::linalg::dot(&resid, &alpha)
        - 0.5 * chol.log_det()
        - 0.5 * n as f64 * math::LN_2PI)
}

/// Gradient of the log marginal likelihood over
/// `(mean_const, log signal_var, log noise_var, log lengthscales)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpGradient {
    pub mean_const: f64,
    pub log_signal_var: f64,
    pub log_noise_var: f64,
    pub log_lengthscales: Vec<f64>,
}

/// Log marginal likelihood together with its analytic gradient.
pub fn log_marginal_likelihood_grad(
    params: &GpHyperParams,
    data: &GpDataset,
) -> Result<(f64, GpGradient), GpError> {
    params.check()?;
    if data.is_empty() {
        return Err(GpError::EmptyDataset);
    }
    if data.dim() != params.dim() {
        return Err(GpError::DimensionMismatch);
    }
    let n = data.len();
    let d = params.dim();
    let x = data.inputs();
    let (k, dists) = train_covariance(params, x);
    let chol = CholeskyFactor::new_with_jitter(&k)?;
    let resid: Vec<f64> = data.targets().iter().map(|y| y - params.mean_const).collect();
    let alpha = chol.solve(&resid);
    let value = -0.5 * crate::linalg::dot(&resid, &alpha)
        - 0.5 * chol.log_det()
        - 0.5 * n as f64 * math::LN_2PI;

    let k_inv = chol.inverse();
    let s2 = params.signal_var;
    let noise = params.noise_var;
    let inv_l2 = inv_lengthscales_sq(params);

    // G = (alpha alpha^T - K^{-1}) / 2; assemble tr(G dK/dtheta) termwise
    let mut trace_g = 0.0;
    let mut sum_g_k = 0.0; // sum_ij G_ij K_ij
    let mut grad_len = vec![0.0; d];
    let mut pair = 0usize;
    for i in 0..n {
        let gii = 0.5 * (alpha[i] * alpha[i] - k_inv[(i, i)]);
        trace_g += gii;
        sum_g_k += gii * k[(i, i)];
        let xi = x.row(i);
        for j in (i + 1)..n {
            let g = 0.5 * (alpha[i] * alpha[j] - k_inv[(i, j)]);
            let kij = k[(i, j)];
            sum_g_k += 2.0 * g * kij;
            let r = dists[pair];
            pair += 1;
            // dk(r)/dlog l_q = s^2 (5/3)(1 + sqrt5 r) e^{-sqrt5 r} D_q / l_q^2
            let w = 2.0 * g * s2 * (5.0 / 3.0) * (1.0 + math::SQRT_5 * r)
                * math::exp(-math::SQRT_5 * r);
            if w != 0.0 {
                let xj = x.row(j);
                for q in 0..d {
                    let diff = xi[q] - xj[q];
                    grad_len[q] += w * diff * diff;
                }
            }
        }
    }
    for q in 0..d {
        grad_len[q] *= inv_l2[q];
    }

    let grad = GpGradient {
        mean_const: alpha.iter().sum(),
        // K = s^2 C + noise I: dK/dlog s^2 = K - noise I, dK/dlog noise = noise I
        log_signal_var: sum_g_k - noise * trace_g,
        log_noise_var: noise * trace_g,
        log_lengthscales: grad_len,
    };
    Ok((value, grad))
}

/// Standard GP conditional at the query rows: latent mean and covariance
/// (observation noise excluded). An empty dataset yields the prior.
pub fn posterior(
    params: &GpHyperParams,
    data: &GpDataset,
    query: &Mat,
) -> Result<PredictiveDistribution, GpError> {
    let fitted = FittedGp::fit(params.clone(), data)?;
    Ok(fitted.predict(query))
}

/// A factorized GP ready for repeated posterior queries.
#[derive(Debug, Clone)]
pub struct FittedGp {
    params: GpHyperParams,
    inputs: Mat,
    chol: Option<CholeskyFactor>,
    alpha: Vec<f64>,
}

impl FittedGp {
    pub fn fit(params: GpHyperParams, data: &GpDataset) -> Result<Self, GpError> {
        params.check()?;
        if data.is_empty() {
            return Ok(FittedGp {
                inputs: Mat::zeros(0, params.dim()),
                params,
                chol: None,
                alpha: Vec::new(),
            });
        }
        if data.dim() != params.dim() {
            return Err(GpError::DimensionMismatch);
        }
        let (k, _) = train_covariance(&params, data.inputs());
        let chol = CholeskyFactor::new_with_jitter(&k)?;
        let resid: Vec<f64> = data.targets().iter().map(|y| y - params.mean_const).collect();
        let alpha = chol.solve(&resid);
        Ok(FittedGp { inputs: data.inputs().clone(), params, chol: Some(chol), alpha })
    }

    pub fn params(&self) -> &GpHyperParams {
        &self.params
    }

    pub fn train_inputs(&self) -> &Mat {
        &self.inputs
    }

    /// Factor of the train covariance; `None` for an empty dataset.
    pub fn chol(&self) -> Option<&CholeskyFactor> {
        self.chol.as_ref()
    }

    /// `K^{-1} (y - mean)`, empty for an empty dataset.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn predict(&self, query: &Mat) -> PredictiveDistribution {
        assert_eq!(query.cols(), self.params.dim(), "query dimension mismatch");
        let m = query.rows();
        let k_qq = kernel_matrix(&self.params, query, query).expect("params already validated");
        match &self.chol {
            None => PredictiveDistribution {
                mean: vec![self.params.mean_const; m],
                cov: k_qq,
            },
            Some(chol) => {
                let k_qn = kernel_matrix(&self.params, query, &self.inputs)
                    .expect("params already validated");
                let mut mean = k_qn.matvec(&self.alpha);
                for v in &mut mean {
                    *v += self.params.mean_const;
                }
                // cov = K_qq - V V^T with rows of V = L^{-1} k_n(q_i)
                let n = self.inputs.rows();
                let mut v = Mat::zeros(m, n);
                for i in 0..m {
                    let col = chol.solve_lower(k_qn.row(i));
                    v.row_mut(i).copy_from_slice(&col);
                }
                let mut cov = k_qq;
                for i in 0..m {
                    for j in 0..=i {
                        let red = crate::linalg::dot(v.row(i), v.row(j));
                        cov[(i, j)] -= red;
                        cov[(j, i)] = cov[(i, j)];
                    }
                    if cov[(i, i)] < 0.0 {
                        cov[(i, i)] = 0.0;
                    }
                }
                PredictiveDistribution { mean, cov }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn params(d: usize) -> GpHyperParams {
        GpHyperParams {
            mean_const: 0.3,
            signal_var: 1.4,
            noise_var: 0.05,
            lengthscales: vec![0.7; d],
        }
    }

    fn random_dataset(n: usize, d: usize, seed: u64) -> GpDataset {
        let mut rng = crate::seedstream::rng(seed, "gp-test", 0);
        let x = Mat::from_vec(n, d, (0..n * d).map(|_| rng.gen::<f64>()).collect());
        let y = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        GpDataset::new(x, y).unwrap()
    }

    #[test]
    fn kernel_closed_forms() {
        let p = GpHyperParams {
            mean_const: 0.0,
            signal_var: 2.5,
            noise_var: 0.1,
            lengthscales: vec![1.0],
        };
        let x = Mat::from_rows(&[vec![0.5]]);
        let k = kernel_matrix(&p, &x, &x).unwrap();
        assert!((k[(0, 0)] - 2.5).abs() < 1e-15, "k(0) = signal variance");

        // unit lengthscale, unit signal, |x - x'| = 1
        let p = GpHyperParams {
            mean_const: 0.0,
            signal_var: 1.0,
            noise_var: 0.1,
            lengthscales: vec![1.0],
        };
        let a = Mat::from_rows(&[vec![0.0]]);
        let b = Mat::from_rows(&[vec![1.0]]);
        let k = kernel_matrix(&p, &a, &b).unwrap();
        let direct = (1.0 + 5.0_f64.sqrt() + 5.0 / 3.0) * (-(5.0_f64.sqrt())).exp();
        assert!((k[(0, 0)] - direct).abs() < 1e-15);
        assert!((k[(0, 0)] - 0.52399).abs() < 1e-5);

        // decay limit: tiny lengthscale makes unit distance effectively huge
        let p = GpHyperParams {
            mean_const: 0.0,
            signal_var: 1.0,
            noise_var: 0.1,
            lengthscales: vec![1e-3],
        };
        let k = kernel_matrix(&p, &a, &b).unwrap();
        assert!(k[(0, 0)].abs() < 1e-300);
    }

    #[test]
    fn single_point_closed_form() {
        let d = 3;
        let mut p = params(d);
        let x = Mat::from_rows(&[vec![0.2, 0.4, 0.9]]);
        // zero residual
        let data = GpDataset::new(x.clone(), vec![p.mean_const]).unwrap();
        let lml = log_marginal_likelihood(&p, &data).unwrap();
        let var = p.signal_var + p.noise_var;
        assert!((lml + 0.5 * (2.0 * core::f64::consts::PI * var).ln()).abs() < 1e-12);
        // unit total variance, unit residual
        p.signal_var = 0.6;
        p.noise_var = 0.4;
        let data = GpDataset::new(x, vec![p.mean_const + 1.0]).unwrap();
        let lml = log_marginal_likelihood(&p, &data).unwrap();
        assert!((lml + 0.5 * (2.0 * core::f64::consts::PI).ln() + 0.5).abs() < 1e-12);
    }

    /// Naive Gauss-Jordan inverse, independent of the Cholesky path.
    fn dense_inverse(a: &Mat) -> Mat {
        let n = a.rows();
        let mut aug = Mat::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = a[(i, j)];
            }
            aug[(i, n + i)] = 1.0;
        }
        for col in 0..n {
            let mut pivot = col;
            for r in (col + 1)..n {
                if aug[(r, col)].abs() > aug[(pivot, col)].abs() {
                    pivot = r;
                }
            }
            if pivot != col {
                for j in 0..2 * n {
                    let tmp = aug[(col, j)];
                    aug[(col, j)] = aug[(pivot, j)];
                    aug[(pivot, j)] = tmp;
                }
            }
            let p = aug[(col, col)];
            for j in 0..2 * n {
                aug[(col, j)] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[(r, col)];
                    for j in 0..2 * n {
                        aug[(r, j)] -= f * aug[(col, j)];
                    }
                }
            }
        }
        let mut inv = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = aug[(i, n + j)];
            }
        }
        inv
    }

    fn dense_log_det(a: &Mat) -> f64 {
        // LU without pivoting is fine for SPD matrices
        let n = a.rows();
        let mut lu = a.clone();
        let mut logdet = 0.0;
        for col in 0..n {
            logdet += lu[(col, col)].ln();
            for r in (col + 1)..n {
                let f = lu[(r, col)] / lu[(col, col)];
                for j in col..n {
                    lu[(r, j)] -= f * lu[(col, j)];
                }
            }
        }
        logdet
    }

    #[test]
    fn lml_matches_dense_oracle() {
        let d = 5;
        let p = params(d);
        let data = random_dataset(20, d, 42);
        let lml = log_marginal_likelihood(&p, &data).unwrap();

        let (k, _) = train_covariance(&p, data.inputs());
        let k_inv = dense_inverse(&k);
        let resid: Vec<f64> = data.targets().iter().map(|y| y - p.mean_const).collect();
        let quad = crate::linalg::dot(&resid, &k_inv.matvec(&resid));
        let oracle =
            -0.5 * quad - 0.5 * dense_log_det(&k) - 0.5 * 20.0 * (2.0 * core::f64::consts::PI).ln();
        assert!((lml - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    }

    fn fd_check(p: &GpHyperParams, data: &GpDataset) {
        let (_, grad) = log_marginal_likelihood_grad(p, data).unwrap();
        let h = 1e-5;
        let tol = |g: f64| 1e-5 * g.abs().max(1.0);

        let eval = |p: &GpHyperParams| log_marginal_likelihood(p, data).unwrap();
        let mut pm = p.clone();
        pm.mean_const = p.mean_const + h;
        let up = eval(&pm);
        pm.mean_const = p.mean_const - h;
        let dn = eval(&pm);
        let fd = (up - dn) / (2.0 * h);
        assert!(
            (fd - grad.mean_const).abs() <= tol(grad.mean_const),
            "mean: {fd} vs {}",
            grad.mean_const
        );

        let mut pm = p.clone();
        pm.signal_var = p.signal_var * h.exp();
        let up = eval(&pm);
        pm.signal_var = p.signal_var * (-h).exp();
        let dn = eval(&pm);
        let fd = (up - dn) / (2.0 * h);
        assert!((fd - grad.log_signal_var).abs() <= tol(grad.log_signal_var));

        let mut pm = p.clone();
        pm.noise_var = p.noise_var * h.exp();
        let up = eval(&pm);
        pm.noise_var = p.noise_var * (-h).exp();
        let dn = eval(&pm);
        let fd = (up - dn) / (2.0 * h);
        assert!((fd - grad.log_noise_var).abs() <= tol(grad.log_noise_var));

        for k in 0..p.dim() {
            let mut pm = p.clone();
            pm.lengthscales[k] = p.lengthscales[k] * h.exp();
            let up = eval(&pm);
            pm.lengthscales[k] = p.lengthscales[k] * (-h).exp();
            let dn = eval(&pm);
            let fd = (up - dn) / (2.0 * h);
            assert!(
                (fd - grad.log_lengthscales[k]).abs() <= tol(grad.log_lengthscales[k]),
                "lengthscale {k}: fd={fd} analytic={}",
                grad.log_lengthscales[k]
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::seedstream::rng(7, "gp-test", 1);
        for trial in 0..10 {
            let d = [1, 5, 24][trial % 3];
            let n = [2, 20][trial % 2];
            let p = GpHyperParams {
                mean_const: rng.gen::<f64>() - 0.5,
                signal_var: 0.5 + rng.gen::<f64>(),
                noise_var: 0.01 + 0.1 * rng.gen::<f64>(),
                lengthscales: (0..d).map(|_| 0.2 + 1.8 * rng.gen::<f64>()).collect(),
            };
            fd_check(&p, &random_dataset(n, d, 100 + trial as u64));
        }
    }

    #[test]
    fn zero_residual_has_zero_mean_gradient() {
        let d = 2;
        let p = params(d);
        let x = random_dataset(6, d, 9).inputs().clone();
        let data = GpDataset::new(x, vec![p.mean_const; 6]).unwrap();
        let (_, grad) = log_marginal_likelihood_grad(&p, &data).unwrap();
        assert!(grad.mean_const.abs() < 1e-12);
    }

    #[test]
    fn lml_invariant_under_permutation() {
        let d = 3;
        let p = params(d);
        let data = random_dataset(12, d, 3);
        let lml = log_marginal_likelihood(&p, &data).unwrap();
        let n = data.len();
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for i in (0..n).rev() {
            rows.push(data.inputs().take_row(i));
            ys.push(data.targets()[i]);
        }
        let perm = GpDataset::new(Mat::from_rows(&rows), ys).unwrap();
        let lml_perm = log_marginal_likelihood(&p, &perm).unwrap();
        assert!((lml - lml_perm).abs() < 1e-10);
    }

    #[test]
    fn posterior_interpolates_with_vanishing_noise() {
        let d = 2;
        let mut p = params(d);
        p.noise_var = 1e-10;
        let x = Mat::from_rows(&[vec![0.2, 0.3], vec![0.8, 0.5], vec![0.4, 0.9]]);
        let y = vec![1.0, -0.5, 0.7];
        let data = GpDataset::new(x.clone(), y.clone()).unwrap();
        let pred = posterior(&p, &data, &x).unwrap();
        for i in 0..3 {
            assert!((pred.mean[i] - y[i]).abs() < 1e-4);
            assert!(pred.cov[(i, i)] >= 0.0 && pred.cov[(i, i)] < 1e-4);
        }
    }

    #[test]
    fn posterior_reverts_to_prior_far_away() {
        let d = 2;
        let mut p = params(d);
        p.lengthscales = vec![0.01; d];
        let data = GpDataset::new(Mat::from_rows(&[vec![0.0, 0.0]]), vec![5.0]).unwrap();
        let q = Mat::from_rows(&[vec![1.0, 1.0]]);
        let pred = posterior(&p, &data, &q).unwrap();
        assert!((pred.mean[0] - p.mean_const).abs() < 1e-9);
        assert!((pred.cov[(0, 0)] - p.signal_var).abs() < 1e-9);
    }

    #[test]
    fn posterior_matches_dense_oracle() {
        let d = 2;
        let p = params(d);
        let data = random_dataset(3, d, 17);
        let q = Mat::from_rows(&[vec![0.25, 0.5], vec![0.75, 0.1]]);
        let pred = posterior(&p, &data, &q).unwrap();

        let (k, _) = train_covariance(&p, data.inputs());
        let k_inv = dense_inverse(&k);
        let k_qn = kernel_matrix(&p, &q, data.inputs()).unwrap();
        let k_qq = kernel_matrix(&p, &q, &q).unwrap();
        let resid: Vec<f64> = data.targets().iter().map(|y| y - p.mean_const).collect();
        let mean: Vec<f64> = k_qn
            .matvec(&k_inv.matvec(&resid))
            .iter()
            .map(|v| v + p.mean_const)
            .collect();
        for i in 0..2 {
            assert!((pred.mean[i] - mean[i]).abs() < 1e-10);
            let mut var = k_qq[(i, i)];
            let ki = k_qn.take_row(i);
            let tmp = k_inv.matvec(&ki);
            var -= crate::linalg::dot(&ki, &tmp);
            assert!((pred.cov[(i, i)] - var).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_dataset_predicts_prior() {
        let d = 2;
        let p = params(d);
        let data = GpDataset::new(Mat::zeros(0, d), vec![]).unwrap();
        let q = Mat::from_rows(&[vec![0.5, 0.5]]);
        let pred = posterior(&p, &data, &q).unwrap();
        assert_eq!(pred.mean, vec![p.mean_const]);
        assert!((pred.cov[(0, 0)] - p.signal_var).abs() < 1e-15);
        assert!(log_marginal_likelihood(&p, &data).is_err());
    }

    #[test]
    fn kernel_matrix_is_psd() {
        let d = 4;
        let mut p = params(d);
        p.noise_var = 1e-8;
        let data = random_dataset(40, d, 23);
        let (k, _) = train_covariance(&p, data.inputs());
        assert!(CholeskyFactor::new_with_jitter(&k).is_ok());
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params(2);
        let bad = GpDataset::new(Mat::from_rows(&[vec![1.5, 0.0]]), vec![0.0]);
        assert_eq!(bad.unwrap_err(), GpError::InputOutsideUnitCube);
        let data = random_dataset(4, 3, 2);
        assert_eq!(
            log_marginal_likelihood(&p, &data).unwrap_err(),
            GpError::DimensionMismatch
        );
        let mut p_bad = p.clone();
        p_bad.noise_var = 0.0;
        let data2 = random_dataset(4, 2, 2);
        assert!(matches!(
            log_marginal_likelihood(&p_bad, &data2),
            Err(GpError::InvalidHyperParams(_))
        ));
    }
}
