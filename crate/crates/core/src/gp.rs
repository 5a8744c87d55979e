//! Exact Gaussian-process regression with a zero-mean prior.
//!
//! Covers joint covariance assembly over function values and partial
//! derivatives, the log marginal likelihood with its analytic gradient in
//! log-hyperparameter space, predictive moments, and multi-start
//! hyperparameter point estimation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ep::VirtualDerivativeSet;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, Observation};
use crate::linalg::{self, Chol};
use crate::optim::{self, MinimizeOptions, SoftBounds};
use crate::stats::LN_2PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub kernel: KernelSpec,
    pub noise_variance: f64,
    pub jitter: f64,
}

impl GpModel {
    pub fn new(kernel: KernelSpec, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        Ok(GpModel {
            kernel,
            noise_variance,
            jitter: 0.0,
        })
    }

    pub fn with_jitter(mut self, jitter: f64) -> Result<Self> {
        if !(jitter >= 0.0) {
            return Err(Error::invalid(format!("jitter must be non-negative, got {jitter}")));
        }
        self.jitter = jitter;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Kernel log-hyperparameters followed by `log σ²`.
    pub fn log_params(&self) -> Vec<f64> {
        let mut p = self.kernel.log_params();
        p.push(self.noise_variance.ln());
        p
    }

    pub fn from_log_params(family: KernelFamily, dim: usize, params: &[f64], jitter: f64) -> Result<Self> {
        let (last, kernel_params) = params
            .split_last()
            .ok_or_else(|| Error::invalid("empty parameter vector"))?;
        let kernel = KernelSpec::from_log_params(family, dim, kernel_params)?;
        GpModel::new(kernel, last.exp())?.with_jitter(jitter)
    }

    /// `log N(y | 0, K + σ²I)`.
    pub fn log_marginal_likelihood(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
        check_data(self, x, y)?;
        let rows = linalg::rows(x);
        let obs = value_observations(&rows);
        let (ch, _) = self.noisy_cholesky(&obs)?;
        let z = linalg::solve_lower_vec(&ch, y);
        let n = y.len() as f64;
        Ok(-0.5 * z.norm_squared() - 0.5 * linalg::log_det(&ch) - 0.5 * n * LN_2PI)
    }

    /// Energy `-log p(y|X)` and its gradient with respect to [`log_params`](Self::log_params).
    pub fn energy_and_gradient(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
        check_data(self, x, y)?;
        let rows = linalg::rows(x);
        let obs = value_observations(&rows);
        let (ch, _) = self.noisy_cholesky(&obs)?;
        let alpha = ch.solve(y);
        let energy = 0.5 * y.dot(&alpha) + 0.5 * linalg::log_det(&ch) + 0.5 * y.len() as f64 * LN_2PI;
        let r = ch.inverse();
        let grad = energy_gradient(self, &obs, &alpha, &r, y.len(), self.noise_variance);
        Ok((energy, grad))
    }

    fn noisy_cholesky(&self, obs: &[Observation<'_>]) -> Result<(Chol, f64)> {
        let mut k = covariance_matrix(&self.kernel, obs);
        for i in 0..obs.len() {
            k[(i, i)] += self.noise_variance;
        }
        linalg::cholesky_with_jitter(&k, self.jitter)
    }

    /// Exact predictive moments of the latent function at `xstar`.
    pub fn predict(&self, x: &DMatrix<f64>, y: &DVector<f64>, xstar: &DMatrix<f64>) -> Result<PredictiveDistribution> {
        check_data(self, x, y)?;
        if xstar.nrows() > 0 && xstar.ncols() != self.dim() {
            return Err(Error::invalid(format!(
                "test inputs have {} columns, model expects {}",
                xstar.ncols(),
                self.dim()
            )));
        }
        if xstar.nrows() == 0 {
            return Ok(PredictiveDistribution::empty());
        }
        let rows = linalg::rows(x);
        let obs = value_observations(&rows);
        let (ch, _) = self.noisy_cholesky(&obs)?;
        let alpha = ch.solve(y);
        let srows = linalg::rows(xstar);
        let sobs = value_observations(&srows);
        let kstar = cross_covariance(&self.kernel, &sobs, &obs);
        let v = linalg::solve_lower(&ch, &kstar.transpose());
        let mean = &kstar * alpha;
        let mut cov = covariance_matrix(&self.kernel, &sobs) - v.transpose() * v;
        linalg::symmetrize(&mut cov);
        Ok(PredictiveDistribution::new(mean, cov))
    }
}

fn check_data(model: &GpModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::invalid("at least one training point is required"));
    }
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "{} input rows but {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.ncols() != model.dim() {
        return Err(Error::invalid(format!(
            "inputs have {} columns, kernel expects {}",
            x.ncols(),
            model.dim()
        )));
    }
    Ok(())
}

/// Gaussian predictive moments of `L` latent values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl PredictiveDistribution {
    pub fn new(mean: DVector<f64>, mut covariance: DMatrix<f64>) -> Self {
        for i in 0..covariance.nrows() {
            if covariance[(i, i)] < 0.0 {
                covariance[(i, i)] = 0.0;
            }
        }
        PredictiveDistribution { mean, covariance }
    }

    pub fn empty() -> Self {
        PredictiveDistribution {
            mean: DVector::zeros(0),
            covariance: DMatrix::zeros(0, 0),
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn variances(&self) -> DVector<f64> {
        self.covariance.diagonal()
    }
}

/// Prior covariance of function values at `X` and derivative values at the virtual points.
#[derive(Debug, Clone)]
pub struct JointCovariance {
    pub k_ff: DMatrix<f64>,
    pub k_fd: DMatrix<f64>,
    pub k_dd: DMatrix<f64>,
    /// `[[K_ff, K_fd], [K_fdᵀ, K_dd]] + jitter·I`.
    pub assembled: DMatrix<f64>,
    /// Extra diagonal that was needed for a Cholesky factorization to succeed.
    pub psd_jitter: f64,
}

pub fn build_joint_covariance(
    kernel: &KernelSpec,
    x: &DMatrix<f64>,
    virt: &VirtualDerivativeSet,
    jitter: f64,
) -> Result<JointCovariance> {
    if x.ncols() != kernel.dim() || (virt.len() > 0 && virt.locations.ncols() != kernel.dim()) {
        return Err(Error::invalid("input and virtual-point dimensions must match the kernel"));
    }
    let rows = linalg::rows(x);
    let vrows = linalg::rows(&virt.locations);
    let fobs = value_observations(&rows);
    let dobs = derivative_observations(&vrows, &virt.dims);
    let n = fobs.len();
    let m = dobs.len();
    let k_ff = covariance_matrix(kernel, &fobs);
    let k_fd = cross_covariance(kernel, &fobs, &dobs);
    let k_dd = covariance_matrix(kernel, &dobs);
    let mut assembled = DMatrix::zeros(n + m, n + m);
    assembled.view_mut((0, 0), (n, n)).copy_from(&k_ff);
    assembled.view_mut((0, n), (n, m)).copy_from(&k_fd);
    assembled.view_mut((n, 0), (m, n)).copy_from(&k_fd.transpose());
    assembled.view_mut((n, n), (m, m)).copy_from(&k_dd);
    for i in 0..n + m {
        assembled[(i, i)] += jitter;
    }
    let (_, used) = linalg::cholesky_with_jitter(&assembled, 0.0).map_err(|e| match e {
        Error::NumericalFailure { message, jitter: j } => Error::NumericalFailure {
            message: format!("joint covariance: {message}"),
            jitter: jitter + j,
        },
        other => other,
    })?;
    Ok(JointCovariance {
        k_ff,
        k_fd,
        k_dd,
        assembled,
        psd_jitter: used,
    })
}

pub(crate) fn value_observations(rows: &[Vec<f64>]) -> Vec<Observation<'_>> {
    rows.iter().map(|r| Observation::Value(r)).collect()
}

pub(crate) fn derivative_observations<'a>(rows: &'a [Vec<f64>], dims: &[usize]) -> Vec<Observation<'a>> {
    rows.iter()
        .zip(dims)
        .map(|(r, &dim)| Observation::Derivative { point: r, dim })
        .collect()
}

pub(crate) fn covariance_matrix(kernel: &KernelSpec, obs: &[Observation<'_>]) -> DMatrix<f64> {
    let n = obs.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = kernel.cov(obs[i], obs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

pub(crate) fn cross_covariance(kernel: &KernelSpec, a: &[Observation<'_>], b: &[Observation<'_>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| kernel.cov(a[i], b[j]))
}

/// Gradient of `-log N(μ̃ | 0, A + Σ̃)` with respect to the model's log-hyperparameters,
/// given `alpha = (A + Σ̃)⁻¹ μ̃` and `r = (A + Σ̃)⁻¹`.
///
/// The first `n_noisy` observations carry the Gaussian noise `noise_variance`
/// on their diagonal; the remaining ones have noise-free sites.
pub(crate) fn energy_gradient(
    model: &GpModel,
    obs: &[Observation<'_>],
    alpha: &DVector<f64>,
    r: &DMatrix<f64>,
    n_noisy: usize,
    noise_variance: f64,
) -> Vec<f64> {
    let p = model.kernel.n_params();
    let mut grad = vec![0.0; p + 1];
    let mut entry = vec![0.0; p];
    let n = obs.len();
    for j in 0..n {
        for i in j..n {
            model.kernel.cov_with_grad(obs[i], obs[j], &mut entry);
            let w = alpha[i] * alpha[j] - r[(i, j)];
            let w = if i == j { -0.5 * w } else { -w };
            for (g, e) in grad.iter_mut().zip(&entry) {
                *g += w * e;
            }
        }
    }
    let mut noise = 0.0;
    for i in 0..n_noisy {
        noise += alpha[i] * alpha[i] - r[(i, i)];
    }
    grad[p] = -0.5 * noise_variance * noise;
    grad
}

/// Box bounds on log-hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub log_lengthscale: (f64, f64),
    pub log_signal_variance: (f64, f64),
    pub log_noise_variance: (f64, f64),
    pub log_linear_variance: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            log_lengthscale: (-3.0, 3.0),
            log_signal_variance: (-3.0, 3.0),
            log_noise_variance: (-6.0, 2.0),
            log_linear_variance: (-6.0, 3.0),
        }
    }
}

impl HyperBounds {
    /// Bounds in [`GpModel::log_params`] order.
    pub fn soft(&self, family: KernelFamily, dim: usize, weight: f64) -> SoftBounds {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut push = |(lo, hi): (f64, f64), count: usize| {
            lower.extend(std::iter::repeat_n(lo, count));
            upper.extend(std::iter::repeat_n(hi, count));
        };
        if matches!(family, KernelFamily::SquaredExponential | KernelFamily::SeLinear) {
            push(self.log_signal_variance, 1);
            push(self.log_lengthscale, dim);
        }
        if matches!(family, KernelFamily::Linear | KernelFamily::SeLinear) {
            push(self.log_linear_variance, dim);
        }
        push(self.log_noise_variance, 1);
        SoftBounds { lower, upper, weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    /// Number of local optimizations; the first starts from a fixed default.
    pub restarts: usize,
    pub seed: u64,
    pub bounds: HyperBounds,
    pub penalty_weight: f64,
    pub minimize: MinimizeOptions,
    pub jitter: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            restarts: 5,
            seed: 0,
            bounds: HyperBounds::default(),
            penalty_weight: 100.0,
            minimize: MinimizeOptions::default(),
            jitter: 0.0,
        }
    }
}

/// Starting points for multi-start optimization, deterministic in `config.seed`.
pub(crate) fn start_points(family: KernelFamily, dim: usize, y: &DVector<f64>, config: &OptimConfig) -> Vec<Vec<f64>> {
    let bounds = config.bounds.soft(family, dim, config.penalty_weight);
    let var_y = if y.len() > 1 { y.variance().max(1e-12) } else { 1.0 };
    let mut first = GpModel::new(KernelSpec::default_for(family, dim), 0.1)
        .expect("valid default")
        .log_params();
    if matches!(family, KernelFamily::SquaredExponential | KernelFamily::SeLinear) {
        first[0] = var_y.ln();
    }
    *first.last_mut().expect("noise parameter") = (0.1 * var_y).ln();
    bounds.clamp(&mut first);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = vec![first];
    for _ in 1..config.restarts.max(1) {
        let p = bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .map(|(lo, hi)| rng.random_range(*lo..*hi))
            .collect();
        starts.push(p);
    }
    starts
}

/// Point estimate of the hyperparameters maximizing the log marginal likelihood.
pub fn fit_hyperparameters(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    family: KernelFamily,
    config: &OptimConfig,
) -> Result<GpModel> {
    if x.nrows() < 2 {
        return Err(Error::invalid("hyperparameter fitting needs at least two points"));
    }
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "{} input rows but {} targets",
            x.nrows(),
            y.len()
        )));
    }
    let dim = x.ncols();
    let bounds = config.bounds.soft(family, dim, config.penalty_weight);
    let objective = |p: &[f64]| -> Result<(f64, Vec<f64>)> {
        GpModel::from_log_params(family, dim, p, config.jitter)?.energy_and_gradient(x, y)
    };
    let mut best: Option<optim::Minimum> = None;
    let mut last_err = None;
    for start in start_points(family, dim, y, config) {
        match optim::minimize(objective, &start, &bounds, &config.minimize) {
            // strict comparison keeps the earliest start on ties
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.value < b.value) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let best = best.ok_or_else(|| {
        Error::OptimizationFailure(format!(
            "all restarts failed: {}",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ))
    })?;
    GpModel::from_log_params(family, dim, &best.x, config.jitter)
}
