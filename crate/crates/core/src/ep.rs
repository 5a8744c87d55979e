//! Expectation propagation for GP regression with virtual derivative observations.
//!
//! The model has exact Gaussian likelihood terms for the observations `y` and
//! probit terms `Φ(m_i f'_i / ν)` for the sign of the partial derivative `f'_i`
//! at each virtual point. Since the Gaussian terms are exact, they are
//! absorbed analytically first: conditioning the joint prior on `y` leaves a
//! Gaussian prior `N(m, K')` over the `M` derivative values, and ordinary
//! sequential probit EP runs on that. The marginal likelihood then factors as
//!
//! ```text
//! Z_EP = N(y | 0, K_ff + σ²I) · Z_EP(m | y)
//! ```
//!
//! which equals the joint-form EP normalizer of the full `N + M` system.
//! Sites are stored in natural parameters `(τ̃_i, ν̃_i)`, so a site that has not
//! learned anything yet (`τ̃_i = 0`) needs no special casing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{self, GpModel, HyperBounds, PredictiveDistribution};
use crate::kernels::{KernelFamily, Observation};
use crate::linalg::{self, Chol};
use crate::optim::{self, MinimizeOptions};
use crate::stats::{self, LN_2PI};

/// Probit steepness used when none is given.
pub const DEFAULT_STEEPNESS: f64 = 1e-6;

/// Locations, target dimensions and signs of virtual derivative observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualDerivativeSet {
    /// `M × D`, one virtual point per row.
    pub locations: DMatrix<f64>,
    pub dims: Vec<usize>,
    /// `+1` asserts an increasing function, `-1` a decreasing one.
    pub signs: Vec<f64>,
    /// Probit steepness ν; smaller is closer to a hard constraint.
    pub nu: f64,
}

impl VirtualDerivativeSet {
    pub fn new(locations: DMatrix<f64>, dims: Vec<usize>, signs: Vec<f64>, nu: f64) -> Result<Self> {
        let m = locations.nrows();
        if dims.len() != m || signs.len() != m {
            return Err(Error::invalid(format!(
                "{m} virtual locations but {} dims and {} signs",
                dims.len(),
                signs.len()
            )));
        }
        if let Some(d) = dims.iter().find(|d| **d >= locations.ncols()) {
            return Err(Error::invalid(format!(
                "virtual dimension {d} out of range for {} inputs",
                locations.ncols()
            )));
        }
        if let Some(s) = signs.iter().find(|s| **s != 1.0 && **s != -1.0) {
            return Err(Error::invalid(format!("virtual sign must be +1 or -1, got {s}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid(format!("probit steepness must be positive, got {nu}")));
        }
        Ok(VirtualDerivativeSet {
            locations,
            dims,
            signs,
            nu,
        })
    }

    /// The same sign at every location.
    pub fn uniform(locations: DMatrix<f64>, dim: usize, sign: f64, nu: f64) -> Result<Self> {
        let m = locations.nrows();
        Self::new(locations, vec![dim; m], vec![sign; m], nu)
    }

    pub fn empty(dim: usize) -> Self {
        VirtualDerivativeSet {
            locations: DMatrix::zeros(0, dim),
            dims: Vec::new(),
            signs: Vec::new(),
            nu: DEFAULT_STEEPNESS,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Same locations with every sign flipped.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.signs.iter_mut().for_each(|s| *s = -*s);
        out
    }

    /// Concatenate two sets sharing the same steepness.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let d = self.locations.ncols();
        if other.locations.ncols() != d {
            return Err(Error::invalid("virtual sets have different input dimensions"));
        }
        let m = self.len() + other.len();
        let mut loc = DMatrix::zeros(m, d);
        loc.view_mut((0, 0), (self.len(), d)).copy_from(&self.locations);
        loc.view_mut((self.len(), 0), (other.len(), d)).copy_from(&other.locations);
        let dims = self.dims.iter().chain(&other.dims).copied().collect();
        let signs = self.signs.iter().chain(&other.signs).copied().collect();
        Self::new(loc, dims, signs, self.nu)
    }

    /// Reorder the virtual observations.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        for &i in order {
            if i >= self.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        if order.len() != self.len() {
            return Err(Error::invalid("not a permutation"));
        }
        let loc = DMatrix::from_fn(self.len(), self.locations.ncols(), |r, c| {
            self.locations[(order[r], c)]
        });
        let dims = order.iter().map(|&i| self.dims[i]).collect();
        let signs = order.iter().map(|&i| self.signs[i]).collect();
        Self::new(loc, dims, signs, self.nu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpConfig {
    /// Fraction of each site update that is applied.
    pub damping: f64,
    /// Convergence threshold on the largest change of a site natural parameter.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for EpConfig {
    fn default() -> Self {
        EpConfig {
            damping: 0.8,
            tolerance: 1e-6,
            max_sweeps: 200,
        }
    }
}

/// Converged (or flagged) EP approximation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpState {
    /// Site precisions `τ̃_i = 1/σ̃_i²`.
    pub site_precisions: DVector<f64>,
    /// Site precision-adjusted means `ν̃_i = μ̃_i/σ̃_i²`.
    pub site_shifts: DVector<f64>,
    /// Log scale `c_i` of each site written as `exp(c_i - τ̃_i f²/2 + ν̃_i f)`.
    pub site_log_scales: DVector<f64>,
    /// Mean of `(f_X, f'_{X_m})` under the approximate posterior.
    pub posterior_mean: DVector<f64>,
    pub posterior_cov: DMatrix<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Site updates skipped because the cavity variance was not positive.
    pub skipped_updates: usize,
    /// `-log Z_EP`.
    pub energy: f64,
}

impl EpState {
    /// Site means `μ̃_i`; zero for sites that carry no information.
    pub fn site_means(&self) -> DVector<f64> {
        self.site_shifts.zip_map(&self.site_precisions, |nu, tau| if tau > 0.0 { nu / tau } else { 0.0 })
    }

    /// Site variances `σ̃_i²`; infinite for sites that carry no information.
    pub fn site_variances(&self) -> DVector<f64> {
        self.site_precisions.map(|tau| if tau > 0.0 { 1.0 / tau } else { f64::INFINITY })
    }

    /// Posterior mean and variance of the `i`-th derivative value.
    pub fn derivative_moments(&self, i: usize) -> (f64, f64) {
        let n = self.posterior_mean.len() - self.site_precisions.len();
        (self.posterior_mean[n + i], self.posterior_cov[(n + i, n + i)])
    }
}

/// Prior over the derivative values after conditioning on `y`.
struct ConditionedPrior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    /// `-log N(y | 0, K_ff + σ²I)`.
    data_energy: f64,
}

fn check_inputs(model: &GpModel, x: &DMatrix<f64>, y: &DVector<f64>, virt: &VirtualDerivativeSet) -> Result<()> {
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "{} input rows and {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if x.ncols() != model.dim() || virt.locations.ncols() != model.dim() {
        return Err(Error::invalid("input and virtual-point dimensions must match the kernel"));
    }
    Ok(())
}

fn condition_on_data(model: &GpModel, x: &DMatrix<f64>, y: &DVector<f64>, virt: &VirtualDerivativeSet) -> Result<ConditionedPrior> {
    let rows = linalg::rows(x);
    let vrows = linalg::rows(&virt.locations);
    let fobs = gp::value_observations(&rows);
    let dobs = gp::derivative_observations(&vrows, &virt.dims);
    let mut kff = gp::covariance_matrix(&model.kernel, &fobs);
    for i in 0..fobs.len() {
        kff[(i, i)] += model.noise_variance;
    }
    let (ch, _) = linalg::cholesky_with_jitter(&kff, model.jitter)?;
    let kfd = gp::cross_covariance(&model.kernel, &fobs, &dobs);
    let v = linalg::solve_lower(&ch, &kfd);
    let z = linalg::solve_lower_vec(&ch, y);
    let mut cov = gp::covariance_matrix(&model.kernel, &dobs) - v.transpose() * &v;
    for i in 0..cov.nrows() {
        cov[(i, i)] += model.jitter;
    }
    linalg::symmetrize(&mut cov);
    let mean = v.transpose() * &z;
    let data_energy = 0.5 * z.norm_squared() + 0.5 * linalg::log_det(&ch) + 0.5 * y.len() as f64 * LN_2PI;
    Ok(ConditionedPrior {
        mean,
        cov,
        data_energy,
    })
}

struct Posterior {
    cov: DMatrix<f64>,
    mean: DVector<f64>,
    chol_b: Chol,
    /// `ν̃ - τ̃ ∘ m`, the site shifts in coordinates centred on the prior mean.
    centred_shift: DVector<f64>,
}

/// `Σ = (K⁻¹ + S̃)⁻¹` and `μ = m + Σ(ν̃ - τ̃∘m)` via `B = I + S̃^½ K S̃^½`.
fn posterior_from_sites(prior: &ConditionedPrior, tau: &DVector<f64>, nu: &DVector<f64>) -> Result<Posterior> {
    let k = &prior.cov;
    let m = k.nrows();
    let sw = tau.map(|t| t.max(0.0).sqrt());
    let mut b = DMatrix::from_fn(m, m, |i, j| sw[i] * k[(i, j)] * sw[j]);
    for i in 0..m {
        b[(i, i)] += 1.0;
    }
    let (chol_b, _) = linalg::cholesky_with_jitter(&b, 0.0)?;
    let swk = DMatrix::from_fn(m, m, |i, j| sw[i] * k[(i, j)]);
    let v = linalg::solve_lower(&chol_b, &swk);
    let mut cov = k - v.transpose() * &v;
    linalg::symmetrize(&mut cov);
    let centred_shift = nu - tau.component_mul(&prior.mean);
    let mean = &prior.mean + &cov * &centred_shift;
    Ok(Posterior {
        cov,
        mean,
        chol_b,
        centred_shift,
    })
}

struct Sites {
    tau: DVector<f64>,
    nu: DVector<f64>,
    converged: bool,
    sweeps: usize,
    skipped: usize,
}

fn run_sweeps(prior: &ConditionedPrior, virt: &VirtualDerivativeSet, config: &EpConfig, init: Option<(&DVector<f64>, &DVector<f64>)>) -> Result<Sites> {
    let m = virt.len();
    let (mut tau, mut nu) = match init {
        Some((t, n)) if t.len() == m && n.len() == m => (t.clone(), n.clone()),
        _ => (DVector::zeros(m), DVector::zeros(m)),
    };
    let mut damping = vec![config.damping; m];
    let post = posterior_from_sites(prior, &tau, &nu)?;
    let (mut sigma, mut mu) = (post.cov, post.mean);
    let mut skipped = 0;
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < config.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for i in 0..m {
            let sii = sigma[(i, i)];
            let tau_cav = 1.0 / sii - tau[i];
            if !(tau_cav > 0.0 && tau_cav.is_finite()) {
                skipped += 1;
                damping[i] *= 0.5;
                continue;
            }
            let nu_cav = mu[i] / sii - nu[i];
            let tilted = stats::probit_tilted(virt.signs[i], nu_cav / tau_cav, 1.0 / tau_cav, virt.nu);
            let tau_new = (1.0 / tilted.variance - tau_cav).max(0.0);
            let nu_new = tilted.mean / tilted.variance - nu_cav;
            let d_tau = damping[i] * (tau_new - tau[i]);
            let d_nu = damping[i] * (nu_new - nu[i]);
            if !(d_tau.is_finite() && d_nu.is_finite()) {
                skipped += 1;
                damping[i] *= 0.5;
                continue;
            }
            max_change = max_change.max(d_tau.abs()).max(d_nu.abs());
            tau[i] += d_tau;
            nu[i] += d_nu;
            // rank-one refresh of Σ and μ
            let s = sigma.column(i).clone_owned();
            let denom = 1.0 + d_tau * sii;
            let mu_i = mu[i];
            sigma.ger(-d_tau / denom, &s, &s, 1.0);
            mu.axpy((d_nu - d_tau * mu_i) / denom, &s, 1.0);
        }
        // recompute from scratch to stop round-off from accumulating
        let post = posterior_from_sites(prior, &tau, &nu)?;
        sigma = post.cov;
        mu = post.mean;
        if sigma.iter().chain(mu.iter()).chain(tau.iter()).chain(nu.iter()).any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("non-finite EP posterior after sweep {sweeps}")));
        }
        if max_change < config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(Sites {
        tau,
        nu,
        converged,
        sweeps,
        skipped,
    })
}

/// `-log Z_EP(m | y)` for the sign observations under the conditioned prior,
/// plus the per-site log scales.
fn probit_energy(prior: &ConditionedPrior, virt: &VirtualDerivativeSet, tau: &DVector<f64>, nu: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let m = virt.len();
    if m == 0 {
        return Ok((0.0, DVector::zeros(0)));
    }
    let post = posterior_from_sites(prior, tau, nu)?;
    let mut log_scales = DVector::zeros(m);
    for i in 0..m {
        let sii = post.cov[(i, i)];
        let tau_cav = 1.0 / sii - tau[i];
        if !(tau_cav > 0.0) {
            return Err(Error::numerical(format!("non-positive cavity precision at site {i}")));
        }
        let nu_cav = post.mean[i] / sii - nu[i];
        let tilted = stats::probit_tilted(virt.signs[i], nu_cav / tau_cav, 1.0 / tau_cav, virt.nu);
        let a = tau_cav + tau[i];
        let b = nu_cav + nu[i];
        log_scales[i] = tilted.log_z + 0.5 * nu_cav * nu_cav / tau_cav - 0.5 * b * b / a - 0.5 * (tau_cav / a).ln();
    }
    let shift_terms: f64 = (0..m)
        .map(|i| nu[i] * prior.mean[i] - 0.5 * tau[i] * prior.mean[i] * prior.mean[i])
        .sum();
    let half_log_det_b = 0.5 * linalg::log_det(&post.chol_b);
    let quad = post.centred_shift.dot(&(&post.cov * &post.centred_shift));
    let log_z = log_scales.sum() + shift_terms - half_log_det_b + 0.5 * quad;
    if !log_z.is_finite() {
        return Err(Error::numerical("non-finite EP marginal likelihood"));
    }
    Ok((-log_z, log_scales))
}

/// Solution of the joint `N + M` Gaussian system under the current sites:
/// `alpha = (A + Σ̃)⁻¹ μ̃` and `r = (A + Σ̃)⁻¹`, written without inverting `Σ̃`.
struct JointSolve {
    prior: DMatrix<f64>,
    alpha: DVector<f64>,
    r: DMatrix<f64>,
}

fn joint_solve(model: &GpModel, obs: &[Observation<'_>], y: &DVector<f64>, tau: &DVector<f64>, nu: &DVector<f64>) -> Result<JointSolve> {
    let n = y.len();
    let total = obs.len();
    let mut a = gp::covariance_matrix(&model.kernel, obs);
    for i in 0..total {
        a[(i, i)] += model.jitter;
    }
    let w: DVector<f64> = DVector::from_fn(total, |i, _| {
        if i < n {
            1.0 / model.noise_variance
        } else {
            tau[i - n].max(0.0)
        }
    });
    let h = DVector::from_fn(total, |i, _| if i < n { y[i] / model.noise_variance } else { nu[i - n] });
    let sw = w.map(f64::sqrt);
    let mut b = DMatrix::from_fn(total, total, |i, j| sw[i] * a[(i, j)] * sw[j]);
    for i in 0..total {
        b[(i, i)] += 1.0;
    }
    let (ch, _) = linalg::cholesky_with_jitter(&b, 0.0)?;
    let mut r = ch.inverse();
    for j in 0..total {
        for i in 0..total {
            r[(i, j)] *= sw[i] * sw[j];
        }
    }
    let alpha = &h - &r * (&a * &h);
    Ok(JointSolve { prior: a, alpha, r })
}

/// Run EP to convergence for fixed hyperparameters.
pub fn ep_fit(model: &GpModel, x: &DMatrix<f64>, y: &DVector<f64>, virt: &VirtualDerivativeSet, config: &EpConfig) -> Result<EpState> {
    ep_fit_from(model, x, y, virt, config, None)
}

fn ep_fit_from(
    model: &GpModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    virt: &VirtualDerivativeSet,
    config: &EpConfig,
    init: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<EpState> {
    check_inputs(model, x, y, virt)?;
    if virt.is_empty() {
        return Err(Error::invalid("EP needs at least one virtual observation"));
    }
    let prior = condition_on_data(model, x, y, virt)?;
    let sites = run_sweeps(&prior, virt, config, init)?;
    let (probit, log_scales) = probit_energy(&prior, virt, &sites.tau, &sites.nu)?;

    let rows = linalg::rows(x);
    let vrows = linalg::rows(&virt.locations);
    let obs = joint_observations(&rows, &vrows, &virt.dims);
    let js = joint_solve(model, &obs, y, &sites.tau, &sites.nu)?;
    let posterior_mean = &js.prior * &js.alpha;
    let ra = &js.r * &js.prior;
    let mut posterior_cov = &js.prior - &js.prior * ra;
    linalg::symmetrize(&mut posterior_cov);
    if posterior_mean.iter().chain(posterior_cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite joint posterior"));
    }

    Ok(EpState {
        site_precisions: sites.tau,
        site_shifts: sites.nu,
        site_log_scales: log_scales,
        posterior_mean,
        posterior_cov,
        converged: sites.converged,
        sweeps: sites.sweeps,
        skipped_updates: sites.skipped,
        energy: prior.data_energy + probit,
    })
}

fn joint_observations<'a>(rows: &'a [Vec<f64>], vrows: &'a [Vec<f64>], dims: &[usize]) -> Vec<Observation<'a>> {
    let mut obs = gp::value_observations(rows);
    obs.extend(gp::derivative_observations(vrows, dims));
    obs
}

/// `-log Z_EP` recomputed from the sites stored in `state`.
pub fn ep_energy(state: &EpState, model: &GpModel, x: &DMatrix<f64>, y: &DVector<f64>, virt: &VirtualDerivativeSet) -> Result<f64> {
    check_inputs(model, x, y, virt)?;
    if state.site_precisions.len() != virt.len() {
        return Err(Error::invalid("EP state does not match the virtual observations"));
    }
    let prior = condition_on_data(model, x, y, virt)?;
    let (probit, _) = probit_energy(&prior, virt, &state.site_precisions, &state.site_shifts)?;
    Ok(prior.data_energy + probit)
}

/// Gaussian predictive for the latent function at `xstar` under the EP posterior.
pub fn ep_predict(
    state: &EpState,
    model: &GpModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    virt: &VirtualDerivativeSet,
    xstar: &DMatrix<f64>,
) -> Result<PredictiveDistribution> {
    check_inputs(model, x, y, virt)?;
    if xstar.nrows() == 0 {
        return Ok(PredictiveDistribution::empty());
    }
    if xstar.ncols() != model.dim() {
        return Err(Error::invalid("test inputs do not match the kernel dimension"));
    }
    let rows = linalg::rows(x);
    let vrows = linalg::rows(&virt.locations);
    let obs = joint_observations(&rows, &vrows, &virt.dims);
    let js = joint_solve(model, &obs, y, &state.site_precisions, &state.site_shifts)?;
    let srows = linalg::rows(xstar);
    let sobs = gp::value_observations(&srows);
    let kstar = gp::cross_covariance(&model.kernel, &sobs, &obs);
    let mean = &kstar * &js.alpha;
    let mut cov = gp::covariance_matrix(&model.kernel, &sobs) - &kstar * (&js.r * kstar.transpose());
    linalg::symmetrize(&mut cov);
    Ok(PredictiveDistribution::new(mean, cov))
}

/// EP energy and its gradient in log-hyperparameter space, treating the
/// converged sites as fixed (valid at an EP fixed point).
pub fn ep_energy_and_gradient(
    model: &GpModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    virt: &VirtualDerivativeSet,
    config: &EpConfig,
) -> Result<(f64, Vec<f64>)> {
    let mut warm = None;
    energy_gradient_warm(model, x, y, virt, config, &mut warm)
}

type WarmStart = Option<(DVector<f64>, DVector<f64>)>;

fn energy_gradient_warm(
    model: &GpModel,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    virt: &VirtualDerivativeSet,
    config: &EpConfig,
    warm: &mut WarmStart,
) -> Result<(f64, Vec<f64>)> {
    check_inputs(model, x, y, virt)?;
    let prior = condition_on_data(model, x, y, virt)?;
    let init = warm.as_ref().map(|(t, n)| (t, n));
    let sites = run_sweeps(&prior, virt, config, init)?;
    let (probit, _) = probit_energy(&prior, virt, &sites.tau, &sites.nu)?;
    let rows = linalg::rows(x);
    let vrows = linalg::rows(&virt.locations);
    let obs = joint_observations(&rows, &vrows, &virt.dims);
    let js = joint_solve(model, &obs, y, &sites.tau, &sites.nu)?;
    let grad = gp::energy_gradient(model, &obs, &js.alpha, &js.r, y.len(), model.noise_variance);
    *warm = Some((sites.tau, sites.nu));
    Ok((prior.data_energy + probit, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneFitConfig {
    pub ep: EpConfig,
    pub bounds: HyperBounds,
    pub penalty_weight: f64,
    pub minimize: MinimizeOptions,
}

impl Default for MonotoneFitConfig {
    fn default() -> Self {
        MonotoneFitConfig {
            ep: EpConfig::default(),
            bounds: HyperBounds::default(),
            penalty_weight: 100.0,
            minimize: MinimizeOptions {
                max_iters: 100,
                grad_tol: 1e-4,
                value_tol: 1e-9,
                ..MinimizeOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonotoneFit {
    pub model: GpModel,
    pub state: EpState,
    pub optimizer_iterations: usize,
    pub optimizer_converged: bool,
}

/// Re-estimate the hyperparameters under the EP marginal likelihood, starting
/// from `start` (typically the plain-GP estimate), and return the final EP state.
pub fn fit_monotone(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    virt: &VirtualDerivativeSet,
    start: &GpModel,
    config: &MonotoneFitConfig,
) -> Result<MonotoneFit> {
    check_inputs(start, x, y, virt)?;
    let family: KernelFamily = start.kernel.family();
    let dim = start.dim();
    let jitter = start.jitter;
    let bounds = config.bounds.soft(family, dim, config.penalty_weight);
    let mut warm: WarmStart = None;
    let objective = |p: &[f64]| -> Result<(f64, Vec<f64>)> {
        let model = GpModel::from_log_params(family, dim, p, jitter)?;
        energy_gradient_warm(&model, x, y, virt, &config.ep, &mut warm)
    };
    let min = optim::minimize(objective, &start.log_params(), &bounds, &config.minimize)?;
    let model = GpModel::from_log_params(family, dim, &min.x, jitter)?;
    let state = ep_fit(&model, x, y, virt, &config.ep)?;
    Ok(MonotoneFit {
        model,
        state,
        optimizer_iterations: min.iterations,
        optimizer_converged: min.converged,
    })
}
