//! Automatic monotonicity detection.
//!
//! For every input dimension `i` two monotone models are fitted, one with
//! all virtual derivative signs `+1` and one with all `-1`, and their energies
//! are compared with the plain GP energy:
//!
//! ```text
//! d_i = +1  if  E(+) ≤ E_plain − p₁·C  and  E(−) > E_plain − p₂·C
//! d_i = −1  if  E(−) ≤ E_plain − p₁·C  and  E(+) > E_plain − p₂·C
//! d_i =  0  otherwise,                      C = (N/2) log 2π
//! ```
//!
//! The monotone energies here are in the *detection convention*: the exact
//! EP energy `−log Z_EP` with the Gaussian normalizing constants of the
//! observation terms dropped, i.e. `−log Z_EP − C`. A monotone model that
//! agrees with the data then sits at `E_plain − C`, which is what the
//! thresholds are written against.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ep::{self, EpState, MonotoneFitConfig, VirtualDerivativeSet, DEFAULT_STEEPNESS};
use crate::error::{Error, Result};
use crate::gp::{self, GpModel, OptimConfig};
use crate::kernels::KernelFamily;
use crate::seeds::derive_seed;
use crate::stats::LN_2PI;

/// How virtual derivative locations are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Equispaced over `[min x, max x]`; one-dimensional inputs only.
    Grid1D,
    /// Uniform in the bounding box of the inputs.
    UniformRandom,
    /// A random subset of the training inputs.
    SubsampleTraining,
}

impl Placement {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grid" | "grid1d" => Ok(Placement::Grid1D),
            "uniform" | "uniform-random" => Ok(Placement::UniformRandom),
            "subsample" | "subsample-training" => Ok(Placement::SubsampleTraining),
            other => Err(Error::invalid(format!("unknown placement '{other}'"))),
        }
    }

    pub fn default_for(dim: usize) -> Self {
        if dim == 1 {
            Placement::Grid1D
        } else {
            Placement::UniformRandom
        }
    }
}

/// Number of virtual points per tested dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MCount {
    Fixed(usize),
    /// `max(1, round(f·N))`
    Fraction(f64),
    /// `max(1, ⌈f·N⌉)`
    FractionCeil(f64),
}

impl Default for MCount {
    fn default() -> Self {
        MCount::Fraction(1.0 / 3.0)
    }
}

impl MCount {
    pub fn resolve(self, n: usize) -> Result<usize> {
        let m = match self {
            MCount::Fixed(m) => m,
            MCount::Fraction(f) | MCount::FractionCeil(f) if !(f > 0.0 && f.is_finite()) => {
                return Err(Error::invalid(format!("virtual-point fraction must be positive, got {f}")))
            }
            MCount::Fraction(f) => (f * n as f64).round() as usize,
            // the small slack keeps 30/3 at 10 despite rounding in 1/3
            MCount::FractionCeil(f) => (f * n as f64 - 1e-9).ceil() as usize,
        };
        match self {
            MCount::Fixed(0) => Err(Error::invalid("at least one virtual point is needed")),
            _ => Ok(m.max(1)),
        }
    }
}

/// Whether monotone models get their own hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyperMode {
    /// Re-optimize under the EP marginal likelihood, starting from the plain estimate.
    Refit,
    /// Keep the plain GP estimate.
    ReusePlain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmdConfig {
    /// Acceptance coefficient; closer to 1 is stricter.
    pub p1: f64,
    /// Rejection coefficient for the opposite direction; lower is stricter.
    pub p2: f64,
    pub kernel: KernelFamily,
    pub m_count: MCount,
    /// `None` picks [`Placement::default_for`] the input dimension.
    pub placement: Option<Placement>,
    pub seed: u64,
    pub hyper_mode: HyperMode,
    pub steepness: f64,
    pub optim: OptimConfig,
    pub monotone: MonotoneFitConfig,
    /// Run the per-dimension fits on the rayon pool.
    pub parallel: bool,
}

impl Default for AmdConfig {
    fn default() -> Self {
        AmdConfig {
            p1: 0.99,
            p2: 0.5,
            kernel: KernelFamily::SquaredExponential,
            m_count: MCount::default(),
            placement: None,
            seed: 0,
            hyper_mode: HyperMode::Refit,
            steepness: DEFAULT_STEEPNESS,
            optim: OptimConfig::default(),
            monotone: MonotoneFitConfig::default(),
            parallel: false,
        }
    }
}

impl AmdConfig {
    pub fn validate(&self) -> Result<()> {
        check_coefficients(self.p1, self.p2)?;
        if !(self.steepness > 0.0 && self.steepness.is_finite()) {
            return Err(Error::invalid("probit steepness must be positive"));
        }
        Ok(())
    }

    /// The config with the optimizer seed tied to the detection seed.
    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.optim.seed = derive_seed(seed, &[u64::MAX]);
        self
    }
}

fn check_coefficients(p1: f64, p2: f64) -> Result<()> {
    if !(p1 <= 1.0 && p2 <= 1.0 && p1 > p2) || !p2.is_finite() {
        return Err(Error::invalid(format!(
            "need p2 < p1 ≤ 1, got p1 = {p1}, p2 = {p2}"
        )));
    }
    Ok(())
}

/// `(N/2) log 2π`, the scale of the detection thresholds.
pub fn energy_offset(n: usize) -> f64 {
    0.5 * n as f64 * LN_2PI
}

/// Choose `m` virtual locations for derivatives along `dim`. The returned set
/// has all signs `+1`; use [`VirtualDerivativeSet::negated`] for the other
/// direction.
pub fn place_virtual_points(
    x: &DMatrix<f64>,
    dim: usize,
    m: usize,
    placement: Placement,
    seed: u64,
    steepness: f64,
) -> Result<VirtualDerivativeSet> {
    let (n, d) = x.shape();
    if m == 0 {
        return Err(Error::invalid("at least one virtual point is needed"));
    }
    if n == 0 {
        return Err(Error::invalid("no training inputs to place virtual points over"));
    }
    if dim >= d {
        return Err(Error::invalid(format!("dimension {dim} out of range for {d} inputs")));
    }
    let locations = match placement {
        Placement::Grid1D => {
            if d != 1 {
                return Err(Error::invalid(format!("grid placement needs one-dimensional inputs, got {d}")));
            }
            let (lo, hi) = (x.min(), x.max());
            let pts: Vec<f64> = if m == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
            };
            DMatrix::from_column_slice(m, 1, &pts)
        }
        Placement::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bounds: Vec<(f64, f64)> = x.column_iter().map(|c| (c.min(), c.max())).collect();
            DMatrix::from_fn(m, d, |_, j| j)
                .map(|j| {
                    let (lo, hi) = bounds[j];
                    if hi > lo {
                        rng.random_range(lo..=hi)
                    } else {
                        lo
                    }
                })
        }
        Placement::SubsampleTraining => {
            if m > n {
                return Err(Error::invalid(format!("cannot subsample {m} of {n} training points")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = index::sample(&mut rng, n, m).into_vec();
            x.select_rows(&rows)
        }
    };
    VirtualDerivativeSet::uniform(locations, dim, 1.0, steepness)
}

/// One direction of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignDiagnostics {
    /// Exact `−log Z_EP`.
    pub exact_energy: Option<f64>,
    pub ep_converged: bool,
    pub ep_sweeps: usize,
    pub skipped_updates: usize,
    pub optimizer_iterations: usize,
    pub optimizer_converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub dim: usize,
    pub direction: i8,
    /// Detection-convention energies of the increasing and decreasing models.
    pub energy_plus: Option<f64>,
    pub energy_minus: Option<f64>,
    pub placement: Placement,
    pub virtual_points: usize,
    pub placement_seed: u64,
    pub plus: SignDiagnostics,
    pub minus: SignDiagnostics,
}

impl DimensionResult {
    fn energy(&self, sign: f64) -> Option<f64> {
        if sign > 0.0 {
            self.energy_plus
        } else {
            self.energy_minus
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub directions: Vec<i8>,
    pub p1: f64,
    pub p2: f64,
    pub n: usize,
    /// `−log p(y | X)` of the plain GP at its fitted hyperparameters.
    pub plain_energy: f64,
    /// `(N/2) log 2π`
    pub offset: f64,
    /// `E_plain − p₁·offset`
    pub baseline_accept: f64,
    /// `E_plain − p₂·offset`
    pub baseline_reject: f64,
    pub plain_log_params: Vec<f64>,
    pub dimensions: Vec<DimensionResult>,
    pub plain_fits: usize,
    pub ep_fits: usize,
    /// False when the inputs or targets were not close to zero mean and unit variance.
    pub normalized_input: bool,
}

/// Direction implied by the detection rule for the given energies and baselines.
pub fn decide(energy_plus: Option<f64>, energy_minus: Option<f64>, accept: f64, reject: f64) -> i8 {
    let (Some(ep), Some(em)) = (energy_plus, energy_minus) else {
        return 0;
    };
    if ep <= accept && em > reject {
        1
    } else if em <= accept && ep > reject {
        -1
    } else {
        0
    }
}

impl MonotonicityReport {
    /// Directions for other coefficients, from the stored energies.
    pub fn recompute_directions(&self, p1: f64, p2: f64) -> Result<Vec<i8>> {
        check_coefficients(p1, p2)?;
        let accept = self.plain_energy - p1 * self.offset;
        let reject = self.plain_energy - p2 * self.offset;
        Ok(self
            .dimensions
            .iter()
            .map(|d| decide(d.energy_plus, d.energy_minus, accept, reject))
            .collect())
    }

    /// Largest `p₁` that accepts direction `sign` of `dim`.
    pub fn p1_limit(&self, dim: usize, sign: f64) -> Option<f64> {
        let e = self.dimensions.get(dim)?.energy(sign)?;
        Some((self.plain_energy - e) / self.offset)
    }

    /// `p₂` must exceed this for direction `sign` of `dim` to be accepted.
    pub fn p2_limit(&self, dim: usize, sign: f64) -> Option<f64> {
        self.p1_limit(dim, -sign)
    }

    /// Per-dimension `(p₁, p₂)` detection regions.
    pub fn regions(&self) -> Vec<RegionRecord> {
        (0..self.dimensions.len())
            .map(|dim| {
                let plus = self.p1_limit(dim, 1.0);
                let minus = self.p1_limit(dim, -1.0);
                let (direction, width) = match (plus, minus) {
                    (Some(p), Some(m)) => {
                        let (s, hi, lo) = if p >= m { (1, p, m) } else { (-1, m, p) };
                        let w = hi.min(1.0) - lo;
                        if w > 0.0 {
                            (s, w)
                        } else {
                            (0, 0.0)
                        }
                    }
                    _ => (0, 0.0),
                };
                RegionRecord {
                    dim,
                    direction_if_detected: direction,
                    p1_limit_plus: plus,
                    p2_limit_plus: minus,
                    p1_limit_minus: minus,
                    p2_limit_minus: plus,
                    p1_width: width,
                }
            })
            .collect()
    }
}

/// Where in the `(p₁, p₂)` plane a dimension is detected.
///
/// Direction `s` is detected exactly when `p2_limit(s) < p₂ < p₁ ≤ min(1, p1_limit(s))`,
/// which is non-empty for at most one sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub dim: usize,
    /// The sign whose region is non-empty, or 0 if neither is.
    pub direction_if_detected: i8,
    pub p1_limit_plus: Option<f64>,
    pub p2_limit_plus: Option<f64>,
    pub p1_limit_minus: Option<f64>,
    pub p2_limit_minus: Option<f64>,
    /// Length of the range of `p₁` values that detect some direction.
    pub p1_width: f64,
}

/// A fitted monotone model together with what is needed to predict from it.
#[derive(Debug, Clone)]
pub struct SignedFit {
    pub model: GpModel,
    pub state: EpState,
    pub virt: VirtualDerivativeSet,
}

impl SignedFit {
    pub fn predict(&self, x: &DMatrix<f64>, y: &DVector<f64>, xstar: &DMatrix<f64>) -> Result<gp::PredictiveDistribution> {
        ep::ep_predict(&self.state, &self.model, x, y, &self.virt, xstar)
    }
}

/// Everything fitted during a detection run.
#[derive(Debug, Clone)]
pub struct Detection {
    pub report: MonotonicityReport,
    pub plain: GpModel,
    /// `(increasing, decreasing)` fit per dimension; `None` where fitting failed.
    pub fits: Vec<(Option<SignedFit>, Option<SignedFit>)>,
}

fn looks_normalized(x: &DMatrix<f64>, y: &DVector<f64>) -> bool {
    let ok = |mean: f64, var: f64| mean.abs() < 1e-6 && (var.sqrt() - 1.0).abs() < 1e-6;
    ok(y.mean(), y.variance()) && x.column_iter().all(|c| ok(c.mean(), c.variance()))
}

/// Detect the monotonic direction of every input dimension.
pub fn amd_detect(x: &DMatrix<f64>, y: &DVector<f64>, config: &AmdConfig) -> Result<MonotonicityReport> {
    Ok(amd_detect_full(x, y, config)?.report)
}

/// As [`amd_detect`], also returning the fitted models.
pub fn amd_detect_full(x: &DMatrix<f64>, y: &DVector<f64>, config: &AmdConfig) -> Result<Detection> {
    config.validate()?;
    let (n, d) = x.shape();
    if n < 3 {
        return Err(Error::invalid(format!("detection needs at least three points, got {n}")));
    }
    if y.len() != n {
        return Err(Error::invalid(format!("{n} input rows but {} targets", y.len())));
    }
    let normalized_input = looks_normalized(x, y);
    if !normalized_input {
        log::warn!("inputs or targets are not normalized; the detection thresholds assume they are");
    }
    let placement = config.placement.unwrap_or(Placement::default_for(d));
    let m = config.m_count.resolve(n)?;

    let plain = gp::fit_hyperparameters(x, y, config.kernel, &config.optim)?;
    let plain_energy = -plain.log_marginal_likelihood(x, y)?;

    let mut placements = Vec::with_capacity(d);
    for dim in 0..d {
        let seed = derive_seed(config.seed, &[dim as u64]);
        placements.push((seed, place_virtual_points(x, dim, m, placement, seed, config.steepness)?));
    }
    let tasks: Vec<(usize, f64)> = (0..d).flat_map(|dim| [(dim, 1.0), (dim, -1.0)]).collect();
    let ep_fits = AtomicUsize::new(0);
    let run = |&(dim, sign): &(usize, f64)| -> (SignDiagnostics, Option<SignedFit>) {
        ep_fits.fetch_add(1, Ordering::Relaxed);
        let base = &placements[dim].1;
        let virt = if sign > 0.0 { base.clone() } else { base.negated() };
        fit_sign(x, y, &plain, virt, config)
    };
    let results: Vec<(SignDiagnostics, Option<SignedFit>)> = if config.parallel {
        tasks.par_iter().map(run).collect()
    } else {
        tasks.iter().map(run).collect()
    };

    let offset = energy_offset(n);
    let accept = plain_energy - config.p1 * offset;
    let reject = plain_energy - config.p2 * offset;
    let mut dimensions = Vec::with_capacity(d);
    let mut fits = Vec::with_capacity(d);
    let mut iter = results.into_iter();
    for (dim, (seed, _)) in placements.iter().enumerate() {
        let (plus, fit_plus) = iter.next().expect("two results per dimension");
        let (minus, fit_minus) = iter.next().expect("two results per dimension");
        let energy_plus = plus.exact_energy.map(|e| e - offset);
        let energy_minus = minus.exact_energy.map(|e| e - offset);
        dimensions.push(DimensionResult {
            dim,
            direction: decide(energy_plus, energy_minus, accept, reject),
            energy_plus,
            energy_minus,
            placement,
            virtual_points: m,
            placement_seed: *seed,
            plus,
            minus,
        });
        fits.push((fit_plus, fit_minus));
    }

    let report = MonotonicityReport {
        directions: dimensions.iter().map(|r| r.direction).collect(),
        p1: config.p1,
        p2: config.p2,
        n,
        plain_energy,
        offset,
        baseline_accept: accept,
        baseline_reject: reject,
        plain_log_params: plain.log_params(),
        dimensions,
        plain_fits: 1,
        ep_fits: ep_fits.into_inner(),
        normalized_input,
    };
    Ok(Detection { report, plain, fits })
}

fn fit_sign(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    plain: &GpModel,
    virt: VirtualDerivativeSet,
    config: &AmdConfig,
) -> (SignDiagnostics, Option<SignedFit>) {
    let fitted = match config.hyper_mode {
        HyperMode::Refit => ep::fit_monotone(x, y, &virt, plain, &config.monotone)
            .map(|f| (f.model, f.state, f.optimizer_iterations, f.optimizer_converged)),
        HyperMode::ReusePlain => {
            ep::ep_fit(plain, x, y, &virt, &config.monotone.ep).map(|s| (plain.clone(), s, 0, true))
        }
    };
    match fitted {
        Ok((model, state, iters, opt_conv)) => {
            let diag = SignDiagnostics {
                exact_energy: Some(state.energy),
                ep_converged: state.converged,
                ep_sweeps: state.sweeps,
                skipped_updates: state.skipped_updates,
                optimizer_iterations: iters,
                optimizer_converged: opt_conv,
                error: None,
            };
            (diag, Some(SignedFit { model, state, virt }))
        }
        Err(e) => {
            log::warn!("monotone fit failed along dimension {}: {e}", virt.dims.first().copied().unwrap_or(0));
            let diag = SignDiagnostics {
                exact_energy: None,
                ep_converged: false,
                ep_sweeps: 0,
                skipped_updates: 0,
                optimizer_iterations: 0,
                optimizer_converged: false,
                error: Some(e.to_string()),
            };
            (diag, None)
        }
    }
}

fn single_dimension_report(x: &DMatrix<f64>, y: &DVector<f64>, dim: usize, config: &AmdConfig) -> Result<MonotonicityReport> {
    if dim >= x.ncols() {
        return Err(Error::invalid(format!("dimension {dim} out of range for {} inputs", x.ncols())));
    }
    amd_detect(x, y, config)
}

fn limit_or_error(report: &MonotonicityReport, dim: usize, sign: f64) -> Result<f64> {
    report.p1_limit(dim, sign).ok_or_else(|| {
        let r = &report.dimensions[dim];
        let diag = if sign > 0.0 { &r.plus } else { &r.minus };
        Error::numerical(diag.error.clone().unwrap_or_else(|| "monotone fit failed".into()))
    })
}

fn check_sign(sign: f64) -> Result<()> {
    if sign == 1.0 || sign == -1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sign must be ±1, got {sign}")))
    }
}

/// Largest `p₁` for which the `sign` assumption on `dim` passes the acceptance test.
pub fn p1_upper_limit(x: &DMatrix<f64>, y: &DVector<f64>, dim: usize, sign: f64, config: &AmdConfig) -> Result<f64> {
    check_sign(sign)?;
    let report = single_dimension_report(x, y, dim, config)?;
    limit_or_error(&report, dim, sign)
}

/// Value `p₂` must exceed for the opposite assumption to be rejected when
/// testing `sign` on `dim`.
pub fn p2_lower_limit(x: &DMatrix<f64>, y: &DVector<f64>, dim: usize, sign: f64, config: &AmdConfig) -> Result<f64> {
    check_sign(sign)?;
    let report = single_dimension_report(x, y, dim, config)?;
    limit_or_error(&report, dim, -sign)
}

/// Detection regions in the `(p₁, p₂)` plane for every dimension.
pub fn robustness_region(x: &DMatrix<f64>, y: &DVector<f64>, config: &AmdConfig) -> Result<(MonotonicityReport, Vec<RegionRecord>)> {
    let report = amd_detect(x, y, config)?;
    let regions = report.regions();
    Ok((report, regions))
}
