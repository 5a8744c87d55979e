//! Covariance functions with the cross-derivatives needed for derivative observations.
//!
//! Besides `k(x1, x2)` every kernel provides `∂k/∂x1_g` and `∂²k/∂x1_g ∂x2_h`,
//! which are the covariances `cov(∂f(x1)/∂x_g, f(x2))` and
//! `cov(∂f(x1)/∂x_g, ∂f(x2)/∂x_h)` of a differentiable Gaussian process.
//! Hyperparameters are exposed in log space; [`KernelSpec::cov_with_grad`]
//! returns the gradient of any covariance entry with respect to them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    SquaredExponential,
    Linear,
    /// Squared exponential plus linear.
    SeLinear,
}

impl KernelFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "squared-exponential" | "rbf" => Ok(KernelFamily::SquaredExponential),
            "linear" | "lin" => Ok(KernelFamily::Linear),
            "se-linear" | "se+linear" | "sum" => Ok(KernelFamily::SeLinear),
            other => Err(Error::invalid(format!("unknown kernel family '{other}'"))),
        }
    }

    /// Number of log-hyperparameters for `dim` input dimensions.
    pub fn n_params(self, dim: usize) -> usize {
        match self {
            KernelFamily::SquaredExponential => 1 + dim,
            KernelFamily::Linear => dim,
            KernelFamily::SeLinear => 1 + 2 * dim,
        }
    }

    fn has_se(self) -> bool {
        matches!(self, KernelFamily::SquaredExponential | KernelFamily::SeLinear)
    }

    fn has_linear(self) -> bool {
        matches!(self, KernelFamily::Linear | KernelFamily::SeLinear)
    }
}

/// One latent quantity of the process: a function value or a partial derivative.
#[derive(Debug, Clone, Copy)]
pub enum Observation<'a> {
    Value(&'a [f64]),
    Derivative { point: &'a [f64], dim: usize },
}

impl<'a> Observation<'a> {
    pub fn point(&self) -> &'a [f64] {
        match *self {
            Observation::Value(p) => p,
            Observation::Derivative { point, .. } => point,
        }
    }
}

/// Covariance function and its hyperparameters.
///
/// Squared exponential (ARD): `σ_f² exp(-½ Σ_d (x1_d - x2_d)² / ℓ_d²)`.
/// Linear: `Σ_d c_d x1_d x2_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    signal_variance: f64,
    lengthscales: Vec<f64>,
    linear_variances: Vec<f64>,
}

impl KernelSpec {
    pub fn squared_exponential(signal_variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        Self::new(
            KernelFamily::SquaredExponential,
            signal_variance,
            lengthscales,
            Vec::new(),
        )
    }

    pub fn linear(linear_variances: Vec<f64>) -> Result<Self> {
        Self::new(KernelFamily::Linear, 0.0, Vec::new(), linear_variances)
    }

    pub fn se_linear(
        signal_variance: f64,
        lengthscales: Vec<f64>,
        linear_variances: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            KernelFamily::SeLinear,
            signal_variance,
            lengthscales,
            linear_variances,
        )
    }

    fn new(
        family: KernelFamily,
        signal_variance: f64,
        lengthscales: Vec<f64>,
        linear_variances: Vec<f64>,
    ) -> Result<Self> {
        if family.has_se() {
            if !(signal_variance > 0.0 && signal_variance.is_finite()) {
                return Err(Error::invalid(format!(
                    "signal variance must be positive, got {signal_variance}"
                )));
            }
            if lengthscales.is_empty() {
                return Err(Error::invalid("at least one lengthscale is required"));
            }
            if let Some(l) = lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
                return Err(Error::invalid(format!("lengthscale must be positive, got {l}")));
            }
        }
        if family.has_linear() {
            if linear_variances.is_empty() {
                return Err(Error::invalid("at least one linear variance is required"));
            }
            if let Some(c) = linear_variances.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
                return Err(Error::invalid(format!(
                    "linear variance must be non-negative, got {c}"
                )));
            }
        }
        if family == KernelFamily::SeLinear && lengthscales.len() != linear_variances.len() {
            return Err(Error::invalid(format!(
                "{} lengthscales but {} linear variances",
                lengthscales.len(),
                linear_variances.len()
            )));
        }
        Ok(KernelSpec {
            family,
            signal_variance,
            lengthscales,
            linear_variances,
        })
    }

    /// Default starting point on normalized data.
    pub fn default_for(family: KernelFamily, dim: usize) -> Self {
        let kernel = match family {
            KernelFamily::SquaredExponential => {
                Self::squared_exponential(1.0, vec![1.0; dim])
            }
            KernelFamily::Linear => Self::linear(vec![0.5; dim]),
            KernelFamily::SeLinear => Self::se_linear(1.0, vec![1.0; dim], vec![0.5; dim]),
        };
        kernel.expect("default hyperparameters are valid")
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        if self.family.has_se() {
            self.lengthscales.len()
        } else {
            self.linear_variances.len()
        }
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn linear_variances(&self) -> &[f64] {
        &self.linear_variances
    }

    /// Hyperparameters in log space: `[log σ_f², log ℓ_1.., log c_1..]`,
    /// omitting the blocks the family does not have.
    pub fn log_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.family.n_params(self.dim()));
        if self.family.has_se() {
            out.push(self.signal_variance.ln());
            out.extend(self.lengthscales.iter().map(|l| l.ln()));
        }
        if self.family.has_linear() {
            out.extend(self.linear_variances.iter().map(|c| c.ln()));
        }
        out
    }

    pub fn from_log_params(family: KernelFamily, dim: usize, params: &[f64]) -> Result<Self> {
        if params.len() != family.n_params(dim) {
            return Err(Error::invalid(format!(
                "expected {} kernel parameters, got {}",
                family.n_params(dim),
                params.len()
            )));
        }
        let mut it = params.iter().map(|p| p.exp());
        let (sv, ls) = if family.has_se() {
            let sv = it.next().unwrap_or(1.0);
            (sv, it.by_ref().take(dim).collect())
        } else {
            (0.0, Vec::new())
        };
        let lin = if family.has_linear() {
            it.take(dim).collect()
        } else {
            Vec::new()
        };
        Self::new(family, sv, ls, lin)
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params(self.dim())
    }

    fn check_point(&self, x: &[f64], name: &str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "{name} has dimension {} but kernel expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_index(&self, g: usize) -> Result<()> {
        if g >= self.dim() {
            return Err(Error::invalid(format!(
                "dimension index {g} out of range for {} inputs",
                self.dim()
            )));
        }
        Ok(())
    }

    /// `k(x1, x2)`.
    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        self.check_point(x1, "x1")?;
        self.check_point(x2, "x2")?;
        Ok(self.cov(Observation::Value(x1), Observation::Value(x2)))
    }

    /// `∂k/∂x1_g` at `(x1, x2)`.
    pub fn eval_dx1(&self, x1: &[f64], x2: &[f64], g: usize) -> Result<f64> {
        self.check_point(x1, "x1")?;
        self.check_point(x2, "x2")?;
        self.check_index(g)?;
        Ok(self.cov(
            Observation::Derivative { point: x1, dim: g },
            Observation::Value(x2),
        ))
    }

    /// `∂²k/∂x1_g ∂x2_h` at `(x1, x2)`.
    pub fn eval_dx1_dx2(&self, x1: &[f64], x2: &[f64], g: usize, h: usize) -> Result<f64> {
        self.check_point(x1, "x1")?;
        self.check_point(x2, "x2")?;
        self.check_index(g)?;
        self.check_index(h)?;
        Ok(self.cov(
            Observation::Derivative { point: x1, dim: g },
            Observation::Derivative { point: x2, dim: h },
        ))
    }

    /// Covariance between two latent quantities. Dimensions are not checked.
    pub fn cov(&self, a: Observation<'_>, b: Observation<'_>) -> f64 {
        self.cov_impl(a, b, None)
    }

    /// Covariance plus its gradient with respect to [`log_params`](Self::log_params),
    /// written into `grad` (length [`n_params`](Self::n_params)).
    pub fn cov_with_grad(&self, a: Observation<'_>, b: Observation<'_>, grad: &mut [f64]) -> f64 {
        self.cov_impl(a, b, Some(grad))
    }

    fn cov_impl(&self, a: Observation<'_>, b: Observation<'_>, mut grad: Option<&mut [f64]>) -> f64 {
        let mut total = 0.0;
        let mut offset = 0;
        if self.family.has_se() {
            let n = 1 + self.lengthscales.len();
            let g = grad.as_deref_mut().map(|g| &mut g[..n]);
            total += self.se_cov(a, b, g);
            offset = n;
        }
        if self.family.has_linear() {
            let g = grad.as_deref_mut().map(|g| &mut g[offset..]);
            total += self.linear_cov(a, b, g);
        }
        total
    }

    fn se_cov(&self, a: Observation<'_>, b: Observation<'_>, grad: Option<&mut [f64]>) -> f64 {
        let x1 = a.point();
        let x2 = b.point();
        let mut quad = 0.0;
        for ((p, q), l) in x1.iter().zip(x2).zip(&self.lengthscales) {
            let d = (p - q) / l;
            quad += d * d;
        }
        let k = self.signal_variance * (-0.5 * quad).exp();
        let inv_l2 = |d: usize| 1.0 / (self.lengthscales[d] * self.lengthscales[d]);
        let diff = |d: usize| x1[d] - x2[d];
        // u_e = (x1_e - x2_e)² / ℓ_e², the derivative of -½ quad w.r.t. log ℓ_e.
        let u = |e: usize| diff(e) * diff(e) * inv_l2(e);

        match (a, b) {
            (Observation::Value(_), Observation::Value(_)) => {
                if let Some(grad) = grad {
                    grad[0] = k;
                    for e in 0..self.lengthscales.len() {
                        grad[1 + e] = k * u(e);
                    }
                }
                k
            }
            (Observation::Derivative { dim: g, .. }, Observation::Value(_))
            | (Observation::Value(_), Observation::Derivative { dim: g, .. }) => {
                // ∂k/∂x1_g = -k Δ_g / ℓ_g², ∂k/∂x2_g = +k Δ_g / ℓ_g²
                let sign = if matches!(a, Observation::Derivative { .. }) {
                    -1.0
                } else {
                    1.0
                };
                let v = sign * k * diff(g) * inv_l2(g);
                if let Some(grad) = grad {
                    grad[0] = v;
                    for e in 0..self.lengthscales.len() {
                        let delta = if e == g { 2.0 } else { 0.0 };
                        grad[1 + e] = v * (u(e) - delta);
                    }
                }
                v
            }
            (Observation::Derivative { dim: g, .. }, Observation::Derivative { dim: h, .. }) => {
                let (lg, lh) = (inv_l2(g), inv_l2(h));
                let cross = diff(g) * diff(h) * lg * lh;
                let same = if g == h { lg } else { 0.0 };
                let v = k * (same - cross);
                if let Some(grad) = grad {
                    grad[0] = v;
                    for e in 0..self.lengthscales.len() {
                        let mut dinner = 0.0;
                        if g == h && e == g {
                            dinner -= 2.0 * lg;
                        }
                        let hits = (e == g) as u8 + (e == h) as u8;
                        dinner += 2.0 * cross * hits as f64;
                        grad[1 + e] = u(e) * v + k * dinner;
                    }
                }
                v
            }
        }
    }

    fn linear_cov(&self, a: Observation<'_>, b: Observation<'_>, grad: Option<&mut [f64]>) -> f64 {
        let c = &self.linear_variances;
        match (a, b) {
            (Observation::Value(x1), Observation::Value(x2)) => {
                let mut v = 0.0;
                if let Some(grad) = grad {
                    for d in 0..c.len() {
                        let t = c[d] * (x1[d] * x2[d]);
                        grad[d] = t;
                        v += t;
                    }
                } else {
                    for d in 0..c.len() {
                        v += c[d] * (x1[d] * x2[d]);
                    }
                }
                v
            }
            (Observation::Derivative { dim: g, .. }, Observation::Value(other))
            | (Observation::Value(other), Observation::Derivative { dim: g, .. }) => {
                let v = c[g] * other[g];
                if let Some(grad) = grad {
                    grad.iter_mut().for_each(|x| *x = 0.0);
                    grad[g] = v;
                }
                v
            }
            (Observation::Derivative { dim: g, .. }, Observation::Derivative { dim: h, .. }) => {
                let v = if g == h { c[g] } else { 0.0 };
                if let Some(grad) = grad {
                    grad.iter_mut().for_each(|x| *x = 0.0);
                    grad[g] = v;
                }
                v
            }
        }
    }
}
