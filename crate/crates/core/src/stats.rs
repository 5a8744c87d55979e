//! Standard-normal helpers that stay accurate deep in the lower tail.
//!
//! EP with a steep probit likelihood routinely evaluates `Φ(z)` at `z < -30`
//! when the data contradict the sign constraint, where `Φ` underflows and the
//! naive `1 - r(z + r)` variance factor cancels catastrophically.

use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Below this point the tail quantities come from the Mills-ratio continued fraction.
pub const TAIL_SWITCH: f64 = -5.0;
const CF_DEPTH: usize = 300;

/// log of the standard normal density.
pub fn log_normal_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * LN_2PI
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `log Φ(z)`, finite for every finite `z`.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z < TAIL_SWITCH {
        let t = MillsTail::new(-z);
        log_normal_pdf(z) - (-z + t.t).ln()
    } else if z > 5.0 {
        (-0.5 * erfc(z / SQRT_2)).ln_1p()
    } else {
        normal_cdf(z).ln()
    }
}

/// Moments of the probit-tilted Gaussian `N(f | m, v) Φ(s f / steepness)`.
#[derive(Debug, Clone, Copy)]
pub struct TiltedMoments {
    pub log_z: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Tails of the continued fraction `R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))`
/// with `t = 1/(x + 2/(x + ...))` and `u = 2/(x + 3/(x + ...))`.
struct MillsTail {
    t: f64,
    u: f64,
}

impl MillsTail {
    fn new(x: f64) -> Self {
        let mut tail = 0.0;
        let mut u = 0.0;
        for k in (1..=CF_DEPTH).rev() {
            if k == 1 {
                u = tail;
            }
            tail = k as f64 / (x + tail);
        }
        MillsTail { t: tail, u }
    }
}

/// Cavity `N(mean, var)` times the probit likelihood `Φ(sign·f/steepness)`.
pub fn probit_tilted(sign: f64, mean: f64, var: f64, steepness: f64) -> TiltedMoments {
    let scale = (steepness * steepness + var).sqrt();
    let z = sign * mean / scale;
    // shrink = var / (steepness² + var) ≤ 1
    let shrink = var / (scale * scale);
    let (log_z, ratio, one_minus_g) = if z < TAIL_SWITCH {
        let x = -z;
        let tail = MillsTail::new(x);
        let ratio = x + tail.t;
        let log_z = log_normal_pdf(z) - ratio.ln();
        (log_z, ratio, tail.t * (tail.u - tail.t))
    } else {
        let log_z = log_normal_cdf(z);
        let ratio = (log_normal_pdf(z) - log_z).exp();
        (log_z, ratio, 1.0 - ratio * (z + ratio))
    };
    let g = 1.0 - one_minus_g;
    let mean_hat = mean + sign * var * ratio / scale;
    let variance = var * (one_minus_g + (1.0 - shrink) * g);
    TiltedMoments {
        log_z,
        mean: mean_hat,
        variance,
    }
}

/// Log density of `N(x | mean, var)`.
pub fn log_gaussian(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / var + (2.0 * PI * var).ln())
}
