//! Gaussian-process regression with virtual derivative observations, and
//! automatic detection of monotonic input dimensions.
//!
//! The pieces, bottom up:
//!
//! - [`kernels`]: covariance functions with analytic input derivatives.
//! - [`gp`]: plain GP regression, joint value/derivative covariances and
//!   hyperparameter fitting.
//! - [`ep`]: expectation propagation for probit sign observations of
//!   derivatives, giving monotone GPs and their marginal likelihood.
//! - [`amd`]: the per-dimension detection rule built on the energies of the
//!   plain and monotone models.
//! - [`data`] and [`experiments`]: synthetic data, normalization, table I/O,
//!   predictive evaluation and the repetition units of the studies.
//!
//! ```
//! use monogp::amd::{amd_detect, AmdConfig};
//! use monogp::data::{generate, SyntheticFamily, SyntheticSpec};
//!
//! let data = generate(&SyntheticSpec {
//!     family: SyntheticFamily::Linear { a: 1.0 },
//!     n: 30,
//!     snr: 0.9,
//!     seed: 1,
//! })?;
//! let report = amd_detect(&data.x, &data.y, &AmdConfig::default())?;
//! assert_eq!(report.directions, vec![1]);
//! # Ok::<(), monogp::Error>(())
//! ```

pub mod amd;
pub mod data;
pub mod ep;
mod error;
pub mod experiments;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod optim;
pub mod seeds;
pub mod stats;

pub use amd::{amd_detect, AmdConfig, MonotonicityReport};
pub use ep::{ep_energy, ep_fit, ep_predict, EpConfig, EpState, VirtualDerivativeSet};
pub use error::{Error, Result};
pub use gp::{fit_hyperparameters, GpModel, PredictiveDistribution};
pub use kernels::{KernelFamily, KernelSpec};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/gp.md")]
    mod gp {}
    #[doc = include_str!("../../../book/src/ep.md")]
    mod ep {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
