//! Default Bayes factors and posterior distributions for testing the
//! (in)equality of the variances of K >= 1 Gaussian populations, computed
//! from summary statistics (per-group sample size and sum of squared
//! deviations).
//!
//! The precision mixture weights rho_k = tau_k / sum(tau) live on the
//! simplex and carry a symmetric Dirichlet (Beta for K = 2) prior with
//! concentration alpha. Point, directional, interval, equality, and
//! order-constrained hypotheses about the weights are compared through
//! marginal likelihoods: closed forms where they exist (K <= 2 and the
//! all-equal model), seeded MCMC plus bridge sampling and the encompassing
//! prior construction otherwise.
//!
//! ```
//! use bfvar::two_sample::log_bf10;
//! use bfvar::{GroupStats, PriorSpec, SdConvention};
//!
//! let g1 = GroupStats::from_sd(969, 3.95, SdConvention::Unbiased)?;
//! let g2 = GroupStats::from_sd(716, 4.47, SdConvention::Unbiased)?;
//! let prior = PriorSpec::symmetric(4.5)?;
//! let bf = log_bf10(&g1, &g2, &prior)?;
//! assert!(bf.log_bf10.exp() > 10.0);
//! # Ok::<(), bfvar::Error>(())
//! ```

pub mod elicitation;
pub mod error;
pub mod hypotheses;
pub mod kgroups;
pub mod one_sample;
pub mod specfun;
pub mod two_sample;
pub mod verify;

pub use error::{Error, Result};
pub use hypotheses::{GroupStats, HypothesisSpec, SdConvention};
pub use two_sample::{BayesFactorResult, DeltaHypothesis, DeltaInterval, Method, PriorSpec};
