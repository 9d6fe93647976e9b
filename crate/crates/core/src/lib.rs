//! Multiple-try Metropolis samplers.
//!
//! - [`densities`]: targets, Gaussian and mixture proposals, log-space helpers.
//! - [`weights`]: importance, deterministic-mixture and λ-generic weights,
//!   Gumbel-max selection, the normalizing-constant estimator.
//! - [`samplers`]: RW-MTM, variable-N kernel mixtures, I-MTM, chain runner.
//! - [`oracle`]: exact kernels on finite spaces and stationarity checks.
//! - [`experiments`]: sensor localization benchmark and batch runner.

pub mod densities;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod samplers;
pub mod weights;

pub use densities::{Point, Proposal, ProposalDensity, TargetDensity};
pub use error::{Error, Result};
pub use samplers::{run_chain, ChainTrace, Imtm, Sampler, SamplerConfig, SamplingMode, TriesSchedule};
pub use weights::WeightSpec;
