//! Monte Carlo experiment engine: expectation gaps, empirical covariances,
//! modulus-of-continuity tails and rate fits, driven by a TOML config.

mod config;
mod estimate;
mod model;
mod rate;
mod run;

pub use config::{
    ArrivalSpec, BoundsSpec, ExperimentConfig, GridRange, GridSpec, ModelKind, RenewalSpec,
    ServiceSpec, SteinSpec, TestFunctionSpec, TolerancePolicy, XnRule,
};
pub use estimate::{
    empirical_covariance, estimate_expectation_gap, modulus_tail, tail_is_monotone, write_tail_csv,
    CovarianceCheck, GapEstimate, ModulusTailRow,
};
pub use model::QueueModel;
pub use rate::{fit_rate, RateFit, RateVerdict};
pub use run::{run, Command, RunSummary};
