//! Simulation and numerical verification toolkit for Gaussian approximations
//! of infinite-server queues in heavy traffic.
//!
//! The crate covers two queue models:
//!
//! * **M/GI/∞**: Poisson arrivals with intensity `n·α(dt)`, i.i.d. service
//!   times with law `G`, plus `x_n` customers present at time zero whose
//!   residual service times follow `G̃`.
//! * **GI/GI/∞**: arrivals on the lattice `{i/n}` driven by a stationary
//!   renewal process with integer inter-arrival law `R`.
//!
//! For both it provides seeded samplers ([`pointproc`]), exact queue-length
//! paths ([`paths`]), reduced Palm couplings ([`palm`]), the limiting Gaussian
//! processes ([`gausslim`]), a finite-dimensional Stein solver ([`stein`]),
//! evaluators for the explicit error bounds ([`bounds`]) and a Monte Carlo
//! experiment harness ([`harness`]).
//!
//! Replications are spread over a rayon pool when the default `parallel`
//! feature is enabled; see [`exec`]. Results never depend on the thread count.

pub mod bounds;
pub mod error;
pub mod exec;
pub mod gausslim;
pub mod harness;
pub mod laws;
pub mod numerics;
pub mod palm;
pub mod paths;
pub mod pointproc;
pub mod stein;

pub use error::{Error, Result};
pub use exec::Execution;
