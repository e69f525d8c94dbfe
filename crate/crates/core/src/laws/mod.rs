//! Probability laws shared by both queue models.

mod arrival;
mod renewal;
mod service;

pub use arrival::ArrivalMeasure;
pub use renewal::{Pmf, RenewalLaw};
pub use service::ServiceDistribution;
