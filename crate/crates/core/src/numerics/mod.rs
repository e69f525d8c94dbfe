//! Quadrature rules and small statistics helpers shared by the modules.

pub mod quadrature;
pub mod stats;

pub use quadrature::{
    gauss_hermite, gauss_legendre, gauss_legendre_unit, integrate, integrate_with_breaks,
};
pub use stats::{batch_means, mean_se, ols, wilson_interval, Estimate, MomentMatrix};
