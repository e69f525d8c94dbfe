//! Stein's method for finite-dimensional projections `g(w) = F(w(t₁), …, w(t_k))`:
//! the solution `f_g` of `A f = g − E g(Z)`, its derivatives, and residual
//! checks.

mod solution;
mod testfn;

pub use solution::{
    characterizing_operator, derivative_bound_check, stein_solution, DerivativeBoundReport,
    GaussianRule, SteinResidual, SteinSolution,
};
pub use testfn::{FiniteDimTestFunction, Form};
