//! Limiting Gaussian processes: covariance kernels, grid samplers and
//! Karhunen–Loève decompositions.

mod kernel;
mod kl;
mod sampler;

pub use kernel::{decompose_mgi, kernel_gigi, kernel_mgi, CovarianceKernel};
pub use kl::{kl_decompose, KlDecomposition};
pub use sampler::{sample_paths, GaussianPathSampler, MAX_GRID};
