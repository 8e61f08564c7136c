//! Linear Gaussian SCM representation, sampling, covariance algebra,
//! Gaussian conditionals, and KL divergences (joint and causally factorized).

mod dag;
mod gaussian;
mod kl;

pub use dag::{is_dag, support_edges, Dag};
pub use gaussian::{
    conditional_blocks, conditional_gaussian, submatrix, ConditionalGaussian, CovMatrix,
    GaussianScm, SYMMETRY_TOL,
};
pub use kl::{factorized_kl, gaussian_kl};
