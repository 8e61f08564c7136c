use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scm::{submatrix, CovMatrix, Dag, GaussianScm};

/// The Gaussian SCM Markov with respect to `g_alpha` that is closest in KL
/// divergence to N(0, Σ_p): column j regresses X_j on its `g_alpha` parents
/// under Σ_p, and the noise variance is the residual (Schur complement).
pub fn optimal_adversarial_scm(sigma_p: &CovMatrix, g_alpha: &Dag) -> Result<GaussianScm> {
    let d = sigma_p.dim();
    if g_alpha.node_count() != d {
        return Err(Error::Dimension(format!(
            "DAG has {} nodes for a {d}-dimensional covariance",
            g_alpha.node_count()
        )));
    }
    let s = sigma_p.as_matrix();
    let mut b = DMatrix::zeros(d, d);
    let mut noise = DVector::zeros(d);
    for j in 0..d {
        let pa = g_alpha.parents(j);
        if pa.is_empty() {
            noise[j] = s[(j, j)];
            continue;
        }
        let s_pp = submatrix(s, &pa, &pa);
        let s_pj = submatrix(s, &pa, &[j]);
        let chol = s_pp.cholesky().ok_or_else(|| {
            Error::Factorization(format!("parent block of node {j} is singular"))
        })?;
        let w = chol.solve(&s_pj);
        for (i, &p) in pa.iter().enumerate() {
            b[(p, j)] = w[(i, 0)];
        }
        noise[j] = s[(j, j)] - (s_pj.transpose() * &w)[(0, 0)];
        if noise[j] <= 0.0 {
            return Err(Error::Factorization(format!(
                "nonpositive residual variance at node {j}"
            )));
        }
    }
    GaussianScm::new(b, noise)
}

/// The experimental adversarial SCM that keeps every structural equation of
/// the true SCM but overrides the weight of one edge (zero deletes it).
pub fn edge_override_scm(
    scm_p: &GaussianScm,
    parent: usize,
    child: usize,
    weight: f64,
) -> Result<GaussianScm> {
    let d = scm_p.dim();
    if parent >= d || child >= d {
        return Err(Error::Dimension(format!(
            "edge ({parent},{child}) out of range"
        )));
    }
    let mut b = scm_p.weights().clone();
    b[(parent, child)] = weight;
    GaussianScm::new(b, scm_p.noise_vars().clone())
}
