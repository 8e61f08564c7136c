use crate::error::{Error, Result};
use crate::scm::dag::{support_edges, Dag};
use crate::scm::gaussian::{submatrix, CovMatrix, GaussianScm};

/// KL divergence between zero-mean Gaussians:
/// ½[tr(Σ₂⁻¹Σ₁) − d + ln det Σ₂ − ln det Σ₁].
pub fn gaussian_kl(sigma1: &CovMatrix, sigma2: &CovMatrix) -> Result<f64> {
    if sigma1.dim() != sigma2.dim() {
        return Err(Error::Dimension(format!(
            "covariances are {}x{} and {}x{}",
            sigma1.dim(),
            sigma1.dim(),
            sigma2.dim(),
            sigma2.dim()
        )));
    }
    let d = sigma1.dim() as f64;
    let chol2 = sigma2.cholesky();
    let trace = chol2.solve(sigma1.as_matrix()).trace();
    Ok(0.5 * (trace - d + sigma2.log_det() - sigma1.log_det()))
}

/// KL divergence between two SCMs sharing a DAG, evaluated as the sum over
/// nodes of the expected conditional KL given the parents:
/// Σ_j E_{x_pa ~ p}[ KL( p(x_j|x_pa) ‖ q(x_j|x_pa) ) ].
///
/// Both SCM supports must be contained in `g`'s edge set.
pub fn factorized_kl(scm_p: &GaussianScm, scm_q: &GaussianScm, g: &Dag) -> Result<f64> {
    if scm_p.dim() != scm_q.dim() || scm_p.dim() != g.node_count() {
        return Err(Error::Dimension("SCM/DAG dimensions disagree".into()));
    }
    for (scm, name) in [(scm_p, "first"), (scm_q, "second")] {
        for (p, c) in support_edges(scm.weights(), 0.0) {
            if !g.has_edge(p, c) {
                return Err(Error::Precondition(format!(
                    "{name} SCM has edge ({p},{c}) outside the shared DAG"
                )));
            }
        }
    }
    let sigma_p = scm_p.covariance()?;
    let mut total = 0.0;
    for j in 0..g.node_count() {
        let pa = g.parents(j);
        let w1 = scm_p.column_weights(j, &pa);
        let w2 = scm_q.column_weights(j, &pa);
        let s1 = scm_p.noise_vars()[j];
        let s2 = scm_q.noise_vars()[j];
        // E[(Δᵀ x_pa)²] under p, Δ = w1 − w2
        let quad = if pa.is_empty() {
            0.0
        } else {
            let spa = submatrix(sigma_p.as_matrix(), &pa, &pa);
            let delta = &w1 - &w2;
            (delta.transpose() * spa * &delta)[(0, 0)]
        };
        total += 0.5 * (s2 / s1).ln() + (s1 + quad) / (2.0 * s2) - 0.5;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scm_one() -> GaussianScm {
        let b = DMatrix::from_row_slice(3, 3, &[0.0, -0.9, -0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        GaussianScm::with_equal_noise(b, 1.0).unwrap()
    }

    /// Optimal SCM-I adversary for deleting edge 0→1: node 1 loses its
    /// parent (weight 0, noise = marginal variance), node 2 unchanged.
    fn scm_one_adversary() -> GaussianScm {
        let b = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        GaussianScm::new(b, DVector::from_column_slice(&[1.0, 1.81, 1.0])).unwrap()
    }

    #[test]
    fn kl_of_identical_covariances_is_zero() {
        let s = scm_one().covariance().unwrap();
        let kl = gaussian_kl(&s, &s).unwrap();
        assert!(kl.abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_kl_matches_quadrature() {
        let s1 = CovMatrix::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let s2 = CovMatrix::new(DMatrix::from_element(1, 1, 2.0)).unwrap();
        let kl = gaussian_kl(&s1, &s2).unwrap();
        assert_relative_eq!(kl, 0.09657, epsilon = 1e-5);

        // numerical integration of p1 log(p1/p2) over a wide grid
        let (v1, v2) = (1.0f64, 2.0f64);
        let pdf = |x: f64, v: f64| (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let mut acc = 0.0;
        let (lo, hi, n) = (-12.0, 12.0, 200_000);
        let h = (hi - lo) / n as f64;
        for k in 0..=n {
            let x = lo + k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let p1 = pdf(x, v1);
            acc += w * p1 * (p1 / pdf(x, v2)).ln();
        }
        assert_relative_eq!(kl, acc * h, epsilon = 1e-8);
    }

    #[test]
    fn kl_is_asymmetric_on_adversarial_pair() {
        let sp = scm_one().covariance().unwrap();
        let sa = scm_one_adversary().covariance().unwrap();
        let fwd = gaussian_kl(&sp, &sa).unwrap();
        let bwd = gaussian_kl(&sa, &sp).unwrap();
        assert!(fwd > 0.0 && bwd > 0.0);
        assert!((fwd - bwd).abs() > 1e-3);
    }

    #[test]
    fn kl_rejects_dimension_mismatch() {
        let a = CovMatrix::identity(2);
        let b = CovMatrix::identity(3);
        assert!(gaussian_kl(&a, &b).is_err());
    }

    #[test]
    fn factorized_kl_zero_for_identical_scms() {
        let scm = scm_one();
        let g = scm.dag(0.0);
        assert!(factorized_kl(&scm, &scm, &g).unwrap().abs() < 1e-14);
    }

    #[test]
    fn factorized_kl_of_adversarial_pair_matches_joint() {
        let p = scm_one();
        let a = scm_one_adversary();
        let g = p.dag(0.0);
        let fact = factorized_kl(&p, &a, &g).unwrap();
        let joint = gaussian_kl(&p.covariance().unwrap(), &a.covariance().unwrap()).unwrap();
        assert!((fact - joint).abs() < 1e-8, "{fact} vs {joint}");
        // frozen value: ½ ln 1.81 + (1 + 0.81)/(2·1.81) − ½
        assert_relative_eq!(fact, 0.296_663_42, epsilon = 1e-6);
    }

    pub(crate) fn random_shared_dag_pair(d: usize, seed: u64) -> (GaussianScm, GaussianScm, Dag) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for p in 0..d {
            for c in (p + 1)..d {
                if rng.random::<f64>() < 0.5 {
                    edges.push((p, c));
                }
            }
        }
        let g = Dag::new(d, edges).unwrap();
        let mut make = |rng: &mut ChaCha8Rng| {
            let mut b = DMatrix::zeros(d, d);
            for &(p, c) in g.edges() {
                b[(p, c)] = rng.random_range(-1.5..1.5);
            }
            let vars = DVector::from_iterator(d, (0..d).map(|_| rng.random_range(0.3..2.0)));
            GaussianScm::new(b, vars).unwrap()
        };
        let p = make(&mut rng);
        let q = make(&mut rng);
        (p, q, g)
    }

    #[test]
    fn factorized_kl_matches_joint_on_random_pairs() {
        for seed in 0..25u64 {
            let d = 2 + (seed % 5) as usize; // 2..=6
            let (p, q, g) = random_shared_dag_pair(d, seed);
            let fact = factorized_kl(&p, &q, &g).unwrap();
            let joint = gaussian_kl(&p.covariance().unwrap(), &q.covariance().unwrap()).unwrap();
            assert!(
                (fact - joint).abs() < 1e-8,
                "seed {seed}: {fact} vs {joint}"
            );
            assert!(fact >= -1e-12);
        }
    }

    #[test]
    fn factorized_kl_rejects_support_violation() {
        let p = scm_one();
        let g = Dag::new(3, vec![(0, 1)]).unwrap(); // missing 0→2
        assert!(factorized_kl(&p, &p, &g).is_err());
    }

    #[test]
    fn kl_nonnegative_on_random_pd_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..50 {
            let d = rng.random_range(1..6usize);
            let mut make = |rng: &mut ChaCha8Rng| {
                let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
                CovMatrix::new(&a * a.transpose() + DMatrix::identity(d, d) * 0.5).unwrap()
            };
            let s1 = make(&mut rng);
            let s2 = make(&mut rng);
            assert!(gaussian_kl(&s1, &s2).unwrap() >= 0.0);
            assert!(gaussian_kl(&s1, &s1).unwrap().abs() < 1e-12);
        }
    }
}
