use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::adversary::mechanism::MissingnessMechanism;
use crate::adversary::pattern::ObservationPattern;
use crate::error::{Error, Result};
use crate::scm::{CovMatrix, GaussianScm};

/// Largest masked-variable set for which the 2^|V| pattern support is
/// enumerated.
pub const MAX_LOCAL_VARS: usize = 20;

/// Largest dimension for which generalized rejection sampling enumerates all
/// 2^d patterns.
pub const MAX_GENERALIZED_DIM: usize = 12;

/// Density ratio N(x; 0, Σ_α) / N(x; 0, Σ_p) on a marginal of a variable
/// subset, with both factorizations cached.
#[derive(Debug, Clone)]
pub struct MarginalRatio {
    idx: Vec<usize>,
    prec_p: DMatrix<f64>,
    prec_a: DMatrix<f64>,
    /// ½(ln det Σ_p − ln det Σ_α)
    log_c: f64,
}

impl MarginalRatio {
    pub fn new(scm_p: &GaussianScm, scm_alpha: &GaussianScm, idx: &[usize]) -> Result<Self> {
        let sp = scm_p.covariance()?.marginal(idx)?;
        let sa = scm_alpha.covariance()?.marginal(idx)?;
        Self::from_marginals(&sp, &sa, idx)
    }

    pub fn from_marginals(sigma_p: &CovMatrix, sigma_a: &CovMatrix, idx: &[usize]) -> Result<Self> {
        if sigma_p.dim() != idx.len() || sigma_a.dim() != idx.len() {
            return Err(Error::Dimension(
                "marginal covariance dimension does not match index set".into(),
            ));
        }
        Ok(MarginalRatio {
            idx: idx.to_vec(),
            prec_p: sigma_p.inverse(),
            prec_a: sigma_a.inverse(),
            log_c: 0.5 * (sigma_p.log_det() - sigma_a.log_det()),
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    /// log Λ(x) for the sub-vector `x_v` (already restricted to the subset).
    pub fn log_ratio(&self, x_v: &DVector<f64>) -> f64 {
        let qa = (self.prec_a.clone() * x_v).dot(x_v);
        let qp = (self.prec_p.clone() * x_v).dot(x_v);
        self.log_c - 0.5 * qa + 0.5 * qp
    }

    /// Λ(x) = N(x; 0, Σ_α)/N(x; 0, Σ_p); strictly positive.
    pub fn ratio(&self, x_v: &DVector<f64>) -> f64 {
        self.log_ratio(x_v).exp()
    }

    /// Restriction of a full sample to the subset.
    pub fn restrict(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.idx.len(), self.idx.iter().map(|&j| x[j]))
    }

    /// Analytic supremum of the ratio: finite iff Σ_α⁻¹ ⪰ Σ_p⁻¹ on the
    /// subset, with value √(det Σ_p / det Σ_α) attained at x = 0.
    pub fn analytic_max(&self) -> LambdaBound {
        let diff = &self.prec_a - &self.prec_p;
        let eig = nalgebra::SymmetricEigen::new(diff.clone());
        let scale = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, &e| a.max(e.abs()))
            .max(1.0);
        if eig.eigenvalues.iter().all(|&e| e >= -1e-12 * scale) {
            LambdaBound::Finite(self.log_c.exp())
        } else {
            LambdaBound::Unbounded
        }
    }

    /// Maximum ratio over the rows of a calibration matrix (full samples).
    pub fn empirical_max(&self, calibration: &DMatrix<f64>) -> Result<f64> {
        if calibration.nrows() == 0 {
            return Err(Error::Precondition("empty calibration sample".into()));
        }
        let mut best = f64::NEG_INFINITY;
        for i in 0..calibration.nrows() {
            let x_v = DVector::from_iterator(
                self.idx.len(),
                self.idx.iter().map(|&j| calibration[(i, j)]),
            );
            best = best.max(self.log_ratio(&x_v));
        }
        Ok(best.exp())
    }
}

/// Supremum of a Gaussian density ratio: either a finite value or an
/// explicit unbounded report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaBound {
    Finite(f64),
    Unbounded,
}

impl LambdaBound {
    pub fn finite(&self) -> Option<f64> {
        match self {
            LambdaBound::Finite(v) => Some(*v),
            LambdaBound::Unbounded => None,
        }
    }
}

/// How to determine the ratio bound Λ.
pub enum LambdaMethod<'a> {
    Analytic,
    Empirical(&'a DMatrix<f64>),
    Fixed(f64),
}

/// Supremum of the adversarial-to-true density ratio on the subset `v`.
/// The analytic method reports `Unbounded` (not an error) when the ratio has
/// no finite maximum; the empirical method maximizes over calibration rows.
pub fn lambda_max(
    scm_p: &GaussianScm,
    scm_alpha: &GaussianScm,
    v: &[usize],
    method: LambdaMethod<'_>,
) -> Result<LambdaBound> {
    let ratio = MarginalRatio::new(scm_p, scm_alpha, v)?;
    match method {
        LambdaMethod::Analytic => Ok(ratio.analytic_max()),
        LambdaMethod::Empirical(calibration) => {
            Ok(LambdaBound::Finite(ratio.empirical_max(calibration)?))
        }
        LambdaMethod::Fixed(l) => {
            if l <= 0.0 {
                return Err(Error::Precondition("fixed lambda must be positive".into()));
            }
            Ok(LambdaBound::Finite(l))
        }
    }
}

fn validate_v(d: usize, v: &[usize]) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Err(Error::Precondition("masked set V is empty".into()));
    }
    if v.len() > MAX_LOCAL_VARS {
        return Err(Error::Capability(format!(
            "|V| = {} exceeds the {MAX_LOCAL_VARS}-variable support limit",
            v.len()
        )));
    }
    let mut v = v.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&max) = v.last() {
        if max >= d {
            return Err(Error::Dimension(format!("V index {max} out of range")));
        }
    }
    Ok(v)
}

/// Localized rejection sampling: masks only variables in `v`. Patterns that
/// keep at least one variable of `v` get probability Λ(x_V)/((2^|V|−1)·Λ)
/// each; dropping all of `v` gets the remainder 1 − Λ(x_V)/Λ.
pub struct LocalizedRsMechanism {
    d: usize,
    v: Vec<usize>,
    ratio: MarginalRatio,
    lambda: f64,
    support: Vec<ObservationPattern>,
    clip_count: AtomicU64,
}

impl LocalizedRsMechanism {
    pub fn new(
        scm_p: &GaussianScm,
        scm_alpha: &GaussianScm,
        v: &[usize],
        lambda: LambdaBound,
    ) -> Result<Self> {
        let d = scm_p.dim();
        if scm_alpha.dim() != d {
            return Err(Error::Dimension("SCM dimensions disagree".into()));
        }
        let v = validate_v(d, v)?;
        let lambda = lambda
            .finite()
            .ok_or_else(|| Error::Precondition("localized RS needs a finite lambda".into()))?;
        if lambda < 1.0 - 1e-12 {
            return Err(Error::Precondition(format!(
                "lambda {lambda} below 1 cannot dominate the ratio in expectation"
            )));
        }
        let ratio = MarginalRatio::new(scm_p, scm_alpha, &v)?;
        let support = (0..(1usize << v.len()))
            .map(|k| ObservationPattern::from_v_index(d, &v, k))
            .collect();
        Ok(LocalizedRsMechanism {
            d,
            v,
            ratio,
            lambda,
            support,
            clip_count: AtomicU64::new(0),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn v(&self) -> &[usize] {
        &self.v
    }

    pub fn ratio(&self) -> &MarginalRatio {
        &self.ratio
    }

    /// Number of evaluations whose ratio exceeded Λ and was clipped.
    pub fn clip_count(&self) -> u64 {
        self.clip_count.load(Ordering::Relaxed)
    }

    fn accept_prob(&self, x: &DVector<f64>) -> f64 {
        let r = self.ratio.ratio(&self.ratio.restrict(x));
        if r > self.lambda {
            self.clip_count.fetch_add(1, Ordering::Relaxed);
            1.0
        } else {
            r / self.lambda
        }
    }
}

impl MissingnessMechanism for LocalizedRsMechanism {
    fn dim(&self) -> usize {
        self.d
    }

    fn support(&self) -> &[ObservationPattern] {
        &self.support
    }

    fn pattern_probs(&self, x: &DVector<f64>) -> DVector<f64> {
        let accept = self.accept_prob(x);
        let m = self.support.len();
        let each = accept / (m - 1) as f64;
        let mut probs = DVector::from_element(m, each);
        probs[0] = 1.0 - accept;
        probs
    }

    fn closed_form_marginals(&self) -> Option<DVector<f64>> {
        let m = self.support.len();
        let mut probs = DVector::from_element(m, 1.0 / ((m - 1) as f64 * self.lambda));
        probs[0] = 1.0 - 1.0 / self.lambda;
        Some(probs)
    }
}

/// All-or-none variant of localized rejection sampling: an accepted sample is
/// fully observed, a rejected one loses all of `v`.
pub struct AllOrNoneRsMechanism {
    inner: LocalizedRsMechanism,
    support: Vec<ObservationPattern>,
}

impl AllOrNoneRsMechanism {
    pub fn new(
        scm_p: &GaussianScm,
        scm_alpha: &GaussianScm,
        v: &[usize],
        lambda: LambdaBound,
    ) -> Result<Self> {
        let inner = LocalizedRsMechanism::new(scm_p, scm_alpha, v, lambda)?;
        let d = inner.d;
        let support = vec![
            ObservationPattern::from_v_index(d, &inner.v, 0),
            ObservationPattern::all_observed(d),
        ];
        Ok(AllOrNoneRsMechanism { inner, support })
    }

    pub fn lambda(&self) -> f64 {
        self.inner.lambda
    }

    pub fn v(&self) -> &[usize] {
        &self.inner.v
    }

    pub fn clip_count(&self) -> u64 {
        self.inner.clip_count()
    }
}

impl MissingnessMechanism for AllOrNoneRsMechanism {
    fn dim(&self) -> usize {
        self.inner.d
    }

    fn support(&self) -> &[ObservationPattern] {
        &self.support
    }

    fn pattern_probs(&self, x: &DVector<f64>) -> DVector<f64> {
        let accept = self.inner.accept_prob(x);
        DVector::from_column_slice(&[1.0 - accept, accept])
    }

    fn closed_form_marginals(&self) -> Option<DVector<f64>> {
        let l = self.inner.lambda;
        Some(DVector::from_column_slice(&[1.0 - 1.0 / l, 1.0 / l]))
    }
}

/// Per-pattern weights for generalized rejection sampling.
pub enum PiSpec {
    /// π_r = 1/(2^d − 1), always admissible.
    Uniform,
    /// Custom weights over the nonzero patterns, indexed by bitmask − 1.
    Custom(Vec<f64>),
}

/// Generalized rejection sampling over the full pattern lattice: pattern r≠0
/// gets π_r Λ_r(x_o)/Λ*_r, the all-masked pattern absorbs the remainder.
pub struct GeneralizedRsMechanism {
    d: usize,
    support: Vec<ObservationPattern>,
    pi: Vec<f64>,
    lambda_star: Vec<f64>,
    ratios: Vec<MarginalRatio>,
    clamp_count: AtomicU64,
}

impl GeneralizedRsMechanism {
    /// `calibration` is required whenever some pattern's analytic ratio
    /// bound is unbounded, and for validating custom weights.
    pub fn new(
        scm_p: &GaussianScm,
        scm_alpha: &GaussianScm,
        pi: PiSpec,
        calibration: Option<&DMatrix<f64>>,
    ) -> Result<Self> {
        let d = scm_p.dim();
        if scm_alpha.dim() != d {
            return Err(Error::Dimension("SCM dimensions disagree".into()));
        }
        if d > MAX_GENERALIZED_DIM {
            return Err(Error::Capability(format!(
                "d = {d} exceeds the {MAX_GENERALIZED_DIM}-variable full-support limit"
            )));
        }
        let n_patterns = 1usize << d;
        let support: Vec<ObservationPattern> = (0..n_patterns)
            .map(|k| {
                ObservationPattern::new((0..d).map(|j| (k >> j) & 1 == 1).collect())
            })
            .collect();
        let pi = match pi {
            PiSpec::Uniform => vec![1.0 / (n_patterns - 1) as f64; n_patterns - 1],
            PiSpec::Custom(w) => {
                if w.len() != n_patterns - 1 {
                    return Err(Error::Dimension(format!(
                        "{} weights for {} nonzero patterns",
                        w.len(),
                        n_patterns - 1
                    )));
                }
                if w.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::Precondition("weights must lie in [0, 1]".into()));
                }
                w
            }
        };
        let sigma_p = scm_p.covariance()?;
        let sigma_a = scm_alpha.covariance()?;
        let mut ratios = Vec::with_capacity(n_patterns - 1);
        let mut lambda_star = Vec::with_capacity(n_patterns - 1);
        for k in 1..n_patterns {
            let o = support[k].observed_indices();
            let ratio =
                MarginalRatio::from_marginals(&sigma_p.marginal(&o)?, &sigma_a.marginal(&o)?, &o)?;
            let l = match ratio.analytic_max() {
                LambdaBound::Finite(l) => l,
                LambdaBound::Unbounded => {
                    let cal = calibration.ok_or_else(|| {
                        Error::Precondition(format!(
                            "pattern {k:b} has an unbounded ratio; calibration samples required"
                        ))
                    })?;
                    ratio.empirical_max(cal)?
                }
            };
            ratios.push(ratio);
            lambda_star.push(l);
        }
        let mech = GeneralizedRsMechanism {
            d,
            support,
            pi,
            lambda_star,
            ratios,
            clamp_count: AtomicU64::new(0),
        };
        if let Some(cal) = calibration {
            for i in 0..cal.nrows() {
                let x = DVector::from_iterator(d, (0..d).map(|j| cal[(i, j)]));
                let residual = 1.0 - mech.nonzero_mass(&x);
                if residual < -1e-9 {
                    return Err(Error::Precondition(format!(
                        "weights are inadmissible on calibration row {i}: P(r=0|x) = {residual}"
                    )));
                }
            }
        }
        Ok(mech)
    }

    pub fn lambda_star(&self) -> &[f64] {
        &self.lambda_star
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Number of evaluations where the residual left the unit interval and
    /// was clamped.
    pub fn clamp_count(&self) -> u64 {
        self.clamp_count.load(Ordering::Relaxed)
    }

    fn nonzero_mass(&self, x: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for k in 1..self.support.len() {
            total += self.nonzero_prob(k, x);
        }
        total
    }

    fn nonzero_prob(&self, k: usize, x: &DVector<f64>) -> f64 {
        let ratio = &self.ratios[k - 1];
        let r = ratio.ratio(&ratio.restrict(x)).min(self.lambda_star[k - 1]);
        self.pi[k - 1] * r / self.lambda_star[k - 1]
    }
}

impl MissingnessMechanism for GeneralizedRsMechanism {
    fn dim(&self) -> usize {
        self.d
    }

    fn support(&self) -> &[ObservationPattern] {
        &self.support
    }

    fn pattern_probs(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.support.len();
        let mut probs = DVector::zeros(m);
        for k in 1..m {
            probs[k] = self.nonzero_prob(k, x);
        }
        let mass: f64 = probs.sum();
        if mass > 1.0 + 1e-9 {
            // inadmissible weights at this x: renormalize and leave r=0 empty
            self.clamp_count.fetch_add(1, Ordering::Relaxed);
            log::warn!("generalized RS weights inadmissible at runtime (mass {mass:.6}); clamping");
            probs /= mass;
            probs[0] = 0.0;
        } else {
            probs[0] = (1.0 - mass).max(0.0);
        }
        probs
    }

    fn closed_form_marginals(&self) -> Option<DVector<f64>> {
        let m = self.support.len();
        let mut probs = DVector::zeros(m);
        let mut mass = 0.0;
        for k in 1..m {
            let p = self.pi[k - 1] / self.lambda_star[k - 1];
            probs[k] = p;
            mass += p;
        }
        probs[0] = (1.0 - mass).max(0.0);
        Some(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn scm_one() -> GaussianScm {
        let b = DMatrix::from_row_slice(3, 3, &[0.0, -0.9, -0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        GaussianScm::with_equal_noise(b, 1.0).unwrap()
    }

    fn scm_one_adversary() -> GaussianScm {
        let b = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, -0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        GaussianScm::new(b, nalgebra::DVector::from_column_slice(&[1.0, 1.81, 1.0])).unwrap()
    }

    #[test]
    fn ratio_is_one_for_identical_scms() {
        let p = scm_one();
        let ratio = MarginalRatio::new(&p, &p, &[0, 1]).unwrap();
        for x in [[0.0, 0.0], [1.0, -2.0], [3.0, 0.5]] {
            assert_relative_eq!(
                ratio.ratio(&DVector::from_column_slice(&x)),
                1.0,
                epsilon = 1e-12
            );
        }
        assert_eq!(ratio.analytic_max(), LambdaBound::Finite(1.0));
    }

    #[test]
    fn ratio_at_origin_matches_determinant_formula() {
        let ratio = MarginalRatio::new(&scm_one(), &scm_one_adversary(), &[0, 1]).unwrap();
        let at_zero = ratio.ratio(&DVector::zeros(2));
        // √(det Σp_V / det Σα_V) = √(1.00 / 1.81)
        assert_relative_eq!(at_zero, (1.0f64 / 1.81).sqrt(), epsilon = 1e-10);
        assert_relative_eq!(at_zero, 0.7433, epsilon = 1e-4);

        // direct density evaluation oracle
        let dens = |x: &DVector<f64>, s: &CovMatrix| {
            let d = x.len() as f64;
            let q = (s.inverse() * x).dot(x);
            (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powf(d / 2.0) * s.log_det().exp().sqrt())
        };
        let sp = scm_one().covariance().unwrap().marginal(&[0, 1]).unwrap();
        let sa = scm_one_adversary()
            .covariance()
            .unwrap()
            .marginal(&[0, 1])
            .unwrap();
        let x = DVector::from_column_slice(&[0.7, -0.4]);
        assert_relative_eq!(
            ratio.ratio(&x),
            dens(&x, &sa) / dens(&x, &sp),
            epsilon = 1e-10
        );
    }

    #[test]
    fn ratio_diverges_along_negative_eigendirection() {
        let ratio = MarginalRatio::new(&scm_one(), &scm_one_adversary(), &[0, 1]).unwrap();
        assert_eq!(ratio.analytic_max(), LambdaBound::Unbounded);
        // eigen-decomposition oracle: walk along the most negative direction
        let diff = &ratio.prec_a - &ratio.prec_p;
        let eig = nalgebra::SymmetricEigen::new(diff);
        let (mut min_val, mut min_idx) = (f64::INFINITY, 0);
        for (i, &e) in eig.eigenvalues.iter().enumerate() {
            if e < min_val {
                min_val = e;
                min_idx = i;
            }
        }
        assert!(min_val < 0.0);
        let dir = eig.eigenvectors.column(min_idx).into_owned();
        let mut last = 0.0;
        for t in [1.0, 2.0, 4.0, 8.0] {
            let r = ratio.ratio(&(dir.clone() * t));
            assert!(r > last);
            last = r;
        }
        assert!(last > 1e3);
    }

    #[test]
    fn empirical_lambda_is_finite_and_dominates_most_samples() {
        let p = scm_one();
        let a = scm_one_adversary();
        let cal = p.sample(50_000, 17).unwrap();
        let lambda = lambda_max(&p, &a, &[0, 1], LambdaMethod::Empirical(&cal)).unwrap();
        let l = lambda.finite().unwrap();
        assert!(l.is_finite() && l > 1.0);

        let mech = LocalizedRsMechanism::new(&p, &a, &[0, 1], lambda).unwrap();
        // on the calibration rows themselves no ratio exceeds lambda
        for i in 0..1000 {
            let x = cal.row(i).transpose();
            let probs = mech.pattern_probs(&x);
            assert!(probs.iter().all(|&q| (0.0..=1.0 + 1e-12).contains(&q)));
        }
        assert_eq!(mech.clip_count(), 0);
    }

    #[test]
    fn localized_probs_sum_to_one_and_match_structure() {
        let p = scm_one();
        let mech =
            LocalizedRsMechanism::new(&p, &p, &[0, 1], LambdaBound::Finite(1.0)).unwrap();
        let x = DVector::from_column_slice(&[0.3, -0.1, 2.0]);
        let probs = mech.pattern_probs(&x);
        // identical SCMs, lambda 1: acceptance certain, uniform over nonzero
        assert_relative_eq!(probs[0], 0.0, epsilon = 1e-12);
        for k in 1..4 {
            assert_relative_eq!(probs[k], 1.0 / 3.0, epsilon = 1e-12);
        }
        assert_relative_eq!(probs.sum(), 1.0, epsilon = 1e-12);
        // support: bit in V̄ always observed
        for pat in mech.support() {
            assert!(pat.is_observed(2));
        }
    }

    #[test]
    fn localized_marginals_match_monte_carlo() {
        let p = scm_one();
        let a = scm_one_adversary();
        let cal = p.sample(50_000, 23).unwrap();
        let lambda = lambda_max(&p, &a, &[0, 1], LambdaMethod::Empirical(&cal)).unwrap();
        let mech = LocalizedRsMechanism::new(&p, &a, &[0, 1], lambda).unwrap();
        let closed = mech.closed_form_marginals().unwrap();

        let n = 50_000;
        let mut acc = DVector::zeros(4);
        for i in 0..n {
            acc += mech.pattern_probs(&cal.row(i).transpose());
        }
        acc /= n as f64;
        for k in 0..4 {
            let se = (closed[k] * (1.0 - closed[k]) / n as f64).sqrt().max(1e-4);
            assert!(
                (acc[k] - closed[k]).abs() <= 3.0 * se,
                "pattern {k}: mc {} vs closed {}",
                acc[k],
                closed[k]
            );
        }
    }

    #[test]
    fn all_or_none_has_two_patterns() {
        let p = scm_one();
        let a = scm_one_adversary();
        let mech = AllOrNoneRsMechanism::new(&p, &a, &[0, 1], LambdaBound::Finite(2.0)).unwrap();
        assert_eq!(mech.support().len(), 2);
        assert!(mech.support()[0].masked_indices() == vec![0, 1]);
        assert!(mech.support()[1].is_fully_observed());
        let probs = mech.pattern_probs(&DVector::zeros(3));
        assert_relative_eq!(probs.sum(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            mech.closed_form_rate().unwrap(),
            0.5 * 2.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn generalized_uniform_identical_scms() {
        let p = scm_one();
        let mech = GeneralizedRsMechanism::new(&p, &p, PiSpec::Uniform, None).unwrap();
        let x = DVector::from_column_slice(&[0.5, 0.1, -0.2]);
        let probs = mech.pattern_probs(&x);
        assert_relative_eq!(probs[0], 0.0, epsilon = 1e-12);
        for k in 1..8 {
            assert_relative_eq!(probs[k], 1.0 / 7.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn generalized_marginals_are_pi_over_lambda_star() {
        let p = scm_one();
        let a = scm_one_adversary();
        let cal = p.sample(20_000, 5).unwrap();
        let mech = GeneralizedRsMechanism::new(&p, &a, PiSpec::Uniform, Some(&cal)).unwrap();
        let closed = mech.closed_form_marginals().unwrap();
        for k in 1..8 {
            assert_relative_eq!(
                closed[k],
                mech.pi()[k - 1] / mech.lambda_star()[k - 1],
                epsilon = 1e-12
            );
        }
        // Monte-Carlo check of the marginal identity p_R(r) = π_r/Λ*_r
        let n = 20_000;
        let mut acc = DVector::zeros(8);
        for i in 0..n {
            acc += mech.pattern_probs(&cal.row(i).transpose());
        }
        acc /= n as f64;
        for k in 0..8 {
            let se = (closed[k] * (1.0 - closed[k]) / n as f64).sqrt().max(1e-4);
            assert!((acc[k] - closed[k]).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn generalized_two_var_table_matches_direct_evaluation() {
        // d=2 toy pair with hand-set lambda*: full probability table
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.6, 0.0, 0.0]);
        let p = GaussianScm::with_equal_noise(b, 1.0).unwrap();
        let a = GaussianScm::with_equal_noise(DMatrix::zeros(2, 2), 1.0).unwrap();
        let cal = p.sample(10_000, 9).unwrap();
        let mech = GeneralizedRsMechanism::new(&p, &a, PiSpec::Uniform, Some(&cal)).unwrap();

        let x = DVector::from_column_slice(&[0.4, -1.1]);
        let probs = mech.pattern_probs(&x);
        let sp = p.covariance().unwrap();
        let sa = a.covariance().unwrap();
        let pi = 1.0 / 3.0;
        let mut expected = [0.0f64; 4];
        for k in 1..4usize {
            let o: Vec<usize> = (0..2).filter(|&j| (k >> j) & 1 == 1).collect();
            let r = MarginalRatio::from_marginals(
                &sp.marginal(&o).unwrap(),
                &sa.marginal(&o).unwrap(),
                &o,
            )
            .unwrap();
            let xo = DVector::from_iterator(o.len(), o.iter().map(|&j| x[j]));
            expected[k] = pi * r.ratio(&xo).min(mech.lambda_star()[k - 1])
                / mech.lambda_star()[k - 1];
        }
        expected[0] = 1.0 - expected[1..].iter().sum::<f64>();
        for k in 0..4 {
            assert_relative_eq!(probs[k], expected[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn probs_are_distributions_on_random_samples() {
        let p = scm_one();
        let a = scm_one_adversary();
        let cal = p.sample(10_000, 31).unwrap();
        let lambda = lambda_max(&p, &a, &[0, 1], LambdaMethod::Empirical(&cal)).unwrap();
        let mechs: Vec<Box<dyn MissingnessMechanism>> = vec![
            Box::new(LocalizedRsMechanism::new(&p, &a, &[0, 1], lambda).unwrap()),
            Box::new(AllOrNoneRsMechanism::new(&p, &a, &[0, 1], lambda).unwrap()),
            Box::new(GeneralizedRsMechanism::new(&p, &a, PiSpec::Uniform, Some(&cal)).unwrap()),
        ];
        let fresh = p.sample(10_000, 77).unwrap();
        for mech in &mechs {
            for i in 0..fresh.nrows() {
                let probs = mech.pattern_probs(&fresh.row(i).transpose());
                assert!((probs.sum() - 1.0).abs() < 1e-9);
                assert!(probs.iter().all(|&q| q >= 0.0));
            }
        }
    }
}
