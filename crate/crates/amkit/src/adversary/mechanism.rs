use nalgebra::DVector;
use rand::Rng;

use crate::adversary::pattern::ObservationPattern;
use crate::error::{Error, Result};

/// A conditional distribution over observation patterns given a full sample.
///
/// The support is fixed per instance; `pattern_probs` returns a probability
/// vector over it (nonnegative, summing to 1) for every input.
pub trait MissingnessMechanism: Send + Sync {
    fn dim(&self) -> usize;

    fn support(&self) -> &[ObservationPattern];

    fn pattern_probs(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Marginal pattern probabilities under the data distribution, when a
    /// closed form is known.
    fn closed_form_marginals(&self) -> Option<DVector<f64>> {
        None
    }

    /// Expected missingness rate in closed form, when known.
    fn closed_form_rate(&self) -> Option<f64> {
        self.closed_form_marginals().map(|probs| {
            let d = self.dim() as f64;
            self.support()
                .iter()
                .zip(probs.iter())
                .map(|(p, &w)| w * p.masked_count() as f64 / d)
                .sum()
        })
    }
}

/// Draws one support index from a probability vector.
pub fn sample_pattern_index<R: Rng>(probs: &DVector<f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Pattern distribution independent of the sample (missing completely at
/// random).
#[derive(Debug, Clone)]
pub struct McarMechanism {
    d: usize,
    support: Vec<ObservationPattern>,
    probs: DVector<f64>,
}

impl McarMechanism {
    pub fn new(support: Vec<ObservationPattern>, probs: DVector<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Precondition("empty pattern support".into()));
        }
        let d = support[0].dim();
        for p in &support {
            p.check_dim(d)?;
        }
        if probs.len() != support.len() {
            return Err(Error::Dimension(format!(
                "{} probabilities for {} patterns",
                probs.len(),
                support.len()
            )));
        }
        if probs.iter().any(|&p| p < -1e-12) {
            return Err(Error::Precondition("negative pattern probability".into()));
        }
        let total: f64 = probs.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "pattern probabilities sum to {total}"
            )));
        }
        let probs = probs.map(|p| p.max(0.0)) / total;
        Ok(McarMechanism { d, support, probs })
    }

    /// The single-pattern mechanism that observes everything.
    pub fn always_observe(d: usize) -> Self {
        McarMechanism {
            d,
            support: vec![ObservationPattern::all_observed(d)],
            probs: DVector::from_element(1, 1.0),
        }
    }

    pub fn probs(&self) -> &DVector<f64> {
        &self.probs
    }
}

impl MissingnessMechanism for McarMechanism {
    fn dim(&self) -> usize {
        self.d
    }

    fn support(&self) -> &[ObservationPattern] {
        &self.support
    }

    fn pattern_probs(&self, _x: &DVector<f64>) -> DVector<f64> {
        self.probs.clone()
    }

    fn closed_form_marginals(&self) -> Option<DVector<f64>> {
        Some(self.probs.clone())
    }
}
