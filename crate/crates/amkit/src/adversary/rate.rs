use nalgebra::DVector;

use crate::adversary::mechanism::{McarMechanism, MissingnessMechanism};
use crate::error::{Error, Result};
use crate::scm::GaussianScm;

/// Evaluation mode for the expected missingness rate.
pub enum RateMode<'a> {
    ClosedForm,
    MonteCarlo {
        scm_p: &'a GaussianScm,
        n: usize,
        seed: u64,
    },
}

/// Expected fraction of masked entries per sample, in [0, 1].
pub fn expected_missingness_rate(
    mech: &dyn MissingnessMechanism,
    mode: RateMode<'_>,
) -> Result<f64> {
    match mode {
        RateMode::ClosedForm => mech.closed_form_rate().ok_or_else(|| {
            Error::Capability("no closed-form missingness rate for this mechanism".into())
        }),
        RateMode::MonteCarlo { scm_p, n, seed } => {
            if scm_p.dim() != mech.dim() {
                return Err(Error::Dimension("SCM/mechanism dimensions disagree".into()));
            }
            if n == 0 {
                return Err(Error::Precondition("Monte-Carlo sample size is zero".into()));
            }
            let x = scm_p.sample(n, seed)?;
            let d = mech.dim() as f64;
            let frac: Vec<f64> = mech
                .support()
                .iter()
                .map(|p| p.masked_count() as f64 / d)
                .collect();
            let mut acc = 0.0;
            for i in 0..n {
                let probs = mech.pattern_probs(&x.row(i).transpose());
                acc += probs
                    .iter()
                    .zip(&frac)
                    .map(|(&p, &f)| p * f)
                    .sum::<f64>();
            }
            Ok(acc / n as f64)
        }
    }
}

/// Marginalizes a missingness mechanism over the data distribution, yielding
/// the matched MCAR baseline. Uses the closed form when the mechanism has
/// one, otherwise a Monte-Carlo average over `n_mc` samples from `scm_p`.
pub fn mcar_from_mnar(
    mech: &dyn MissingnessMechanism,
    scm_p: &GaussianScm,
    n_mc: usize,
    seed: u64,
) -> Result<McarMechanism> {
    if let Some(probs) = mech.closed_form_marginals() {
        return McarMechanism::new(mech.support().to_vec(), probs);
    }
    mcar_from_rows(mech, &scm_p.sample(n_mc.max(1), seed)?)
}

/// Matched MCAR baseline from an empirical sample: the average of
/// `pattern_probs` over the rows.
pub fn mcar_from_rows(
    mech: &dyn MissingnessMechanism,
    rows: &nalgebra::DMatrix<f64>,
) -> Result<McarMechanism> {
    if rows.nrows() == 0 {
        return Err(Error::Precondition("empty sample".into()));
    }
    if rows.ncols() != mech.dim() {
        return Err(Error::Dimension("sample/mechanism dimensions disagree".into()));
    }
    let mut acc = DVector::zeros(mech.support().len());
    for i in 0..rows.nrows() {
        acc += mech.pattern_probs(&rows.row(i).transpose());
    }
    acc /= rows.nrows() as f64;
    McarMechanism::new(mech.support().to_vec(), acc)
}
