//! Adversary-side constructions: the KL-optimal adversarial SCM and the
//! missingness mechanisms (localized / all-or-none / generalized rejection
//! sampling, matched MCAR baselines) with missingness-rate accounting.

mod mechanism;
mod optimal;
mod pattern;
mod rate;
mod rs;

pub use mechanism::{sample_pattern_index, McarMechanism, MissingnessMechanism};
pub use optimal::{edge_override_scm, optimal_adversarial_scm};
pub use pattern::ObservationPattern;
pub use rate::{expected_missingness_rate, mcar_from_mnar, mcar_from_rows, RateMode};
pub use rs::{
    lambda_max, AllOrNoneRsMechanism, GeneralizedRsMechanism, LambdaBound, LambdaMethod,
    LocalizedRsMechanism, MarginalRatio, PiSpec, MAX_GENERALIZED_DIM, MAX_LOCAL_VARS,
};
