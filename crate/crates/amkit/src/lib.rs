//! Adversarial-missingness attacks on linear Gaussian causal structure learning.
//!
//! The toolkit covers both sides of the threat model:
//!
//! * the adversary, who picks a target DAG, derives the KL-closest Gaussian
//!   SCM that is Markov with respect to it, and synthesizes a missingness
//!   mechanism (rejection sampling or a trained neural policy) whose masks
//!   steer EM-based structure learners toward that SCM;
//! * the modeler, who runs structure learning on the masked data (MissDAG
//!   with a NOTEARS-style M-step, mean imputation + NOTEARS, PC).
//!
//! [`exp`] wires the pieces into config-driven experiments with replicate
//! seeding, attack metrics, and CSV reports; the `amkit` binary exposes the
//! same pipeline on the command line.

pub mod adversary;
pub mod dataset;
pub mod error;
pub mod exp;
pub mod lamm;
pub mod modeler;
pub mod scm;
pub mod seed;

pub use error::{Error, Result};
