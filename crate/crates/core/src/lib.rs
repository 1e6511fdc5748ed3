//! Robust collaborative PAC learning with adversarial user oracles.
//!
//! `n` users each hold a data distribution; at most an `η` fraction of their
//! oracles answer adversarially. The crate provides finite hypothesis classes
//! with a consistency oracle, seeded oracle simulation with sample metering,
//! the iterative collaborative learner, the consistent-group/clique view of
//! the candidate search, and Monte Carlo checks of the learner's guarantees.

pub mod cli;
pub mod conflict;
pub mod error;
pub mod hypothesis;
pub mod learner;
pub mod oracle;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use hypothesis::{
    error_rate, pac_sample_size, ClassKind, Distribution, Hypothesis, HypothesisClass,
    LabeledExample, Point,
};
pub use learner::{
    candidate, delta_schedule, run_naive_baseline, run_robust_collaborative, test_candidate,
    LearnerConstants, RunParams, RunResult,
};
pub use oracle::{
    make_centralized_impossibility_instance, make_lower_bound_instance, make_random_instance,
    AdversaryStrategy, Instance, InstanceSpec, OracleMode, OracleSet, SampleLedger,
};
