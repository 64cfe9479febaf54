//! Sequential model comparison with proper scoring rules.
//!
//! The Hyvärinen score depends on a predictive density only through the
//! derivatives of its logarithm, so it stays defined for improper
//! predictives (flat priors) where the log score and the Bayes factor break
//! down. This crate evaluates both rules on one-step predictive
//! distributions, accumulates score differences along a data sequence and
//! selects between models, and ships a seeded Monte Carlo harness for the
//! consistency and invariance properties of the method.
//!
//! Numeric code is generic over [`Real`] (`f32`/`f64`); the `*64` and `*32`
//! aliases below fix the scalar.

// `!(v > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod linalg;
pub mod models;
pub mod prequential;
pub mod process;
pub mod real;
pub mod score;

pub use error::{Error, Result};
pub use models::{
    flat_prior_location_model, flat_prior_scale_model, iid_gaussian_model, parse_model_spec,
    process_model, Predictive, PredictiveModel,
};
pub use prequential::{
    delta_trace, rescale_rule, select, select_among, Choice, DeltaTrace, SelectionOutcome,
};
pub use process::{
    ar_process, innovations_recursion, ma_process, sample_path, PredictionRecursionState,
    StationaryProcessSpec,
};
pub use real::Real;
pub use score::{
    check_propriety, hyvarinen_score_gaussian, hyvarinen_score_generic, hyvarinen_score_mvn,
    log_score, score_from_decision_problem, DecisionProblem, DensityWithDerivatives,
    GaussianPredictive, Rule, RuleId, ScoreValue, StudentTPredictive,
};

pub type GaussianPredictive64 = GaussianPredictive<f64>;
pub type GaussianPredictive32 = GaussianPredictive<f32>;
pub type StudentTPredictive64 = StudentTPredictive<f64>;
pub type StudentTPredictive32 = StudentTPredictive<f32>;
pub type ScoreValue64 = ScoreValue<f64>;
pub type ScoreValue32 = ScoreValue<f32>;
pub type Rule64 = Rule<f64>;
pub type Rule32 = Rule<f32>;
pub type PredictiveModel64 = PredictiveModel<f64>;
pub type PredictiveModel32 = PredictiveModel<f32>;
pub type StationaryProcessSpec64 = StationaryProcessSpec<f64>;
pub type StationaryProcessSpec32 = StationaryProcessSpec<f32>;
pub type DeltaTrace64 = DeltaTrace<f64>;
pub type DeltaTrace32 = DeltaTrace<f32>;
pub type DecisionProblem64 = DecisionProblem<f64>;
pub type DecisionProblem32 = DecisionProblem<f32>;
