//! Strongly continuous semigroups on the sequence space ω.
//!
//! Continuous operators on ω are row-finite matrices. For the finitely
//! described class in [`operator`], [`reachability`] decides whether `A`
//! generates a semigroup (every coordinate's dependency set is finite), and
//! [`exponential`] evaluates `T_t x = exp(tA) x` and the Cesàro mean
//! coordinatewise with a certified truncation bound. [`verifier`] checks the
//! results against the semigroup identities and [`corpus`] replays the
//! standard examples.

pub mod corpus;
pub mod error;
pub mod exponential;
pub mod operator;
pub mod rational;
pub mod reachability;
pub mod vector;
pub mod verifier;

pub use error::{Error, Result};
pub use exponential::{
    cesaro_apply, closed_submatrix, exp_apply, norm_bound, truncation_order, EvalOptions,
    EvaluationReport, Evaluator, FiniteMatrix, TailBound,
};
pub use operator::{OperatorSpec, RowFiniteOperator, SparseRow, DEFAULT_SUPPORT_CAP};
pub use rational::Rational;
pub use reachability::{
    decide_generation, dependency_closure, has_positive_cycle, quotient_graph, Certificate,
    GeneratorVerdict, QuotientGraph, ReachabilityResult,
};
pub use vector::{project, SequenceVector, Tail};
pub use verifier::{
    check_cesaro_identity, check_generator_fd, check_semigroup_law, probe_exact_failure,
    CheckReport,
};
