//! Robust finite-horizon control synthesis over interval Markov decision
//! processes with continuous action sets (caIMDPs).
//!
//! A caIMDP is a finite-state Markov decision process whose transition
//! probabilities are only known to lie between state-pair-dependent lower and
//! upper bound functions of a continuous action variable. This crate computes
//! pessimistically optimal (max over policies, min over adversaries) finite
//! horizon expected cumulative rewards and the Markov policies achieving
//! them, by exact value iteration: each max-min Bellman backup is decomposed
//! into `|Q|` plain maximization problems over the action set, which are then
//! dispatched to a tractable solver chosen from the shape class of the bound
//! functions (vertex enumeration, projected gradient ascent, Frank-Wolfe, or
//! a dense simplex LP).
//!
//! Module map:
//!
//! * [`model`]: the caIMDP data model, action-set geometry oracles,
//!   validation and JSON serialization.
//! * [`inner_opt`]: exact worst/best-case distributions over the interval
//!   probability simplex at a fixed action.
//! * [`optimizers`]: the continuous maximization engines.
//! * [`bellman`]: backup decomposition, value iteration, policy extraction,
//!   optimistic (max-max) iteration and suboptimality gaps.
//! * [`oracle`]: brute-force reference implementations used to validate the
//!   solvers at desk scale.
//! * [`experiments`]: random instance generation and the continuous-versus-
//!   sampled comparison harness.

pub mod bellman;
pub mod experiments;
pub mod inner_opt;
mod lp;
pub mod model;
pub mod optimizers;
pub mod oracle;
pub mod sampling;

pub use bellman::{
    discrete_vi, evaluate_policy, optimistic_backup, pessimistic_backup, suboptimality_bound,
    synthesize, synthesize_optimistic, AdversaryMode, BackupResult, GapReport, MarkovPolicy,
    SynthesisReport, ValueFunction,
};
pub use inner_opt::{best_case_distribution, worst_case_distribution, IntervalSimplex};
pub use model::{
    load_model, save_model, validate_pointwise, ActionSet, BoundFunction, Caimdp, ModelError,
    Shape, ShapeClass, ValidationReport,
};
pub use optimizers::{OptimizerConfig, SmoothObjective};
