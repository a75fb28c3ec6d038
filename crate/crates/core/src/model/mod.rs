//! The caIMDP data model: interval transition bounds as functions of a
//! continuous action, the action-set geometry, validation, classification
//! into solver-dispatch shape classes, and JSON serialization.

mod action_set;
mod bounds;
mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use action_set::{ActionSet, MEMBERSHIP_TOL};
pub use bounds::{BoundFunction, BoundKind, GradientFn, Shape, ValueFn, SHAPE_EIGEN_TOL};
pub use io::{load_model, model_from_json, model_to_json, save_model};

/// Pointwise feasibility tolerance used by [`validate_pointwise`].
pub const VALIDATION_TOL: f64 = 1e-9;

/// Number of quasi-random actions sampled by default when validating a model.
pub const DEFAULT_VALIDATION_SAMPLES: usize = 256;

const OPAQUE_CHORD_CHECKS: usize = 1000;
const OPAQUE_CHORD_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{0}")]
    Invalid(String),
    #[error("bound declared {declared:?} fails the eigenvalue sign test: {detail}")]
    ShapeCheck { declared: Shape, detail: String },
    #[error("action set variant '{variant}' does not support the {oracle} oracle")]
    Capability {
        variant: &'static str,
        oracle: &'static str,
    },
    #[error("action {index} lies outside the action set")]
    ActionOutsideSet { index: usize },
    #[error("failed to parse model at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("opaque bounds cannot be serialized")]
    Unserializable,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which tractable solver family applies to a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    /// All bounds linear, polytopic action set: vertex-enumeration LPs.
    Linear,
    /// Concave lower / convex upper bounds, convex action set: the backup
    /// maximizations are convex programs.
    ConcaveConvex,
    /// Convex lower / concave upper bounds, polytopic action set: convex
    /// maximization, optimum at a vertex.
    ConvexConcave,
    /// No tractable structure recognized.
    General,
}

/// Square matrix of bound functions, indexed `[from][to]`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct BoundMatrix {
    n: usize,
    entries: Vec<BoundFunction>,
}

impl BoundMatrix {
    fn from_rows(rows: Vec<Vec<BoundFunction>>, n: usize) -> Result<Self, ModelError> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(ModelError::Invalid(format!(
                "bound matrix must be {n}x{n}"
            )));
        }
        Ok(BoundMatrix {
            n,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub(crate) fn get(&self, from: usize, to: usize) -> &BoundFunction {
        &self.entries[from * self.n + to]
    }

    fn iter(&self) -> impl Iterator<Item = ((usize, usize), &BoundFunction)> {
        let n = self.n;
        self.entries
            .iter()
            .enumerate()
            .map(move |(i, b)| ((i / n, i % n), b))
    }
}

/// A continuous-action interval Markov decision process: finite states, a
/// compact action set, lower/upper transition-probability bound functions
/// per state pair, and a nonnegative state reward vector.
///
/// Immutable after construction and safe to share across threads; opaque
/// bound evaluators must be re-entrant.
#[derive(Clone, Debug)]
pub struct Caimdp {
    action_set: ActionSet,
    lower: BoundMatrix,
    upper: BoundMatrix,
    reward: Vec<f64>,
    warnings: Vec<String>,
}

impl Caimdp {
    /// Build and validate a model. `lower[q][q']` and `upper[q][q']` bound
    /// the transition probability from state `q` to `q'`.
    ///
    /// Structural checks are hard errors. Declared shapes of opaque bounds
    /// cannot be proven, so they are spot-checked on random chords; failures
    /// become warnings retrievable from [`Caimdp::warnings`].
    pub fn new(
        action_set: ActionSet,
        lower: Vec<Vec<BoundFunction>>,
        upper: Vec<Vec<BoundFunction>>,
        reward: Vec<f64>,
    ) -> Result<Self, ModelError> {
        action_set.validate()?;
        let n = reward.len();
        if n == 0 {
            return Err(ModelError::Invalid("model needs at least one state".into()));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(ModelError::Invalid("reward must be finite".into()));
        }
        if reward.iter().any(|r| *r < 0.0) {
            return Err(ModelError::Invalid("reward must be nonnegative".into()));
        }
        let lower = BoundMatrix::from_rows(lower, n)?;
        let upper = BoundMatrix::from_rows(upper, n)?;
        let dim = action_set.dim();
        for (side, matrix) in [("lower", &lower), ("upper", &upper)] {
            for ((q, q2), bound) in matrix.iter() {
                if let Some(d) = bound.dim() {
                    if d != dim {
                        return Err(ModelError::Invalid(format!(
                            "{side}[{q}][{q2}] expects {d}-dimensional actions, \
                             the action set is {dim}-dimensional"
                        )));
                    }
                }
            }
        }

        let mut model = Caimdp {
            action_set,
            lower,
            upper,
            reward,
            warnings: Vec::new(),
        };
        model.warnings = model.spot_check_opaque_shapes();
        Ok(model)
    }

    pub fn n_states(&self) -> usize {
        self.reward.len()
    }

    pub fn action_dim(&self) -> usize {
        self.action_set.dim()
    }

    pub fn action_set(&self) -> &ActionSet {
        &self.action_set
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn lower(&self, from: usize, to: usize) -> &BoundFunction {
        self.lower.get(from, to)
    }

    pub fn upper(&self, from: usize, to: usize) -> &BoundFunction {
        self.upper.get(from, to)
    }

    /// Shape-check warnings collected at construction.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Evaluate the lower-bound row of state `q` at action `a`.
    pub fn eval_lower_row(&self, q: usize, a: &[f64]) -> Vec<f64> {
        (0..self.n_states())
            .map(|q2| self.lower.get(q, q2).eval(a))
            .collect()
    }

    /// Evaluate the upper-bound row of state `q` at action `a`.
    pub fn eval_upper_row(&self, q: usize, a: &[f64]) -> Vec<f64> {
        (0..self.n_states())
            .map(|q2| self.upper.get(q, q2).eval(a))
            .collect()
    }

    /// Most specific shape class the model matches.
    ///
    /// `Linear` beats `ConcaveConvex` beats `ConvexConcave`; a model matching
    /// none is `General`. Degrading any single bound shape to `Unknown`
    /// always yields `General`.
    pub fn classify(&self) -> ShapeClass {
        let all_linear = self
            .lower
            .iter()
            .chain(self.upper.iter())
            .all(|(_, b)| b.shape() == Shape::Linear);
        let polytopic = self.action_set.is_polytopic();
        if all_linear && polytopic {
            return ShapeClass::Linear;
        }
        let concave_convex = self
            .lower
            .iter()
            .all(|(_, b)| b.shape().is_concave_or_linear())
            && self
                .upper
                .iter()
                .all(|(_, b)| b.shape().is_convex_or_linear());
        // Every supported action-set variant is convex, so the concave/convex
        // class needs no geometric condition.
        if concave_convex {
            return ShapeClass::ConcaveConvex;
        }
        let convex_concave = self
            .lower
            .iter()
            .all(|(_, b)| b.shape().is_convex_or_linear())
            && self
                .upper
                .iter()
                .all(|(_, b)| b.shape().is_concave_or_linear());
        if convex_concave && polytopic {
            return ShapeClass::ConvexConcave;
        }
        ShapeClass::General
    }

    /// Bound entries that block every tractable shape class, as
    /// `(side, from, to, shape)` tuples. Empty unless `classify` is
    /// `General`.
    pub fn offending_bounds(&self) -> Vec<(&'static str, usize, usize, Shape)> {
        if self.classify() != ShapeClass::General {
            return Vec::new();
        }
        let mut out = Vec::new();
        for ((q, q2), b) in self.lower.iter() {
            if !b.shape().is_concave_or_linear() && !b.shape().is_convex_or_linear() {
                out.push(("lower", q, q2, b.shape()));
            }
        }
        for ((q, q2), b) in self.upper.iter() {
            if !b.shape().is_convex_or_linear() && !b.shape().is_concave_or_linear() {
                out.push(("upper", q, q2, b.shape()));
            }
        }
        if out.is_empty() {
            // Mixed curvatures rather than unknown shapes: report the
            // entries with strict curvature, which is what prevents both
            // mixed classes from matching.
            for ((q, q2), b) in self.lower.iter() {
                if !b.shape().is_concave_or_linear() {
                    out.push(("lower", q, q2, b.shape()));
                }
            }
            for ((q, q2), b) in self.upper.iter() {
                if !b.shape().is_convex_or_linear() {
                    out.push(("upper", q, q2, b.shape()));
                }
            }
        }
        out
    }

    /// Quasi-random in-set actions (plus polytope vertices when available)
    /// suitable for [`validate_pointwise`].
    pub fn default_validation_actions(&self, samples: usize) -> Vec<Vec<f64>> {
        let mut actions = crate::sampling::quasi_in_set(&self.action_set, samples, 0);
        if let Ok(vs) = self.action_set.vertices() {
            actions.extend(vs);
        }
        actions
    }

    fn spot_check_opaque_shapes(&self) -> Vec<String> {
        let has_opaque = self
            .lower
            .iter()
            .chain(self.upper.iter())
            .any(|(_, b)| matches!(b.kind(), BoundKind::Opaque { .. }));
        if !has_opaque {
            return Vec::new();
        }
        let endpoints =
            crate::sampling::quasi_in_set(&self.action_set, 2 * OPAQUE_CHORD_CHECKS, 0);
        let mut warnings = Vec::new();
        for (side, matrix) in [("lower", &self.lower), ("upper", &self.upper)] {
            for ((q, q2), bound) in matrix.iter() {
                if !matches!(bound.kind(), BoundKind::Opaque { .. }) {
                    continue;
                }
                if let Some(violation) = midpoint_shape_violation(bound, &endpoints) {
                    warnings.push(format!(
                        "{side}[{q}][{q2}] declared {:?} violates midpoint \
                         curvature by {violation:.3e} (sampled check)",
                        bound.shape()
                    ));
                }
            }
        }
        warnings
    }
}

/// Largest midpoint-curvature violation over sampled chords, if it exceeds
/// the tolerance. Sampling cannot prove a shape, so this backs warnings, not
/// errors.
fn midpoint_shape_violation(bound: &BoundFunction, endpoints: &[Vec<f64>]) -> Option<f64> {
    let mut worst = 0.0f64;
    for pair in endpoints.chunks_exact(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
        let fmid = bound.eval(&mid);
        let avg = 0.5 * (bound.eval(x) + bound.eval(y));
        let defect = match bound.shape() {
            Shape::Concave => avg - fmid,
            Shape::Convex => fmid - avg,
            Shape::Linear => (fmid - avg).abs(),
            Shape::Unknown => 0.0,
        };
        worst = worst.max(defect);
    }
    (worst > OPAQUE_CHORD_TOL).then_some(worst)
}

/// Feasibility of one action in a [`ValidationReport`].
#[derive(Clone, Debug, Serialize)]
pub struct ActionCheck {
    pub action_index: usize,
    /// Worst violation of `lower ≤ upper`.
    pub ordering: f64,
    /// Worst excursion of any bound outside `[0, 1]`.
    pub range: f64,
    /// Worst violation of `Σ lower ≤ 1` over rows.
    pub lower_sum: f64,
    /// Worst violation of `Σ upper ≥ 1` over rows.
    pub upper_sum: f64,
}

impl ActionCheck {
    pub fn worst(&self) -> f64 {
        self.ordering
            .max(self.range)
            .max(self.lower_sum)
            .max(self.upper_sum)
    }
}

/// Result of sampling-based interval-consistency validation.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub checks: Vec<ActionCheck>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn worst_violation(&self) -> f64 {
        self.checks.iter().map(ActionCheck::worst).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst_violation() <= self.tolerance
    }
}

/// Check the interval-consistency constraints at the given actions: for every
/// state pair `lower ≤ upper`, every bound in `[0, 1]`, and per row
/// `Σ lower ≤ 1 ≤ Σ upper`. Passes iff every violation is at most 1e-9.
///
/// Sampling cannot certify the constraints over the whole set; this is the
/// pragmatic check the rest of the crate relies on.
pub fn validate_pointwise(
    imdp: &Caimdp,
    actions: &[Vec<f64>],
) -> Result<ValidationReport, ModelError> {
    let n = imdp.n_states();
    let mut checks = Vec::with_capacity(actions.len());
    for (index, a) in actions.iter().enumerate() {
        if !imdp.action_set.contains(a) {
            return Err(ModelError::ActionOutsideSet { index });
        }
        let mut check = ActionCheck {
            action_index: index,
            ordering: 0.0,
            range: 0.0,
            lower_sum: 0.0,
            upper_sum: 0.0,
        };
        for q in 0..n {
            let lo = imdp.eval_lower_row(q, a);
            let hi = imdp.eval_upper_row(q, a);
            for q2 in 0..n {
                check.ordering = check.ordering.max(lo[q2] - hi[q2]);
                check.range = check
                    .range
                    .max(-lo[q2])
                    .max(lo[q2] - 1.0)
                    .max(-hi[q2])
                    .max(hi[q2] - 1.0);
            }
            let sum_lo: f64 = lo.iter().sum();
            let sum_hi: f64 = hi.iter().sum();
            check.lower_sum = check.lower_sum.max(sum_lo - 1.0);
            check.upper_sum = check.upper_sum.max(1.0 - sum_hi);
        }
        checks.push(check);
    }
    Ok(ValidationReport {
        tolerance: VALIDATION_TOL,
        checks,
        warnings: imdp.warnings.clone(),
    })
}
