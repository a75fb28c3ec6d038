//! Bellman backups and value iteration.
//!
//! Each pessimistic backup `max_a min_p pᵀV` is decomposed, after sorting
//! `V` in descending order, into `|Q|` plain maximizations over the action
//! set:
//!
//! ```text
//! f_j(a) = Σ_{i<j} (V_i − V_j)·lower(q, a, q_i)
//!        + Σ_{i>j} (V_i − V_j)·upper(q, a, q_i) + V_j
//! ```
//!
//! with indices in sorted order. The backup value is `max_j max_a f_j(a)`,
//! and each `f_j` is linear, concave, or convex depending on the model's
//! shape class, which picks the solver: vertex enumeration for the linear
//! and convex/concave classes, projected gradient or Frank-Wolfe for the
//! concave/convex class.
//!
//! The optimistic (max-max) backup swaps the roles of the bounds; its inner
//! maximum is `min_j h_j(a)` with `h_j` the mirrored objective, handled per
//! class by an epigraph LP, supergradient ascent, or a flagged non-certified
//! estimate.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inner_opt::{self, IntervalSimplex};
use crate::model::{ActionSet, Caimdp, ModelError, ShapeClass};
use crate::optimizers::{
    frank_wolfe_max, max_over_vertices, projected_gradient_max, simplex_lp_max, MaxResult,
    OptimError, OptimizerConfig, SmoothObjective,
};

#[derive(Debug, Error)]
pub enum BellmanError {
    #[error(
        "model falls in the general shape class, which has no exact solver; \
         offending bounds: {offending}"
    )]
    UnsupportedClass { offending: String },
    #[error("sorted index {j} out of range for {n} states")]
    IndexOutOfRange { j: usize, n: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("policy action at time {time}, state {state} lies outside the action set")]
    PolicyActionOutsideSet { time: usize, state: usize },
    #[error("models disagree in shape: {0}")]
    ModelMismatch(String),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("inner optimization failed at state {state}: {source}")]
    Inner {
        state: usize,
        source: inner_opt::InnerOptError,
    },
}

/// Which side the per-step adversary takes in policy evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryMode {
    Worst,
    Best,
}

/// A value function at one time index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValueFunction {
    pub k: usize,
    pub values: Vec<f64>,
}

/// Time-indexed deterministic Markov policy: `actions[t][q]` is the action
/// taken in state `q` at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    pub horizon: usize,
    pub actions: Vec<Vec<Vec<f64>>>,
}

impl MarkovPolicy {
    pub fn new(actions: Vec<Vec<Vec<f64>>>) -> Self {
        MarkovPolicy {
            horizon: actions.len(),
            actions,
        }
    }

    pub fn validate_against(&self, imdp: &Caimdp) -> Result<(), BellmanError> {
        if self.horizon != self.actions.len() {
            return Err(BellmanError::InvalidInput(format!(
                "policy declares horizon {} but holds {} steps",
                self.horizon,
                self.actions.len()
            )));
        }
        for (t, step) in self.actions.iter().enumerate() {
            if step.len() != imdp.n_states() {
                return Err(BellmanError::InvalidInput(format!(
                    "policy step {t} covers {} states, model has {}",
                    step.len(),
                    imdp.n_states()
                )));
            }
            for (q, action) in step.iter().enumerate() {
                if !imdp.action_set().contains(action) {
                    return Err(BellmanError::PolicyActionOutsideSet { time: t, state: q });
                }
            }
        }
        Ok(())
    }
}

/// Per-backup solver telemetry.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BackupStats {
    /// Maximization problems solved (states × sorted indices, or one LP per
    /// state for the optimistic linear case).
    pub solves: usize,
    /// Iterations spent in iterative solvers.
    pub optimizer_iterations: usize,
    /// Largest finite optimality-certificate gap among the solves.
    pub max_certificate_gap: f64,
}

impl BackupStats {
    fn absorb(&mut self, r: &MaxResult) {
        self.solves += 1;
        self.optimizer_iterations += r.iterations;
        if r.certificate_gap.is_finite() {
            self.max_certificate_gap = self.max_certificate_gap.max(r.certificate_gap);
        }
    }
}

/// Result of one Bellman backup over all states.
#[derive(Clone, Debug)]
pub struct BackupResult {
    pub values: Vec<f64>,
    /// Maximizing action per state.
    pub actions: Vec<Vec<f64>>,
    /// Winning sorted index `j⋆` per state.
    pub winning_index: Vec<usize>,
    /// Per-state, per-sorted-index solver values (absent for the optimistic
    /// epigraph-LP path, which solves one LP per state).
    pub per_index_values: Option<Vec<Vec<f64>>>,
    /// Whether every solve carries an optimality certificate within the
    /// configured tolerance.
    pub certified: bool,
    pub stats: BackupStats,
}

/// Stats for one value-iteration step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationStats {
    /// The backup computing the value function at this time index.
    pub time_index: usize,
    pub wall_seconds: f64,
    pub certified: bool,
    pub stats: BackupStats,
}

/// Full output of value iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub horizon: usize,
    pub gamma: f64,
    pub tolerance: f64,
    pub shape_class: ShapeClass,
    /// All backups certified to the tolerance.
    pub certified: bool,
    /// Rigorous accumulation of per-backup solver tolerance over the
    /// horizon: `tol · Σ_{i=1..N} γ^i` (equals `N·tol` at `γ = 1`). The true
    /// optimal values lie within this slack of the reported ones when
    /// `certified` holds.
    pub certified_slack: f64,
    /// Value functions `V_0 … V_N`, indexed by time (`values[t].k == t`).
    pub values: Vec<ValueFunction>,
    pub policy: MarkovPolicy,
    pub iterations: Vec<IterationStats>,
}

impl SynthesisReport {
    pub fn v0(&self) -> &[f64] {
        &self.values[0].values
    }

    /// Zero volatile timing fields, making reports byte-reproducible.
    pub fn zero_timings(&mut self) {
        for it in &mut self.iterations {
            it.wall_seconds = 0.0;
        }
    }
}

/// Per-state optimistic-minus-pessimistic value gaps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    pub gaps: Vec<f64>,
    /// Both sides solved with certificates (the optimistic concave/convex
    /// case is never certified).
    pub certified: bool,
    pub optimistic: Vec<f64>,
    pub pessimistic: Vec<f64>,
}

/// Stable descending sort: returns the sorted values and the permutation
/// `perm` with `sorted[i] = v[perm[i]]`; ties keep original index order.
pub fn descending_permutation(v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..v.len()).collect();
    perm.sort_by(|&a, &b| {
        v[b].partial_cmp(&v[a])
            .expect("finite values")
            .then(a.cmp(&b))
    });
    let sorted = perm.iter().map(|&i| v[i]).collect();
    (sorted, perm)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Pessimistic,
    Optimistic,
}

fn build_objective(
    imdp: &Caimdp,
    q: usize,
    j: usize,
    sorted_v: &[f64],
    perm: &[usize],
    direction: Direction,
) -> Result<SmoothObjective, BellmanError> {
    let n = imdp.n_states();
    if j >= n {
        return Err(BellmanError::IndexOutOfRange { j, n });
    }
    if sorted_v.len() != n || perm.len() != n {
        return Err(BellmanError::InvalidInput(
            "sorted values and permutation must cover all states".into(),
        ));
    }
    debug_assert!(sorted_v.windows(2).all(|w| w[0] >= w[1]));
    let vj = sorted_v[j];
    let terms = (0..n).filter(|&i| i != j).map(|i| {
        let weight = sorted_v[i] - vj;
        let state = perm[i];
        let use_lower = match direction {
            Direction::Pessimistic => i < j,
            Direction::Optimistic => i > j,
        };
        let bound = if use_lower {
            imdp.lower(q, state)
        } else {
            imdp.upper(q, state)
        };
        (weight, bound)
    });
    Ok(SmoothObjective::weighted_bounds(
        terms,
        vj,
        imdp.action_dim(),
    ))
}

/// The `j`-th maximization objective of the pessimistic backup decomposition
/// for state `q`, built against a descending-sorted value vector.
///
/// Lower bounds of higher-valued states enter with nonnegative weights and
/// upper bounds of lower-valued states with nonpositive weights, so the
/// shape tag comes out linear, concave, or convex per the model's class.
pub fn mp_objective(
    imdp: &Caimdp,
    q: usize,
    j: usize,
    sorted_v: &[f64],
    perm: &[usize],
) -> Result<SmoothObjective, BellmanError> {
    build_objective(imdp, q, j, sorted_v, perm, Direction::Pessimistic)
}

/// Mirror objective for the optimistic (max-max) backup: upper bounds on
/// higher-valued states, lower bounds on lower-valued ones. The best-case
/// inner value at a fixed action is `min_j` over these.
pub fn optimistic_objective(
    imdp: &Caimdp,
    q: usize,
    j: usize,
    sorted_v: &[f64],
    perm: &[usize],
) -> Result<SmoothObjective, BellmanError> {
    build_objective(imdp, q, j, sorted_v, perm, Direction::Optimistic)
}

fn require_tractable(imdp: &Caimdp) -> Result<ShapeClass, BellmanError> {
    let class = imdp.classify();
    if class == ShapeClass::General {
        let offending = imdp
            .offending_bounds()
            .into_iter()
            .map(|(side, q, q2, shape)| format!("{side}[{q}][{q2}]: {shape:?}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(BellmanError::UnsupportedClass { offending });
    }
    Ok(class)
}

fn check_gamma(gamma: f64) -> Result<(), BellmanError> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(BellmanError::InvalidInput(
            "gamma must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

fn solve_pessimistic(
    obj: &SmoothObjective,
    set: &ActionSet,
    vertices: Option<&[Vec<f64>]>,
    class: ShapeClass,
    cfg: &OptimizerConfig,
) -> Result<MaxResult, BellmanError> {
    match class {
        ShapeClass::Linear | ShapeClass::ConvexConcave => Ok(max_over_vertices(
            obj,
            vertices.expect("vertices precomputed"),
        )?),
        ShapeClass::ConcaveConvex => {
            if set.supports_projection() {
                Ok(projected_gradient_max(obj, set, cfg)?)
            } else {
                Ok(frank_wolfe_max(
                    obj,
                    vertices.expect("vertices precomputed"),
                    cfg,
                )?)
            }
        }
        ShapeClass::General => unreachable!("rejected before dispatch"),
    }
}

fn backup_vertices(
    imdp: &Caimdp,
    class: ShapeClass,
) -> Result<Option<Vec<Vec<f64>>>, BellmanError> {
    let needed = matches!(class, ShapeClass::Linear | ShapeClass::ConvexConcave)
        || !imdp.action_set().supports_projection();
    if needed {
        Ok(Some(imdp.action_set().vertices()?))
    } else {
        Ok(None)
    }
}

/// One pessimistic Bellman backup: per state, `R(q) + γ·max_j max_a f_j(a)`.
pub fn pessimistic_backup(
    imdp: &Caimdp,
    v: &[f64],
    gamma: f64,
    cfg: &OptimizerConfig,
) -> Result<BackupResult, BellmanError> {
    check_gamma(gamma)?;
    cfg.validate()?;
    if v.len() != imdp.n_states() || v.iter().any(|x| !x.is_finite()) {
        return Err(BellmanError::InvalidInput(
            "value vector must be finite and cover all states".into(),
        ));
    }
    let class = require_tractable(imdp)?;
    let vertices = backup_vertices(imdp, class)?;
    let (sorted_v, perm) = descending_permutation(v);

    let n = imdp.n_states();
    let mut values = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut winning_index = Vec::with_capacity(n);
    let mut per_index_values = Vec::with_capacity(n);
    let mut stats = BackupStats::default();
    let mut certified = true;

    for q in 0..n {
        let mut best: Option<(f64, Vec<f64>, usize)> = None;
        let mut per_j = Vec::with_capacity(n);
        for j in 0..n {
            let obj = build_objective(imdp, q, j, &sorted_v, &perm, Direction::Pessimistic)?;
            let result =
                solve_pessimistic(&obj, imdp.action_set(), vertices.as_deref(), class, cfg)?;
            stats.absorb(&result);
            certified &= result.converged;
            per_j.push(result.value);
            let better = match &best {
                None => true,
                Some((value, _, _)) => result.value > *value,
            };
            if better {
                best = Some((result.value, result.argmax, j));
            }
        }
        let (value, action, jstar) = best.expect("at least one state");
        values.push(imdp.reward()[q] + gamma * value);
        actions.push(action);
        winning_index.push(jstar);
        per_index_values.push(per_j);
    }

    Ok(BackupResult {
        values,
        actions,
        winning_index,
        per_index_values: Some(per_index_values),
        certified,
        stats,
    })
}

/// One optimistic (max-max) Bellman backup: per state,
/// `R(q) + γ·max_a min_j h_j(a)`.
///
/// Linear class: epigraph LP over vertex weights, certified. Convex/concave
/// class: the `h_j` are concave, solved by projected supergradient ascent
/// with a linear-maximization gap certificate. Concave/convex class: the
/// problem is nonconvex; a multistart sampling estimate is returned with
/// `certified = false`.
pub fn optimistic_backup(
    imdp: &Caimdp,
    v: &[f64],
    gamma: f64,
    cfg: &OptimizerConfig,
) -> Result<BackupResult, BellmanError> {
    check_gamma(gamma)?;
    cfg.validate()?;
    if v.len() != imdp.n_states() || v.iter().any(|x| !x.is_finite()) {
        return Err(BellmanError::InvalidInput(
            "value vector must be finite and cover all states".into(),
        ));
    }
    let class = require_tractable(imdp)?;
    let (sorted_v, perm) = descending_permutation(v);
    let n = imdp.n_states();
    let set = imdp.action_set();

    let mut values = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut winning_index = Vec::with_capacity(n);
    let mut stats = BackupStats::default();
    let mut certified = true;
    let mut per_index_values: Option<Vec<Vec<f64>>> = match class {
        ShapeClass::Linear => None,
        _ => Some(Vec::with_capacity(n)),
    };

    let vertices = if class == ShapeClass::Linear {
        Some(set.vertices()?)
    } else {
        None
    };

    for q in 0..n {
        let objectives: Vec<SmoothObjective> = (0..n)
            .map(|j| build_objective(imdp, q, j, &sorted_v, &perm, Direction::Optimistic))
            .collect::<Result<_, _>>()?;
        let (result, jstar) = match class {
            ShapeClass::Linear => {
                let vs = vertices.as_ref().expect("linear class has vertices");
                let r = epigraph_lp_max(&objectives, vs)?;
                stats.solves += 1;
                let jstar = active_index(&objectives, &r.argmax);
                (r, jstar)
            }
            ShapeClass::ConvexConcave => {
                let r = maximize_concave_min(&objectives, set, cfg)?;
                stats.absorb(&r);
                certified &= r.converged;
                let jstar = active_index(&objectives, &r.argmax);
                (r, jstar)
            }
            ShapeClass::ConcaveConvex => {
                let r = estimate_max_min(&objectives, set, cfg);
                stats.absorb(&r);
                certified = false;
                let jstar = active_index(&objectives, &r.argmax);
                (r, jstar)
            }
            ShapeClass::General => unreachable!("rejected before dispatch"),
        };
        if let Some(per) = per_index_values.as_mut() {
            per.push(objectives.iter().map(|h| h.value(&result.argmax)).collect());
        }
        values.push(imdp.reward()[q] + gamma * result.value);
        actions.push(result.argmax);
        winning_index.push(jstar);
    }

    Ok(BackupResult {
        values,
        actions,
        winning_index,
        per_index_values,
        certified,
        stats,
    })
}

fn active_index(objectives: &[SmoothObjective], a: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (j, h) in objectives.iter().enumerate() {
        let v = h.value(a);
        if v < best_v {
            best_v = v;
            best = j;
        }
    }
    best
}

/// `max t` subject to `t ≤ Σ_v λ_v·h_j(v)` for every `j`, `λ` in the unit
/// simplex; exact for affine `h_j` since they commute with convex
/// combinations. Returns the maximizing action `Σ λ_v·v`.
fn epigraph_lp_max(
    objectives: &[SmoothObjective],
    vertices: &[Vec<f64>],
) -> Result<MaxResult, BellmanError> {
    let n_obj = objectives.len();
    let m = vertices.len();
    // Variables: t, λ_0..λ_{m-1}, s_0..s_{n_obj-1}.
    let n_vars = 1 + m + n_obj;
    let mut c = vec![0.0; n_vars];
    c[0] = 1.0;
    let mut a_eq = Vec::with_capacity(n_obj + 1);
    let mut b_eq = Vec::with_capacity(n_obj + 1);
    for (j, h) in objectives.iter().enumerate() {
        let mut row = vec![0.0; n_vars];
        row[0] = 1.0;
        for (vi, vertex) in vertices.iter().enumerate() {
            row[1 + vi] = -h.value(vertex);
        }
        row[1 + m + j] = 1.0;
        a_eq.push(row);
        b_eq.push(0.0);
    }
    let mut simplex_row = vec![0.0; n_vars];
    for vi in 0..m {
        simplex_row[1 + vi] = 1.0;
    }
    a_eq.push(simplex_row);
    b_eq.push(1.0);

    let mut bounds = vec![(0.0, f64::INFINITY); n_vars];
    bounds[0] = (f64::NEG_INFINITY, f64::INFINITY);
    let (value, x) = simplex_lp_max(&c, &a_eq, &b_eq, &bounds)?;

    let dim = vertices[0].len();
    let mut argmax = vec![0.0; dim];
    for (vi, vertex) in vertices.iter().enumerate() {
        let lambda = x[1 + vi];
        for d in 0..dim {
            argmax[d] += lambda * vertex[d];
        }
    }
    Ok(MaxResult {
        value,
        argmax,
        converged: true,
        certificate_gap: 0.0,
        iterations: 1,
        trace: vec![value],
    })
}

/// Maximize `φ(a) = min_j h_j(a)` for concave `h_j` via supergradient
/// ascent. Each iterate carries a rigorous certificate: with `g` a
/// supergradient of the active `h_j`, `φ* ≤ φ(a) + max_x gᵀ(x − a)`, the
/// maximum taken with the set's linear-maximization oracle.
fn maximize_concave_min(
    objectives: &[SmoothObjective],
    set: &ActionSet,
    cfg: &OptimizerConfig,
) -> Result<MaxResult, BellmanError> {
    let phi = |a: &[f64]| -> f64 {
        objectives
            .iter()
            .map(|h| h.value(a))
            .fold(f64::INFINITY, f64::min)
    };
    let diameter = set.diameter_bound().max(1e-12);
    let projectable = set.supports_projection();

    let center = set.center();
    let mut starts = vec![center];
    starts.extend(crate::sampling::quasi_in_set(
        set,
        cfg.multistart.saturating_sub(1),
        31,
    ));

    let mut best_value = f64::NEG_INFINITY;
    let mut best_a: Vec<f64> = set.center();
    let mut best_upper = f64::INFINITY;
    let mut converged = false;
    let mut total_iterations = 0;
    let mut trace = Vec::new();

    'starts: for start in starts {
        let mut a = start;
        let mut fa = phi(&a);
        for iter in 0..cfg.max_iterations {
            total_iterations += 1;
            if fa > best_value {
                best_value = fa;
                best_a = a.clone();
                trace.push(fa);
            }
            let jstar = active_index(objectives, &a);
            let g = objectives[jstar].gradient(&a);
            let (v_lin, lin_val) = set.linear_max(&g);
            let ga: f64 = g.iter().zip(&a).map(|(gi, x)| gi * x).sum();
            let gap = (lin_val - ga).max(0.0);
            best_upper = best_upper.min(fa + gap);
            if best_upper - best_value <= cfg.tolerance {
                converged = true;
                break 'starts;
            }

            // Candidate 1: exact line search toward the certificate vertex
            // (φ is concave along the segment).
            let c1 = segment_argmax(&phi, &a, &v_lin);
            // Candidate 2: projected supergradient with a diminishing step.
            let c2 = if projectable {
                let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                let step = diameter / (gnorm * ((iter + 1) as f64).sqrt());
                let probe: Vec<f64> = a.iter().zip(&g).map(|(x, gi)| x + step * gi).collect();
                Some(set.project(&probe)?)
            } else {
                None
            };
            let f1 = phi(&c1);
            let (next, fnext) = match c2 {
                Some(c2) => {
                    let f2 = phi(&c2);
                    if f2 > f1 {
                        (c2, f2)
                    } else {
                        (c1, f1)
                    }
                }
                None => (c1, f1),
            };
            a = next;
            fa = fnext;
        }
    }

    Ok(MaxResult {
        value: best_value,
        argmax: best_a,
        converged,
        certificate_gap: (best_upper - best_value).max(0.0),
        iterations: total_iterations,
        trace,
    })
}

/// Argmax of a concave function along the segment `[from, to]` by ternary
/// search.
fn segment_argmax(phi: &dyn Fn(&[f64]) -> f64, from: &[f64], to: &[f64]) -> Vec<f64> {
    let point = |s: f64| -> Vec<f64> {
        from.iter()
            .zip(to)
            .map(|(x, y)| x + s * (y - x))
            .collect()
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..70 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if phi(&point(m1)) < phi(&point(m2)) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mid = point(0.5 * (lo + hi));
    let candidates = [point(0.0), mid, point(1.0)];
    candidates
        .into_iter()
        .max_by(|a, b| phi(a).partial_cmp(&phi(b)).expect("finite"))
        .expect("nonempty")
}

/// Non-certified estimate of `max_a min_j h_j(a)` for the optimistic
/// concave/convex case (the feasible region of the joint problem is
/// nonconvex): quasi-random sampling followed by pattern-search refinement.
fn estimate_max_min(
    objectives: &[SmoothObjective],
    set: &ActionSet,
    cfg: &OptimizerConfig,
) -> MaxResult {
    let phi = |a: &[f64]| -> f64 {
        objectives
            .iter()
            .map(|h| h.value(a))
            .fold(f64::INFINITY, f64::min)
    };
    let mut candidates = crate::sampling::quasi_in_set(set, 512, 101);
    candidates.push(set.center());
    if let Ok(vs) = set.vertices() {
        candidates.extend(vs);
    }
    let mut scored: Vec<(f64, Vec<f64>)> =
        candidates.into_iter().map(|a| (phi(&a), a)).collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
    scored.truncate(cfg.multistart.max(1));

    let dim = set.dim();
    let diameter = set.diameter_bound().max(1e-12);
    let mut best = scored[0].clone();
    let mut evaluations = scored.len();
    for (_, start) in scored {
        let mut a = start;
        let mut fa = phi(&a);
        let mut radius = diameter / 8.0;
        while radius > 1e-7 * diameter {
            let mut improved = false;
            for d in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut probe = a.clone();
                    probe[d] += sign * radius;
                    let probe = match set.project(&probe) {
                        Ok(p) => p,
                        Err(_) => {
                            if set.contains(&probe) {
                                probe
                            } else {
                                continue;
                            }
                        }
                    };
                    evaluations += 1;
                    let fp = phi(&probe);
                    if fp > fa {
                        a = probe;
                        fa = fp;
                        improved = true;
                    }
                }
            }
            if !improved {
                radius *= 0.5;
            }
        }
        if fa > best.0 {
            best = (fa, a);
        }
    }

    MaxResult {
        value: best.0,
        argmax: best.1,
        converged: false,
        certificate_gap: f64::INFINITY,
        iterations: evaluations,
        trace: vec![best.0],
    }
}

fn run_value_iteration(
    imdp: &Caimdp,
    horizon: usize,
    gamma: f64,
    cfg: &OptimizerConfig,
    backup: impl Fn(&Caimdp, &[f64], f64, &OptimizerConfig) -> Result<BackupResult, BellmanError>,
) -> Result<SynthesisReport, BellmanError> {
    check_gamma(gamma)?;
    cfg.validate()?;
    let n = imdp.n_states();
    let mut values = vec![ValueFunction {
        k: horizon,
        values: imdp.reward().to_vec(),
    }];
    let mut policy_steps: Vec<Vec<Vec<f64>>> = Vec::with_capacity(horizon);
    let mut iterations = Vec::with_capacity(horizon);
    let mut certified = true;

    let mut current = imdp.reward().to_vec();
    for t in (0..horizon).rev() {
        let started = Instant::now();
        let result = backup(imdp, &current, gamma, cfg)?;
        debug_assert_eq!(result.values.len(), n);
        certified &= result.certified;
        iterations.push(IterationStats {
            time_index: t,
            wall_seconds: started.elapsed().as_secs_f64(),
            certified: result.certified,
            stats: result.stats.clone(),
        });
        policy_steps.push(result.actions);
        current = result.values;
        values.push(ValueFunction {
            k: t,
            values: current.clone(),
        });
    }
    // Computation ran from t = N−1 down to 0; store everything
    // time-ascending.
    values.reverse();
    policy_steps.reverse();
    iterations.reverse();

    let mut certified_slack = 0.0;
    let mut weight = 1.0;
    for _ in 0..horizon {
        weight *= gamma;
        certified_slack += cfg.tolerance * weight;
    }
    Ok(SynthesisReport {
        horizon,
        gamma,
        tolerance: cfg.tolerance,
        shape_class: imdp.classify(),
        certified,
        certified_slack,
        values,
        policy: MarkovPolicy::new(policy_steps),
        iterations,
    })
}

/// Pessimistic value iteration over `horizon` steps: `V_N = R` and
/// `V_t = R + γ·(pessimistic backup of V_{t+1})`. The policy records, for
/// each time step `t`, the maximizing action of the backup that produced
/// `V_t`; `V_0` is the optimal pessimistic reward for every initial state
/// simultaneously.
///
/// `gamma` may be any finite nonnegative factor; values above 1 are fine on
/// a finite horizon.
pub fn synthesize(
    imdp: &Caimdp,
    horizon: usize,
    gamma: f64,
    cfg: &OptimizerConfig,
) -> Result<SynthesisReport, BellmanError> {
    run_value_iteration(imdp, horizon, gamma, cfg, pessimistic_backup)
}

/// Optimistic (max-max) value iteration; see [`optimistic_backup`] for the
/// per-class certification story.
pub fn synthesize_optimistic(
    imdp: &Caimdp,
    horizon: usize,
    gamma: f64,
    cfg: &OptimizerConfig,
) -> Result<SynthesisReport, BellmanError> {
    run_value_iteration(imdp, horizon, gamma, cfg, optimistic_backup)
}

/// Value of a fixed Markov policy under the per-step worst-case (or
/// best-case) adversary.
pub fn evaluate_policy(
    imdp: &Caimdp,
    policy: &MarkovPolicy,
    gamma: f64,
    mode: AdversaryMode,
) -> Result<Vec<f64>, BellmanError> {
    check_gamma(gamma)?;
    policy.validate_against(imdp)?;
    let n = imdp.n_states();
    let mut v = imdp.reward().to_vec();
    for t in (0..policy.horizon).rev() {
        let mut next = Vec::with_capacity(n);
        for q in 0..n {
            let action = &policy.actions[t][q];
            let lo = imdp.eval_lower_row(q, action);
            let hi = imdp.eval_upper_row(q, action);
            let gamma_set = IntervalSimplex::new(lo, hi)
                .map_err(|source| BellmanError::Inner { state: q, source })?;
            let (_, inner) = match mode {
                AdversaryMode::Worst => inner_opt::worst_case_distribution(&gamma_set, &v),
                AdversaryMode::Best => inner_opt::best_case_distribution(&gamma_set, &v),
            }
            .map_err(|source| BellmanError::Inner { state: q, source })?;
            next.push(imdp.reward()[q] + gamma * inner);
        }
        v = next;
    }
    Ok(v)
}

/// Value iteration over an explicit finite action list: each backup takes
/// the best worst-case value over the listed actions (the sort-and-fill
/// inner solution, re-sorted once per iteration). With the action list equal
/// to the action-set vertices this matches continuous synthesis exactly on
/// the linear and convex/concave classes.
pub fn discrete_vi(
    imdp: &Caimdp,
    actions: &[Vec<f64>],
    horizon: usize,
    gamma: f64,
) -> Result<SynthesisReport, BellmanError> {
    check_gamma(gamma)?;
    if actions.is_empty() {
        return Err(BellmanError::InvalidInput(
            "discrete value iteration needs at least one action".into(),
        ));
    }
    for (i, a) in actions.iter().enumerate() {
        if !imdp.action_set().contains(a) {
            return Err(BellmanError::Model(ModelError::ActionOutsideSet {
                index: i,
            }));
        }
    }
    let n = imdp.n_states();

    // Bounds do not depend on the value function; evaluate once.
    let mut simplices: Vec<Vec<IntervalSimplex>> = Vec::with_capacity(actions.len());
    for a in actions {
        let mut per_state = Vec::with_capacity(n);
        for q in 0..n {
            let lo = imdp.eval_lower_row(q, a);
            let hi = imdp.eval_upper_row(q, a);
            per_state.push(
                IntervalSimplex::new(lo, hi)
                    .map_err(|source| BellmanError::Inner { state: q, source })?,
            );
        }
        simplices.push(per_state);
    }

    let mut values = vec![ValueFunction {
        k: horizon,
        values: imdp.reward().to_vec(),
    }];
    let mut policy_steps = Vec::with_capacity(horizon);
    let mut iterations = Vec::with_capacity(horizon);
    let mut current = imdp.reward().to_vec();
    for t in (0..horizon).rev() {
        let started = Instant::now();
        let order = inner_opt::ascending_order(&current);
        let mut next = Vec::with_capacity(n);
        let mut step_actions = Vec::with_capacity(n);
        let mut stats = BackupStats::default();
        for q in 0..n {
            let mut best_value = f64::NEG_INFINITY;
            let mut best_action = 0;
            for (ai, per_state) in simplices.iter().enumerate() {
                let g = &per_state[q];
                let value = inner_opt::allocation_value(g.lo(), g.hi(), &current, &order);
                stats.solves += 1;
                if value > best_value {
                    best_value = value;
                    best_action = ai;
                }
            }
            next.push(imdp.reward()[q] + gamma * best_value);
            step_actions.push(actions[best_action].clone());
        }
        iterations.push(IterationStats {
            time_index: t,
            wall_seconds: started.elapsed().as_secs_f64(),
            certified: true,
            stats,
        });
        policy_steps.push(step_actions);
        current = next;
        values.push(ValueFunction {
            k: t,
            values: current.clone(),
        });
    }
    values.reverse();
    policy_steps.reverse();
    iterations.reverse();

    Ok(SynthesisReport {
        horizon,
        gamma,
        tolerance: 0.0,
        shape_class: imdp.classify(),
        certified: true,
        certified_slack: 0.0,
        values,
        policy: MarkovPolicy::new(policy_steps),
        iterations,
    })
}

/// Suboptimality gap between optimistic value iteration on the upper-reward
/// model and pessimistic value iteration on the lower-reward model,
/// componentwise. The models must share states and action set; with
/// identical rewards the gap is nonnegative up to solver tolerance.
pub fn suboptimality_bound(
    lower_reward_model: &Caimdp,
    upper_reward_model: &Caimdp,
    horizon: usize,
    gamma: f64,
    cfg: &OptimizerConfig,
) -> Result<GapReport, BellmanError> {
    if lower_reward_model.n_states() != upper_reward_model.n_states() {
        return Err(BellmanError::ModelMismatch(format!(
            "{} vs {} states",
            lower_reward_model.n_states(),
            upper_reward_model.n_states()
        )));
    }
    if lower_reward_model.action_set() != upper_reward_model.action_set() {
        return Err(BellmanError::ModelMismatch("action sets differ".into()));
    }
    let pessimistic = synthesize(lower_reward_model, horizon, gamma, cfg)?;
    let optimistic = synthesize_optimistic(upper_reward_model, horizon, gamma, cfg)?;
    let gaps = optimistic
        .v0()
        .iter()
        .zip(pessimistic.v0())
        .map(|(o, p)| o - p)
        .collect();
    Ok(GapReport {
        gaps,
        certified: pessimistic.certified && optimistic.certified,
        optimistic: optimistic.v0().to_vec(),
        pessimistic: pessimistic.v0().to_vec(),
    })
}
