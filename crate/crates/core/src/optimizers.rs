//! Continuous maximization engines behind the per-state backup problems.
//!
//! Four entry points:
//! * [`max_over_vertices`]: exact scan for linear objectives over polytopes
//!   and convex maximization (vertex attainment).
//! * [`simplex_lp_max`]: dense two-phase simplex for epigraph LPs.
//! * [`projected_gradient_max`]: concave maximization over sets with a
//!   cheap projection oracle.
//! * [`frank_wolfe_max`]: concave maximization over V-polytopes, with a
//!   duality-gap certificate.

use std::sync::Arc;

use thiserror::Error;

use crate::lp;
use crate::model::{ActionSet, BoundFunction, GradientFn, Shape, ValueFn};

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("capability error: {0}")]
    Capability(String),
    #[error("objective shape {got:?} not supported; expected {expected}")]
    ShapeMismatch { expected: &'static str, got: Shape },
    #[error("infeasible linear program")]
    Infeasible,
    #[error("unbounded linear program")]
    Unbounded,
    #[error("invalid optimizer input: {0}")]
    InvalidInput(String),
}

impl From<lp::LpError> for OptimError {
    fn from(e: lp::LpError) -> Self {
        match e {
            lp::LpError::Infeasible => OptimError::Infeasible,
            lp::LpError::Unbounded => OptimError::Unbounded,
            lp::LpError::Invalid(msg) => OptimError::InvalidInput(msg),
        }
    }
}

/// Iterative-solver knobs. The defaults mirror the experimental setup this
/// crate reproduces: optimality tolerance 1e-4, five starts.
#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub multistart: usize,
    pub backtracking_factor: f64,
    pub sufficient_decrease: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            tolerance: 1e-4,
            max_iterations: 5000,
            multistart: 5,
            backtracking_factor: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

impl OptimizerConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        OptimizerConfig {
            tolerance,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.tolerance > 0.0) {
            return Err(OptimError::InvalidInput("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 || self.multistart == 0 {
            return Err(OptimError::InvalidInput(
                "iteration and multistart counts must be at least 1".into(),
            ));
        }
        if !(self.backtracking_factor > 0.0 && self.backtracking_factor < 1.0) {
            return Err(OptimError::InvalidInput(
                "backtracking factor must lie in (0, 1)".into(),
            ));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(OptimError::InvalidInput(
                "sufficient-decrease parameter must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

enum Repr {
    /// `½ aᵀHa + cᵀa + d` with `H` flat row-major.
    Quadratic {
        dim: usize,
        hessian: Vec<f64>,
        linear: Vec<f64>,
        offset: f64,
    },
    /// `constant + Σ w·bound(a)`; used when opaque bounds prevent
    /// aggregation.
    WeightedBounds {
        terms: Vec<(f64, BoundFunction)>,
        constant: f64,
    },
    Closure {
        value: Arc<ValueFn>,
        gradient: Arc<GradientFn>,
    },
}

/// A first-order-differentiable objective with a declared shape tag.
pub struct SmoothObjective {
    shape: Shape,
    repr: Repr,
}

impl SmoothObjective {
    pub fn from_closures(
        value: Arc<ValueFn>,
        gradient: Arc<GradientFn>,
        shape: Shape,
    ) -> Self {
        SmoothObjective {
            shape,
            repr: Repr::Closure { value, gradient },
        }
    }

    /// Quadratic objective `½ aᵀHa + cᵀa + d` with an explicitly declared
    /// shape tag.
    pub fn quadratic(hessian: &[Vec<f64>], linear: Vec<f64>, offset: f64, shape: Shape) -> Self {
        let dim = linear.len();
        let mut flat = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                flat[i * dim + j] = hessian[i][j];
            }
        }
        SmoothObjective {
            shape,
            repr: Repr::Quadratic {
                dim,
                hessian: flat,
                linear,
                offset,
            },
        }
    }

    pub fn affine(linear: Vec<f64>, offset: f64) -> Self {
        let dim = linear.len();
        SmoothObjective {
            shape: Shape::Linear,
            repr: Repr::Quadratic {
                dim,
                hessian: vec![0.0; dim * dim],
                linear,
                offset,
            },
        }
    }

    /// `constant + Σᵢ wᵢ·boundᵢ(a)`, aggregated into a single quadratic when
    /// every term is polynomial. Zero-weight terms are dropped, so the shape
    /// tag and the value are independent of how ties ordered the weights.
    pub fn weighted_bounds<'a>(
        terms: impl IntoIterator<Item = (f64, &'a BoundFunction)>,
        constant: f64,
        dim: usize,
    ) -> Self {
        let kept: Vec<(f64, &BoundFunction)> =
            terms.into_iter().filter(|(w, _)| *w != 0.0).collect();
        let mut shape = Shape::Linear;
        for (w, b) in &kept {
            shape = shape.plus(b.shape().scaled(*w));
        }
        if kept.iter().all(|(_, b)| b.poly_view().is_some()) {
            let mut hessian = vec![0.0; dim * dim];
            let mut linear = vec![0.0; dim];
            let mut offset = constant;
            for (w, b) in &kept {
                let view = b.poly_view().expect("checked polynomial");
                if let Some(h) = view.hessian {
                    for i in 0..dim {
                        for j in 0..dim {
                            hessian[i * dim + j] += w * h[i][j];
                        }
                    }
                }
                for (i, c) in view.linear.iter().enumerate() {
                    linear[i] += w * c;
                }
                offset += w * view.offset;
            }
            SmoothObjective {
                shape,
                repr: Repr::Quadratic {
                    dim,
                    hessian,
                    linear,
                    offset,
                },
            }
        } else {
            SmoothObjective {
                shape,
                repr: Repr::WeightedBounds {
                    terms: kept
                        .into_iter()
                        .map(|(w, b)| (w, b.clone()))
                        .collect(),
                    constant,
                },
            }
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn value(&self, a: &[f64]) -> f64 {
        match &self.repr {
            Repr::Quadratic {
                dim,
                hessian,
                linear,
                offset,
            } => {
                let mut v = *offset;
                for i in 0..*dim {
                    let row = &hessian[i * dim..(i + 1) * dim];
                    let mut hx = 0.0;
                    for j in 0..*dim {
                        hx += row[j] * a[j];
                    }
                    v += (0.5 * hx + linear[i]) * a[i];
                }
                v
            }
            Repr::WeightedBounds { terms, constant } => {
                constant + terms.iter().map(|(w, b)| w * b.eval(a)).sum::<f64>()
            }
            Repr::Closure { value, .. } => value(a),
        }
    }

    pub fn gradient(&self, a: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Quadratic {
                dim,
                hessian,
                linear,
                ..
            } => (0..*dim)
                .map(|i| {
                    let row = &hessian[i * dim..(i + 1) * dim];
                    linear[i] + row.iter().zip(a).map(|(h, x)| h * x).sum::<f64>()
                })
                .collect(),
            Repr::WeightedBounds { terms, .. } => {
                let dim = a.len();
                let mut g = vec![0.0; dim];
                for (w, b) in terms {
                    for (gi, bi) in g.iter_mut().zip(b.gradient(a)) {
                        *gi += w * bi;
                    }
                }
                g
            }
            Repr::Closure { gradient, .. } => gradient(a),
        }
    }
}

/// Outcome of a maximization run.
#[derive(Clone, Debug)]
pub struct MaxResult {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Whether the termination criterion (not the iteration cap) was met.
    pub converged: bool,
    /// Rigorous optimality slack where available: `f* ≤ value + gap`.
    /// Zero for exact vertex scans.
    pub certificate_gap: f64,
    pub iterations: usize,
    /// Objective values of accepted iterates (winning start only).
    pub trace: Vec<f64>,
}

/// Exact maximum of `f` over an explicit point list; ties break toward the
/// first attaining index.
pub fn max_over_vertices(
    f: &SmoothObjective,
    vertices: &[Vec<f64>],
) -> Result<MaxResult, OptimError> {
    if vertices.is_empty() {
        return Err(OptimError::Capability("empty vertex list".into()));
    }
    let mut best = 0;
    let mut best_value = f.value(&vertices[0]);
    for (i, v) in vertices.iter().enumerate().skip(1) {
        let value = f.value(v);
        if value > best_value {
            best_value = value;
            best = i;
        }
    }
    Ok(MaxResult {
        value: best_value,
        argmax: vertices[best].clone(),
        converged: true,
        certificate_gap: 0.0,
        iterations: vertices.len(),
        trace: vec![best_value],
    })
}

/// Maximize `cᵀx` subject to `A_eq x = b_eq` and per-variable bounds
/// (infinite bounds allowed). Dense two-phase simplex with Bland's rule;
/// returns the optimal value and a basic optimal solution.
pub fn simplex_lp_max(
    c: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
    bounds: &[(f64, f64)],
) -> Result<(f64, Vec<f64>), OptimError> {
    Ok(lp::simplex_max_bounded(c, a_eq, b_eq, bounds)?)
}

fn starts_for(set: &ActionSet, count: usize) -> Vec<Vec<f64>> {
    let center = set.center();
    let mut starts = vec![center.clone()];
    for p in crate::sampling::quasi_in_set(set, count.saturating_sub(1), 17) {
        // Pull sampled points slightly toward the center so starts are
        // interior even when projection lands on the boundary.
        starts.push(
            center
                .iter()
                .zip(&p)
                .map(|(c, x)| c + 0.9 * (x - c))
                .collect(),
        );
    }
    starts
}

fn require_concave(f: &SmoothObjective) -> Result<(), OptimError> {
    if !f.shape().is_concave_or_linear() {
        return Err(OptimError::ShapeMismatch {
            expected: "concave or linear",
            got: f.shape(),
        });
    }
    Ok(())
}

/// Projected gradient ascent for concave `f` over a set with a projection
/// oracle. Terminates when the unit-step fixed-point residual
/// `‖a − project(a + ∇f(a))‖` drops below `cfg.tolerance`; accepted iterates
/// are monotone under backtracking. Runs `cfg.multistart` starts and keeps
/// the best.
pub fn projected_gradient_max(
    f: &SmoothObjective,
    set: &ActionSet,
    cfg: &OptimizerConfig,
) -> Result<MaxResult, OptimError> {
    cfg.validate()?;
    require_concave(f)?;
    if !set.supports_projection() {
        return Err(OptimError::Capability(format!(
            "projected gradient needs a projection oracle; {set:?} has none"
        )));
    }
    let project = |x: &[f64]| set.project(x).expect("projection support checked");

    let mut best: Option<MaxResult> = None;
    for start in starts_for(set, cfg.multistart) {
        let mut a = project(&start);
        let mut fa = f.value(&a);
        let mut trace = vec![fa];
        let mut step = 1.0f64;
        let mut converged = false;
        let mut iterations = 0;
        let mut residual;
        loop {
            let g = f.gradient(&a);
            let fixed_point: Vec<f64> =
                project(&a.iter().zip(&g).map(|(x, gi)| x + gi).collect::<Vec<f64>>());
            residual = norm_diff(&a, &fixed_point);
            if residual <= cfg.tolerance {
                converged = true;
                break;
            }
            if iterations >= cfg.max_iterations {
                break;
            }
            iterations += 1;

            // Backtracking along the projection arc, warm-started from twice
            // the last accepted step.
            step = (step * 2.0).min(1e8);
            let mut accepted = false;
            while step > 1e-18 {
                let candidate: Vec<f64> = project(
                    &a.iter()
                        .zip(&g)
                        .map(|(x, gi)| x + step * gi)
                        .collect::<Vec<f64>>(),
                );
                let progress: f64 = g
                    .iter()
                    .zip(candidate.iter().zip(&a))
                    .map(|(gi, (c, x))| gi * (c - x))
                    .sum();
                let fc = f.value(&candidate);
                if fc >= fa + cfg.sufficient_decrease * progress && fc >= fa {
                    a = candidate;
                    fa = fc;
                    trace.push(fa);
                    accepted = true;
                    break;
                }
                step *= cfg.backtracking_factor;
            }
            if !accepted {
                // Numerical floor: no step yields progress.
                break;
            }
        }
        // Concave upper bound from the final gradient.
        let g = f.gradient(&a);
        let (_, lin_max) = set.linear_max(&g);
        let gap = (lin_max - g.iter().zip(&a).map(|(gi, x)| gi * x).sum::<f64>()).max(0.0);
        let candidate = MaxResult {
            value: fa,
            argmax: a,
            converged,
            certificate_gap: gap,
            iterations,
            trace,
        };
        best = Some(match best {
            Some(b) if b.value >= candidate.value => b,
            _ => candidate,
        });
    }
    Ok(best.expect("multistart >= 1"))
}

/// Frank-Wolfe for concave `f` over the convex hull of `vertices`.
/// Terminates when the duality gap `max_v ∇f(a)·(v − a)` certifies the value
/// to within `cfg.tolerance`.
pub fn frank_wolfe_max(
    f: &SmoothObjective,
    vertices: &[Vec<f64>],
    cfg: &OptimizerConfig,
) -> Result<MaxResult, OptimError> {
    cfg.validate()?;
    require_concave(f)?;
    if vertices.is_empty() {
        return Err(OptimError::Capability("empty vertex list".into()));
    }
    let hull = ActionSet::PolytopeV {
        vertices: vertices.to_vec(),
    };

    let mut best: Option<MaxResult> = None;
    for start in starts_for(&hull, cfg.multistart) {
        let mut a = start;
        let mut fa = f.value(&a);
        let mut trace = vec![fa];
        let mut converged = false;
        let mut iterations = 0;
        let gap = loop {
            let g = f.gradient(&a);
            let ga: f64 = g.iter().zip(&a).map(|(gi, x)| gi * x).sum();
            let mut target = 0;
            let mut target_val = f64::NEG_INFINITY;
            for (i, v) in vertices.iter().enumerate() {
                let gv: f64 = g.iter().zip(v).map(|(gi, x)| gi * x).sum();
                if gv > target_val {
                    target_val = gv;
                    target = i;
                }
            }
            let gap = (target_val - ga).max(0.0);
            if gap <= cfg.tolerance {
                converged = true;
                break gap;
            }
            if iterations >= cfg.max_iterations {
                break gap;
            }
            iterations += 1;

            let direction: Vec<f64> = vertices[target]
                .iter()
                .zip(&a)
                .map(|(v, x)| v - x)
                .collect();
            let mut gamma = 1.0f64;
            let mut accepted = false;
            while gamma > 1e-18 {
                let candidate: Vec<f64> = a
                    .iter()
                    .zip(&direction)
                    .map(|(x, d)| x + gamma * d)
                    .collect();
                let fc = f.value(&candidate);
                if fc >= fa + cfg.sufficient_decrease * gamma * gap && fc >= fa {
                    a = candidate;
                    fa = fc;
                    trace.push(fa);
                    accepted = true;
                    break;
                }
                gamma *= cfg.backtracking_factor;
            }
            if !accepted {
                break gap;
            }
        };
        let candidate = MaxResult {
            value: fa,
            argmax: a,
            converged,
            certificate_gap: gap,
            iterations,
            trace,
        };
        best = Some(match best {
            Some(b) if b.value >= candidate.value => b,
            _ => candidate,
        });
    }
    Ok(best.expect("multistart >= 1"))
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
