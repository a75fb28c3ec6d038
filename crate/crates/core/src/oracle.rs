//! Brute-force reference implementations used to validate the solvers at
//! desk scale. Deliberately slow and simple; nothing here shares code with
//! the solver paths it checks.

use itertools::Itertools;
use thiserror::Error;

use crate::inner_opt::IntervalSimplex;
use crate::model::{Caimdp, ModelError};
use crate::sampling;

/// Largest dimension accepted by the factorial-enumeration inner oracles.
pub const MAX_EXACT_DIM: usize = 10;

/// Policy-enumeration budget for [`oracle_synthesize`].
pub const MAX_POLICY_ENUMERATION: f64 = 1e6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("problem too large for the oracle: {0}")]
    TooLarge(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Inner(#[from] crate::inner_opt::InnerOptError),
}

/// Exact minimum of `pᵀv` over the interval simplex by enumerating every
/// ordering and pivot position of the sort-and-fill allocation structure.
pub fn oracle_inner_min(gamma: &IntervalSimplex, v: &[f64]) -> Result<f64, OracleError> {
    enumerate_allocations(gamma, v, true)
}

/// Exact maximum, same enumeration.
pub fn oracle_inner_max(gamma: &IntervalSimplex, v: &[f64]) -> Result<f64, OracleError> {
    enumerate_allocations(gamma, v, false)
}

fn enumerate_allocations(
    gamma: &IntervalSimplex,
    v: &[f64],
    minimize: bool,
) -> Result<f64, OracleError> {
    let n = gamma.n();
    if n > MAX_EXACT_DIM {
        return Err(OracleError::TooLarge(format!(
            "{n} states exceed the factorial-enumeration limit {MAX_EXACT_DIM}"
        )));
    }
    if v.len() != n {
        return Err(OracleError::InvalidInput(
            "value vector length mismatch".into(),
        ));
    }
    let lo = gamma.lo();
    let hi = gamma.hi();
    let mut best: Option<f64> = None;
    for order in (0..n).permutations(n) {
        for pivot in 0..n {
            let m = order[pivot];
            let mut mass = 1.0;
            let mut value = 0.0;
            for (t, &i) in order.iter().enumerate() {
                if t < pivot {
                    mass -= hi[i];
                    value += hi[i] * v[i];
                } else if t > pivot {
                    mass -= lo[i];
                    value += lo[i] * v[i];
                }
            }
            if mass < lo[m] - 1e-12 || mass > hi[m] + 1e-12 {
                continue;
            }
            let pm = mass.clamp(lo[m], hi[m]);
            value += pm * v[m];
            best = Some(match best {
                None => value,
                Some(b) => {
                    if minimize {
                        b.min(value)
                    } else {
                        b.max(value)
                    }
                }
            });
        }
    }
    best.ok_or_else(|| OracleError::InvalidInput("no feasible allocation found".into()))
}

/// How [`oracle_backup`] explores the action set.
pub enum OracleBackupMode {
    /// Evaluate at the action-set vertices; exact for the linear and
    /// convex/concave classes.
    Vertices,
    /// Evaluate on a lattice of roughly this many points; yields a certified
    /// lower bound on the backup plus a Lipschitz-times-mesh error envelope.
    Grid { target_points: usize },
}

/// Covering-radius certificate attached to grid-mode backups.
#[derive(Clone, Debug)]
pub struct GridCertificate {
    /// Every action of the set is within this distance of an evaluated one.
    pub covering_radius: f64,
    /// Per-state bound on the gradient norm of the (γ-scaled) backup
    /// objective over the bounding box; the true backup exceeds the grid
    /// value by at most `lipschitz × covering_radius`.
    pub lipschitz: Vec<f64>,
    /// Lipschitz constants were sampled (opaque bounds present) instead of
    /// derived from polynomial coefficients.
    pub lipschitz_estimated: bool,
}

/// One brute-force pessimistic backup.
#[derive(Clone, Debug)]
pub struct OracleBackup {
    pub values: Vec<f64>,
    pub actions_evaluated: usize,
    pub certificate: Option<GridCertificate>,
}

/// Pessimistic backup by exhaustive action evaluation: per state,
/// `R(q) + γ·max over evaluated actions of the exact inner minimum`.
pub fn oracle_backup(
    imdp: &Caimdp,
    v: &[f64],
    gamma: f64,
    mode: OracleBackupMode,
) -> Result<OracleBackup, OracleError> {
    let n = imdp.n_states();
    if v.len() != n {
        return Err(OracleError::InvalidInput(
            "value vector length mismatch".into(),
        ));
    }
    let (actions, radius) = match mode {
        OracleBackupMode::Vertices => (imdp.action_set().vertices()?, None),
        OracleBackupMode::Grid { target_points } => {
            if imdp.action_dim() > 3 {
                return Err(OracleError::TooLarge(format!(
                    "grid mode supports up to 3 action dimensions, got {}",
                    imdp.action_dim()
                )));
            }
            let grid = sampling::certified_grid(imdp.action_set(), target_points);
            (grid.points, grid.covering_radius)
        }
    };
    if actions.is_empty() {
        return Err(OracleError::InvalidInput("no actions to evaluate".into()));
    }

    let order = crate::inner_opt::ascending_order(v);
    let mut best = vec![f64::NEG_INFINITY; n];
    for a in &actions {
        for q in 0..n {
            let lo = imdp.eval_lower_row(q, a);
            let hi = imdp.eval_upper_row(q, a);
            let gamma_set = IntervalSimplex::new(lo, hi)?;
            let value =
                crate::inner_opt::allocation_value(gamma_set.lo(), gamma_set.hi(), v, &order);
            if value > best[q] {
                best[q] = value;
            }
        }
    }
    let values = (0..n)
        .map(|q| imdp.reward()[q] + gamma * best[q])
        .collect();

    let certificate = radius.map(|covering_radius| {
        let (lipschitz, lipschitz_estimated) = lipschitz_bounds(imdp, v, gamma, &actions);
        GridCertificate {
            covering_radius,
            lipschitz,
            lipschitz_estimated,
        }
    });

    Ok(OracleBackup {
        values,
        actions_evaluated: actions.len(),
        certificate,
    })
}

/// Per-state Lipschitz bound on `a ↦ γ·min_p pᵀv`: the inner value is a max
/// of functions whose gradients are weighted sums of bound gradients, so
/// `γ·(max v − min v)·Σ_{q'} sup‖∇bound‖` bounds its gradient norm.
/// Polynomial bounds get the exact supremum over the bounding box (their
/// gradient is affine, its norm maximal at a corner); opaque bounds fall
/// back to sampling on the grid.
fn lipschitz_bounds(
    imdp: &Caimdp,
    v: &[f64],
    gamma: f64,
    grid: &[Vec<f64>],
) -> (Vec<f64>, bool) {
    let n = imdp.n_states();
    let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - v.iter().cloned().fold(f64::INFINITY, f64::min);
    let (lo_box, hi_box) = imdp.action_set().bounding_box();
    let dim = imdp.action_dim();
    let corners: Vec<Vec<f64>> = (0..(1usize << dim))
        .map(|mask| {
            (0..dim)
                .map(|d| if mask >> d & 1 == 1 { hi_box[d] } else { lo_box[d] })
                .collect()
        })
        .collect();
    let sample_stride = (grid.len() / 1000).max(1);

    let mut estimated = false;
    let mut out = Vec::with_capacity(n);
    for q in 0..n {
        let mut total = 0.0;
        for q2 in 0..n {
            for bound in [imdp.lower(q, q2), imdp.upper(q, q2)] {
                let sup = if bound.poly_view().is_some() {
                    corners
                        .iter()
                        .map(|c| norm(&bound.gradient(c)))
                        .fold(0.0, f64::max)
                } else {
                    estimated = true;
                    grid.iter()
                        .step_by(sample_stride)
                        .map(|a| norm(&bound.gradient(a)))
                        .fold(0.0, f64::max)
                };
                total += sup;
            }
        }
        out.push(gamma * spread * total);
    }
    (out, estimated)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Optimal pessimistic values over a finite action list by exhaustive
/// enumeration of every time-indexed Markov policy, each evaluated under the
/// per-step worst-case adversary; returns the componentwise maximum.
pub fn oracle_synthesize(
    imdp: &Caimdp,
    actions: &[Vec<f64>],
    horizon: usize,
    gamma: f64,
) -> Result<Vec<f64>, OracleError> {
    let n = imdp.n_states();
    if actions.is_empty() {
        return Err(OracleError::InvalidInput("empty action list".into()));
    }
    let digits = n * horizon;
    let count = (actions.len() as f64).powi(digits as i32);
    if count > MAX_POLICY_ENUMERATION {
        return Err(OracleError::TooLarge(format!(
            "{count} policies exceed the enumeration budget {MAX_POLICY_ENUMERATION:.0}"
        )));
    }

    // Bounds are value-independent; evaluate per (action, state) once.
    let mut simplices = Vec::with_capacity(actions.len());
    for a in actions {
        let mut per_state = Vec::with_capacity(n);
        for q in 0..n {
            let lo = imdp.eval_lower_row(q, a);
            let hi = imdp.eval_upper_row(q, a);
            per_state.push(IntervalSimplex::new(lo, hi)?);
        }
        simplices.push(per_state);
    }

    let mut best = vec![f64::NEG_INFINITY; n];
    let mut assignment = vec![0usize; digits];
    loop {
        // assignment[t*n + q] indexes the action taken at time t, state q.
        let mut v = imdp.reward().to_vec();
        for t in (0..horizon).rev() {
            let mut next = Vec::with_capacity(n);
            for q in 0..n {
                let g = &simplices[assignment[t * n + q]][q];
                let (_, inner) = crate::inner_opt::worst_case_distribution(g, &v)?;
                next.push(imdp.reward()[q] + gamma * inner);
            }
            v = next;
        }
        for q in 0..n {
            if v[q] > best[q] {
                best[q] = v[q];
            }
        }

        let mut d = 0;
        loop {
            if d == digits {
                return Ok(best);
            }
            assignment[d] += 1;
            if assignment[d] < actions.len() {
                break;
            }
            assignment[d] = 0;
            d += 1;
        }
    }
}
