//! Exact inner optimization over the interval probability simplex.
//!
//! At a fixed state-action pair the adversary picks any distribution `p`
//! with `lo ≤ p ≤ hi` and `Σp = 1`. Against a value vector the extremal
//! choice has a sort-and-fill structure: order states by value, saturate
//! upper bounds on one side of a pivot, lower bounds on the other, and give
//! the pivot whatever mass remains. This solves each inner problem exactly
//! in `O(n log n)`.

use thiserror::Error;

/// Tolerance accepted on the feasibility invariants when constructing an
/// [`IntervalSimplex`]; violations within it are repaired exactly.
pub const CONSTRUCTION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum InnerOptError {
    #[error("invalid interval simplex: {0}")]
    InvalidBounds(String),
    #[error("value vector has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("value vector must be finite")]
    NonFiniteValues,
}

/// Componentwise bounds on a probability distribution: the feasible set
/// `{p : lo ≤ p ≤ hi, Σp = 1}` evaluated at one state-action pair.
///
/// Construction requires `0 ≤ lo ≤ hi ≤ 1` and `Σlo ≤ 1 ≤ Σhi`; violations
/// up to [`CONSTRUCTION_TOL`] (evaluation noise) are repaired by clamping
/// and rescaling so the allocation invariants hold to machine precision,
/// anything larger is an error.
#[derive(Clone, Debug)]
pub struct IntervalSimplex {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl IntervalSimplex {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, InnerOptError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(InnerOptError::InvalidBounds(
                "bounds must be nonempty and of equal length".into(),
            ));
        }
        if lo.iter().chain(hi.iter()).any(|x| !x.is_finite()) {
            return Err(InnerOptError::InvalidBounds("bounds must be finite".into()));
        }
        for i in 0..lo.len() {
            if lo[i] < -CONSTRUCTION_TOL || hi[i] > 1.0 + CONSTRUCTION_TOL {
                return Err(InnerOptError::InvalidBounds(format!(
                    "bound {i} outside [0, 1]: lo = {}, hi = {}",
                    lo[i], hi[i]
                )));
            }
            if lo[i] > hi[i] + CONSTRUCTION_TOL {
                return Err(InnerOptError::InvalidBounds(format!(
                    "lo[{i}] = {} exceeds hi[{i}] = {}",
                    lo[i], hi[i]
                )));
            }
        }
        let mut lo: Vec<f64> = lo.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
        let mut hi: Vec<f64> = hi
            .iter()
            .zip(&lo)
            .map(|(&h, &l)| h.clamp(l, 1.0))
            .collect();
        let sum_lo: f64 = lo.iter().sum();
        let sum_hi: f64 = hi.iter().sum();
        if sum_lo > 1.0 + CONSTRUCTION_TOL {
            return Err(InnerOptError::InvalidBounds(format!(
                "lower bounds sum to {sum_lo} > 1"
            )));
        }
        if sum_hi < 1.0 - CONSTRUCTION_TOL {
            return Err(InnerOptError::InvalidBounds(format!(
                "upper bounds sum to {sum_hi} < 1"
            )));
        }
        if sum_lo > 1.0 {
            for x in &mut lo {
                *x /= sum_lo;
            }
        }
        if sum_hi < 1.0 {
            for x in &mut hi {
                *x = (*x / sum_hi).min(1.0);
            }
        }
        Ok(IntervalSimplex { lo, hi })
    }

    pub fn n(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

/// Stable ordering of `0..n` by ascending value (original index breaks ties).
pub(crate) fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .expect("finite values")
            .then(a.cmp(&b))
    });
    order
}

/// The sort-and-fill allocation along a fixed processing order: saturate
/// upper bounds early in the order, lower bounds late, pivot in between.
///
/// The pivot mass is one minus fresh partial sums (not accumulated
/// increments), which keeps `|Σp − 1|` at machine precision.
fn allocate(lo: &[f64], hi: &[f64], order: &[usize]) -> Vec<f64> {
    let n = order.len();
    // prefix_hi[k] = Σ_{t<k} hi, suffix_lo[k] = Σ_{t>=k} lo, both in order.
    let mut prefix_hi = vec![0.0; n + 1];
    for k in 0..n {
        prefix_hi[k + 1] = prefix_hi[k] + hi[order[k]];
    }
    let mut suffix_lo = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix_lo[k] = suffix_lo[k + 1] + lo[order[k]];
    }
    let mut pivot = n - 1;
    for m in 0..n {
        if prefix_hi[m + 1] + suffix_lo[m + 1] >= 1.0 {
            pivot = m;
            break;
        }
    }
    let mut p = vec![0.0; n];
    for (t, &i) in order.iter().enumerate() {
        p[i] = if t < pivot { hi[i] } else { lo[i] };
    }
    let m = order[pivot];
    p[m] = (1.0 - prefix_hi[pivot] - suffix_lo[pivot + 1]).clamp(lo[m], hi[m]);
    p
}

/// Value of the allocation along `order`, without materializing `p`.
pub(crate) fn allocation_value(lo: &[f64], hi: &[f64], v: &[f64], order: &[usize]) -> f64 {
    let n = order.len();
    let mut prefix_hi = vec![0.0; n + 1];
    for k in 0..n {
        prefix_hi[k + 1] = prefix_hi[k] + hi[order[k]];
    }
    let mut suffix_lo = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix_lo[k] = suffix_lo[k + 1] + lo[order[k]];
    }
    let mut pivot = n - 1;
    for m in 0..n {
        if prefix_hi[m + 1] + suffix_lo[m + 1] >= 1.0 {
            pivot = m;
            break;
        }
    }
    let m = order[pivot];
    let pm = (1.0 - prefix_hi[pivot] - suffix_lo[pivot + 1]).clamp(lo[m], hi[m]);
    let mut value = pm * v[m];
    for (t, &i) in order.iter().enumerate() {
        if t < pivot {
            value += hi[i] * v[i];
        } else if t > pivot {
            value += lo[i] * v[i];
        }
    }
    value
}

fn check_values(gamma: &IntervalSimplex, v: &[f64]) -> Result<(), InnerOptError> {
    if v.len() != gamma.n() {
        return Err(InnerOptError::DimensionMismatch {
            expected: gamma.n(),
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(InnerOptError::NonFiniteValues);
    }
    Ok(())
}

/// The feasible distribution minimizing `pᵀv`, with its value.
///
/// Mass is pushed onto low-value states: the allocation saturates upper
/// bounds in ascending-value order.
pub fn worst_case_distribution(
    gamma: &IntervalSimplex,
    v: &[f64],
) -> Result<(Vec<f64>, f64), InnerOptError> {
    check_values(gamma, v)?;
    let order = ascending_order(v);
    let p = allocate(&gamma.lo, &gamma.hi, &order);
    let value = p.iter().zip(v).map(|(pi, vi)| pi * vi).sum();
    Ok((p, value))
}

/// The feasible distribution maximizing `pᵀv`, with its value.
pub fn best_case_distribution(
    gamma: &IntervalSimplex,
    v: &[f64],
) -> Result<(Vec<f64>, f64), InnerOptError> {
    check_values(gamma, v)?;
    let mut order = ascending_order(v);
    order.reverse();
    let p = allocate(&gamma.lo, &gamma.hi, &order);
    let value = p.iter().zip(v).map(|(pi, vi)| pi * vi).sum();
    Ok((p, value))
}
