//! Dense two-phase primal simplex with Bland's rule.
//!
//! Small and self-contained: the LPs solved here (epigraph reformulations,
//! convex-hull membership) have at most a few dozen variables, so a dense
//! tableau is the right tool. Bland's rule guarantees termination on
//! degenerate problems.

use thiserror::Error;

const RC_EPS: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub(crate) enum LpError {
    #[error("infeasible linear program")]
    Infeasible,
    #[error("unbounded linear program")]
    Unbounded,
    #[error("invalid linear program: {0}")]
    Invalid(String),
}

/// maximize cᵀy subject to Ay = b, y ≥ 0.
struct Dictionary {
    m: usize,
    n: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
}

impl Dictionary {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[row][col];
        for x in self.a[row].iter_mut() {
            *x /= piv;
        }
        self.b[row] /= piv;
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let factor = self.a[r][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..self.n {
                self.a[r][j] -= factor * self.a[row][j];
            }
            self.a[r][col] = 0.0;
            self.b[r] -= factor * self.b[row];
        }
        self.is_basic[self.basis[row]] = false;
        self.is_basic[col] = true;
        self.basis[row] = col;
    }

    /// Primal simplex (maximization) with Bland's rule. `allowed` marks the
    /// columns eligible to enter the basis.
    fn run(&mut self, cost: &[f64], allowed: usize) -> Result<(), LpError> {
        // Bland's rule terminates; the cap only guards against tolerance
        // pathologies turning into a hang.
        let max_pivots = 50_000 + 200 * (self.m + self.n);
        for _ in 0..max_pivots {
            let mut y = vec![0.0; self.m];
            for r in 0..self.m {
                y[r] = cost[self.basis[r]];
            }
            let mut entering = None;
            for j in 0..allowed {
                if self.is_basic[j] {
                    continue;
                }
                let mut rc = cost[j];
                for r in 0..self.m {
                    if y[r] != 0.0 {
                        rc -= y[r] * self.a[r][j];
                    }
                }
                if rc > RC_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if self.a[r][col] > PIVOT_EPS {
                    let ratio = self.b[r] / self.a[r][col];
                    let better = match leaving {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-12
                                || (ratio < lratio + 1e-12 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leaving = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(LpError::Invalid("pivot limit exceeded".into()))
    }

    fn solution(&self, n_vars: usize) -> Vec<f64> {
        let mut y = vec![0.0; n_vars];
        for r in 0..self.m {
            if self.basis[r] < n_vars {
                y[self.basis[r]] = self.b[r].max(0.0);
            }
        }
        y
    }
}

/// Solve `maximize cᵀy s.t. Ay = b, y ≥ 0` and return `(value, y)`.
pub(crate) fn solve_standard(
    c: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
) -> Result<(f64, Vec<f64>), LpError> {
    let m = a.len();
    let n = c.len();
    for (r, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(LpError::Invalid(format!(
                "constraint row {r} has {} coefficients, expected {n}",
                row.len()
            )));
        }
    }
    if b.len() != m {
        return Err(LpError::Invalid("rhs length mismatch".into()));
    }
    if a.iter().flatten().any(|x| !x.is_finite())
        || b.iter().any(|x| !x.is_finite())
        || c.iter().any(|x| !x.is_finite())
    {
        return Err(LpError::Invalid("non-finite coefficient".into()));
    }

    // Phase 1: artificial variable per row, b flipped nonnegative.
    let mut dict = Dictionary {
        m,
        n: n + m,
        a: Vec::with_capacity(m),
        b: Vec::with_capacity(m),
        basis: (n..n + m).collect(),
        is_basic: vec![false; n + m],
    };
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = a[r].iter().map(|x| sign * x).collect();
        row.extend((0..m).map(|k| if k == r { 1.0 } else { 0.0 }));
        dict.a.push(row);
        dict.b.push(sign * b[r]);
        dict.is_basic[n + r] = true;
    }
    let mut phase1_cost = vec![0.0; n + m];
    for j in n..n + m {
        phase1_cost[j] = -1.0;
    }
    dict.run(&phase1_cost, n + m)?;
    let infeasibility: f64 = (0..dict.m)
        .filter(|&r| dict.basis[r] >= n)
        .map(|r| dict.b[r])
        .sum();
    let scale = 1.0 + b.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if infeasibility > 1e-8 * scale {
        return Err(LpError::Infeasible);
    }

    // Drive remaining artificials out of the basis; rows that cannot be
    // pivoted are redundant and dropped.
    let mut r = 0;
    while r < dict.m {
        if dict.basis[r] >= n {
            let col = (0..n).find(|&j| !dict.is_basic[j] && dict.a[r][j].abs() > 1e-7);
            match col {
                Some(j) => dict.pivot(r, j),
                None => {
                    dict.is_basic[dict.basis[r]] = false;
                    dict.a.swap_remove(r);
                    dict.b.swap_remove(r);
                    dict.basis.swap_remove(r);
                    dict.m -= 1;
                    continue;
                }
            }
        }
        r += 1;
    }

    // Phase 2 over the real columns only.
    let mut phase2_cost = c.to_vec();
    phase2_cost.extend(std::iter::repeat_n(0.0, m));
    dict.run(&phase2_cost, n)?;

    let y = dict.solution(n);
    let value = c.iter().zip(&y).map(|(ci, yi)| ci * yi).sum();
    Ok((value, y))
}

enum VarMap {
    Shifted { std: usize, base: f64 },
    Flipped { std: usize, base: f64 },
    Free { pos: usize, neg: usize },
}

/// Solve `maximize cᵀx s.t. A_eq x = b_eq, lo ≤ x ≤ hi` where bounds may be
/// infinite; returns `(value, x)`.
pub(crate) fn simplex_max_bounded(
    c: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
    bounds: &[(f64, f64)],
) -> Result<(f64, Vec<f64>), LpError> {
    let n = c.len();
    if bounds.len() != n {
        return Err(LpError::Invalid("bounds length mismatch".into()));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(LpError::Invalid(format!("invalid bounds on variable {i}")));
        }
    }

    let mut maps = Vec::with_capacity(n);
    let mut n_std = 0usize;
    let mut ranges: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shifted { std: n_std, base: lo });
            if hi.is_finite() {
                ranges.push((n_std, hi - lo));
            }
            n_std += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Flipped { std: n_std, base: hi });
            n_std += 1;
        } else {
            maps.push(VarMap::Free {
                pos: n_std,
                neg: n_std + 1,
            });
            n_std += 2;
        }
    }
    let n_total = n_std + ranges.len();
    let m_total = a_eq.len() + ranges.len();

    let mut a_std = vec![vec![0.0; n_total]; m_total];
    let mut b_std = vec![0.0; m_total];
    for (r, row) in a_eq.iter().enumerate() {
        if row.len() != n {
            return Err(LpError::Invalid(format!(
                "constraint row {r} has {} coefficients, expected {n}",
                row.len()
            )));
        }
        b_std[r] = b_eq[r];
        for (i, &coef) in row.iter().enumerate() {
            match maps[i] {
                VarMap::Shifted { std, base } => {
                    a_std[r][std] += coef;
                    b_std[r] -= coef * base;
                }
                VarMap::Flipped { std, base } => {
                    a_std[r][std] -= coef;
                    b_std[r] -= coef * base;
                }
                VarMap::Free { pos, neg } => {
                    a_std[r][pos] += coef;
                    a_std[r][neg] -= coef;
                }
            }
        }
    }
    for (k, &(std, range)) in ranges.iter().enumerate() {
        let r = a_eq.len() + k;
        a_std[r][std] = 1.0;
        a_std[r][n_std + k] = 1.0;
        b_std[r] = range;
    }

    let mut c_std = vec![0.0; n_total];
    let mut offset = 0.0;
    for (i, &ci) in c.iter().enumerate() {
        match maps[i] {
            VarMap::Shifted { std, base } => {
                c_std[std] += ci;
                offset += ci * base;
            }
            VarMap::Flipped { std, base } => {
                c_std[std] -= ci;
                offset += ci * base;
            }
            VarMap::Free { pos, neg } => {
                c_std[pos] += ci;
                c_std[neg] -= ci;
            }
        }
    }

    let (value, y) = solve_standard(&c_std, &a_std, &b_std)?;
    let x = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { std, base } => base + y[std],
            VarMap::Flipped { std, base } => base - y[std],
            VarMap::Free { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    Ok((value + offset, x))
}

/// Whether `x` is a convex combination of `vertices`, up to `tol`.
pub(crate) fn hull_contains(vertices: &[Vec<f64>], x: &[f64], tol: f64) -> bool {
    let k = vertices.len();
    let dim = x.len();
    let mut a = Vec::with_capacity(dim + 1);
    let mut b = Vec::with_capacity(dim + 1);
    for d in 0..dim {
        a.push(vertices.iter().map(|v| v[d]).collect::<Vec<f64>>());
        b.push(x[d]);
    }
    a.push(vec![1.0; k]);
    b.push(1.0);

    // Phase 1 residual: minimal total artificial mass measures constraint
    // violation; a point within tol of the hull passes.
    match phase1_residual(&a, &b) {
        Ok(residual) => {
            let scale = 1.0 + x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            residual <= tol.max(1e-9) * scale
        }
        Err(_) => false,
    }
}

fn phase1_residual(a: &[Vec<f64>], b: &[f64]) -> Result<f64, LpError> {
    let m = a.len();
    let n = if m > 0 { a[0].len() } else { 0 };
    let mut dict = Dictionary {
        m,
        n: n + m,
        a: Vec::with_capacity(m),
        b: Vec::with_capacity(m),
        basis: (n..n + m).collect(),
        is_basic: vec![false; n + m],
    };
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = a[r].iter().map(|x| sign * x).collect();
        row.extend((0..m).map(|k| if k == r { 1.0 } else { 0.0 }));
        dict.a.push(row);
        dict.b.push(sign * b[r]);
        dict.is_basic[n + r] = true;
    }
    let mut cost = vec![0.0; n + m];
    for j in n..n + m {
        cost[j] = -1.0;
    }
    dict.run(&cost, n + m)?;
    Ok((0..dict.m)
        .filter(|&r| dict.basis[r] >= n)
        .map(|r| dict.b[r].max(0.0))
        .sum())
}
