//! Shared test fixtures: random instances of each shape class, built so the
//! interval-consistency constraints hold over the whole action set, plus a
//! few numeric helpers.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use caimdp_core::model::{
    validate_pointwise, ActionSet, BoundFunction, Caimdp, Shape, ShapeClass,
};
use caimdp_core::optimizers::SmoothObjective;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceClass {
    Linear,
    ConcaveConvex,
    ConvexConcave,
}

/// A random polytopic action set: a box or a V-polytope with up to
/// `max_vertices` points (the list may contain redundant interior points,
/// which is legal in a V-representation).
pub fn random_polytope(rng: &mut ChaCha8Rng, dim: usize, max_vertices: usize) -> ActionSet {
    if rng.gen_bool(0.5) {
        let lo: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..0.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.5..2.0)).collect();
        ActionSet::Box { lo, hi }
    } else {
        let count = rng.gen_range(2..=max_vertices.max(2));
        let vertices = (0..count)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        ActionSet::PolytopeV { vertices }
    }
}

/// A random convex (not necessarily polytopic) action set.
pub fn random_convex_set(rng: &mut ChaCha8Rng, dim: usize) -> ActionSet {
    match rng.gen_range(0..3) {
        0 => {
            let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            ActionSet::Ball {
                center,
                radius: rng.gen_range(0.3..1.0),
            }
        }
        1 if dim >= 2 => {
            // Ball × box cylinder.
            let ball_dim = dim - 1;
            let center: Vec<f64> = (0..ball_dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            ActionSet::Product {
                factors: vec![
                    ActionSet::Ball {
                        center,
                        radius: rng.gen_range(0.3..1.0),
                    },
                    ActionSet::Box {
                        lo: vec![0.0],
                        hi: vec![1.0],
                    },
                ],
            }
        }
        _ => {
            let lo: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..0.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.5..2.0)).collect();
            ActionSet::Box { lo, hi }
        }
    }
}

/// Row-stochastic base matrix with every entry capped so widening by
/// `(1 + 1.4·eps)` keeps upper bounds below 1.
fn base_matrix(rng: &mut ChaCha8Rng, n: usize, eps: f64) -> Vec<Vec<f64>> {
    let cap = (1.0 - 1e-9) / (1.0 + 1.4 * eps);
    (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            for x in &mut row {
                *x /= sum;
            }
            let max = row.iter().cloned().fold(0.0f64, f64::max);
            if n > 1 && max > cap {
                let theta = ((max - cap) / (max - 1.0 / n as f64) + 1e-12).min(1.0);
                for x in &mut row {
                    *x = (1.0 - theta) * *x + theta / n as f64;
                }
            }
            row
        })
        .collect()
}

fn bbox_corners(set: &ActionSet) -> Vec<Vec<f64>> {
    let (lo, hi) = set.bounding_box();
    let dim = lo.len();
    (0..(1usize << dim))
        .map(|mask| {
            (0..dim)
                .map(|d| if mask >> d & 1 == 1 { hi[d] } else { lo[d] })
                .collect()
        })
        .collect()
}

/// `coef·‖a − z‖² + level` in `½aᵀHa + cᵀa + d` form.
fn anchored_quadratic(coef: f64, z: &[f64], level: f64) -> BoundFunction {
    let dim = z.len();
    let mut hessian = vec![vec![0.0; dim]; dim];
    for (d, row) in hessian.iter_mut().enumerate() {
        row[d] = 2.0 * coef;
    }
    let linear: Vec<f64> = z.iter().map(|zi| -2.0 * coef * zi).collect();
    let offset = level + coef * z.iter().map(|zi| zi * zi).sum::<f64>();
    let shape = if coef < 0.0 { Shape::Concave } else { Shape::Convex };
    BoundFunction::quadratic(hessian, linear, offset, shape).expect("matching shape")
}

/// A random instance of the requested shape class over the given set,
/// guaranteed feasible over the whole set by construction and re-checked by
/// pointwise validation.
pub fn random_instance(
    class: InstanceClass,
    n_states: usize,
    set: ActionSet,
    seed: u64,
) -> Caimdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = rng.gen_range(0.1..0.35);
    let kappa = rng.gen_range(0.2..1.0);
    let n = n_states;
    let dim = set.dim();
    let base = base_matrix(&mut rng, n, eps);
    let (box_lo, box_hi) = set.bounding_box();
    let diameter = set.diameter_bound().max(1e-12);
    let reference = set.center();
    let reach = bbox_corners(&set)
        .iter()
        .map(|c| {
            c.iter()
                .zip(&reference)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0f64, f64::max)
        .max(1e-12);

    let draw_anchor = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim)
            .map(|d| {
                if box_hi[d] > box_lo[d] {
                    rng.gen_range(box_lo[d]..box_hi[d])
                } else {
                    box_lo[d]
                }
            })
            .collect()
    };

    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for q in 0..n {
        let mut lo_row = Vec::with_capacity(n);
        let mut hi_row = Vec::with_capacity(n);
        for q2 in 0..n {
            let b = base[q][q2];
            match class {
                InstanceClass::Linear => {
                    // Slopes small enough that |δᵀ(a − ref)| ≤ 0.4·b·eps over
                    // the whole set.
                    let slope = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                        let dir: Vec<f64> =
                            (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
                        let magnitude = rng.gen_range(0.0..0.4 * b * eps / reach);
                        dir.iter().map(|x| x * magnitude / norm).collect()
                    };
                    let lo_slope = slope(&mut rng);
                    let hi_slope = slope(&mut rng);
                    let lo_offset = b * (1.0 - eps)
                        - lo_slope
                            .iter()
                            .zip(&reference)
                            .map(|(s, r)| s * r)
                            .sum::<f64>();
                    let hi_offset = b * (1.0 + eps)
                        - hi_slope
                            .iter()
                            .zip(&reference)
                            .map(|(s, r)| s * r)
                            .sum::<f64>();
                    lo_row.push(BoundFunction::affine(lo_slope, lo_offset));
                    hi_row.push(BoundFunction::affine(hi_slope, hi_offset));
                }
                InstanceClass::ConcaveConvex => {
                    let scale = b * eps * kappa;
                    let d2 = diameter * diameter;
                    let z = draw_anchor(&mut rng);
                    let z2 = draw_anchor(&mut rng);
                    lo_row.push(anchored_quadratic(
                        -scale / d2,
                        &z,
                        b * (1.0 - eps) + scale,
                    ));
                    hi_row.push(anchored_quadratic(
                        scale / d2,
                        &z2,
                        b * (1.0 + eps) - scale,
                    ));
                }
                InstanceClass::ConvexConcave => {
                    let scale = b * eps * kappa;
                    let d2 = diameter * diameter;
                    let z = draw_anchor(&mut rng);
                    let z2 = draw_anchor(&mut rng);
                    // Convex lower rises away from its anchor; concave upper
                    // dips toward its own.
                    lo_row.push(anchored_quadratic(scale / d2, &z, b * (1.0 - eps)));
                    hi_row.push(anchored_quadratic(-scale / d2, &z2, b * (1.0 + eps)));
                }
            }
        }
        lower.push(lo_row);
        upper.push(hi_row);
    }
    let reward: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
    let imdp = Caimdp::new(set, lower, upper, reward).expect("constructed valid");

    let expected = match class {
        InstanceClass::Linear => {
            if imdp.action_set().is_polytopic() {
                ShapeClass::Linear
            } else {
                ShapeClass::ConcaveConvex
            }
        }
        InstanceClass::ConcaveConvex => ShapeClass::ConcaveConvex,
        InstanceClass::ConvexConcave => ShapeClass::ConvexConcave,
    };
    assert_eq!(imdp.classify(), expected);
    let report = validate_pointwise(&imdp, &imdp.default_validation_actions(64))
        .expect("actions in set");
    assert!(
        report.passed(),
        "constructed instance violates feasibility by {:.3e}",
        report.worst_violation()
    );
    imdp
}

/// Largest relative mismatch between the analytic gradient and central
/// finite differences over the given points.
pub fn max_gradient_fd_error(f: &SmoothObjective, points: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    let h = 1e-6;
    for a in points {
        let grad = f.gradient(a);
        for d in 0..a.len() {
            let mut plus = a.clone();
            plus[d] += h;
            let mut minus = a.clone();
            minus[d] -= h;
            let fd = (f.value(&plus) - f.value(&minus)) / (2.0 * h);
            let denom = 1.0f64.max(grad[d].abs());
            worst = worst.max((fd - grad[d]).abs() / denom);
        }
    }
    worst
}

/// Relabel states by `perm`: state `i` of the result is state `perm[i]` of
/// the input.
pub fn permute_states(imdp: &Caimdp, perm: &[usize]) -> Caimdp {
    let n = imdp.n_states();
    assert_eq!(perm.len(), n);
    let lower = (0..n)
        .map(|q| (0..n).map(|q2| imdp.lower(perm[q], perm[q2]).clone()).collect())
        .collect();
    let upper = (0..n)
        .map(|q| (0..n).map(|q2| imdp.upper(perm[q], perm[q2]).clone()).collect())
        .collect();
    let reward = perm.iter().map(|&q| imdp.reward()[q]).collect();
    Caimdp::new(imdp.action_set().clone(), lower, upper, reward).expect("permuted model valid")
}

/// The appendix parameterization of the per-index objective anchored at
/// sorted position `j` (0-based): lower bounds before the anchor, upper
/// bounds after.
pub fn lp4_value(lo: &[f64], hi: &[f64], sorted_v: &[f64], perm: &[usize], j: usize) -> f64 {
    let n = sorted_v.len();
    let mut value = sorted_v[j];
    for i in 0..n {
        if i < j {
            value += (sorted_v[i] - sorted_v[j]) * lo[perm[i]];
        } else if i > j {
            value += (sorted_v[i] - sorted_v[j]) * hi[perm[i]];
        }
    }
    value
}

/// The sibling parameterization anchored one position earlier: for 1-based
/// `j ∈ 2..=n`, the anchor sits at sorted position `j − 1` (1-based), the
/// lower sum stops at `j − 2` and the upper sum starts at `j`.
pub fn lp3_value(lo: &[f64], hi: &[f64], sorted_v: &[f64], perm: &[usize], j: usize) -> f64 {
    let n = sorted_v.len();
    let anchor = j - 2;
    let mut value = sorted_v[anchor];
    for i in 0..n {
        if i + 1 <= anchor {
            value += (sorted_v[i] - sorted_v[anchor]) * lo[perm[i]];
        } else if i >= j - 1 {
            value += (sorted_v[i] - sorted_v[anchor]) * hi[perm[i]];
        }
    }
    value
}

/// Deterministic shuffled permutation of `0..n`.
pub fn shuffled_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut state = seed.wrapping_add(0x9E3779B97F4A7C15);
    for i in (1..n).rev() {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        perm.swap(i, (state % (i as u64 + 1)) as usize);
    }
    perm
}
