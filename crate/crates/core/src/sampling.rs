//! Deterministic quasi-random sampling and certified grids over action sets.
//!
//! Everything here is reproducible: quasi-random points come from Halton
//! sequences, and pseudo-random draws take an explicit RNG.

use rand::Rng;

use crate::model::ActionSet;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical-inverse of `index` in the given base, in `[0, 1)`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut denom = 1.0;
    while index > 0 {
        denom *= base as f64;
        inv += (index % base) as f64 / denom;
        index /= base;
    }
    inv
}

/// The `index`-th Halton point in `[0, 1)^dim` (1-based index; index 0 is the
/// all-zeros point and is skipped by the samplers below).
pub fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    assert!(
        dim <= PRIMES.len(),
        "halton sampling supports up to {} dimensions",
        PRIMES.len()
    );
    (0..dim).map(|d| radical_inverse(index, PRIMES[d])).collect()
}

fn lerp_box(unit: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    unit.iter()
        .zip(lo.iter().zip(hi))
        .map(|(u, (l, h))| l + u * (h - l))
        .collect()
}

/// `count` deterministic quasi-random points inside the set.
///
/// Box, ball and product sets get Halton points in the bounding box projected
/// into the set; V-polytopes get Halton-weighted convex combinations of their
/// vertices. Points are deterministic for a fixed `(set, count, skip)`.
pub fn quasi_in_set(set: &ActionSet, count: usize, skip: u64) -> Vec<Vec<f64>> {
    let dim = set.dim();
    let mut out = Vec::with_capacity(count);
    if set.supports_projection() {
        let (lo, hi) = set.bounding_box();
        for i in 0..count {
            let u = halton_point(skip + 1 + i as u64, dim);
            let candidate = lerp_box(&u, &lo, &hi);
            if set.contains(&candidate) {
                out.push(candidate);
            } else {
                out.push(set.project(&candidate).expect("projectable set"));
            }
        }
    } else {
        let vertices = set
            .vertices()
            .expect("sets without projection expose vertices");
        for i in 0..count {
            let w = halton_point(skip + 1 + i as u64, vertices.len().min(PRIMES.len()));
            out.push(convex_combination(&vertices, &w));
        }
    }
    out
}

fn convex_combination(vertices: &[Vec<f64>], raw_weights: &[f64]) -> Vec<f64> {
    let dim = vertices[0].len();
    // Chunk long vertex lists so the weight dimension stays within the Halton
    // prime table; remaining vertices get reused cyclically.
    let mut weights: Vec<f64> = (0..vertices.len())
        .map(|i| 0.05 + raw_weights[i % raw_weights.len()])
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut point = vec![0.0; dim];
    for (w, v) in weights.iter().zip(vertices) {
        for d in 0..dim {
            point[d] += w * v[d];
        }
    }
    point
}

/// Draw `count` uniform points from the set by rejection sampling in its
/// bounding box; acceptance is verified by `contains`.
pub fn uniform_in_set<R: Rng>(
    set: &ActionSet,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, String> {
    const MAX_TRIES_PER_POINT: usize = 100_000;
    let (lo, hi) = set.bounding_box();
    let dim = set.dim();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut accepted = None;
        for _ in 0..MAX_TRIES_PER_POINT {
            let candidate: Vec<f64> = (0..dim)
                .map(|d| {
                    if hi[d] > lo[d] {
                        rng.gen_range(lo[d]..hi[d])
                    } else {
                        lo[d]
                    }
                })
                .collect();
            if set.contains(&candidate) {
                accepted = Some(candidate);
                break;
            }
        }
        match accepted {
            Some(a) => out.push(a),
            None => {
                return Err(format!(
                    "rejection sampling failed after {MAX_TRIES_PER_POINT} tries; \
                     the set may have zero volume in its bounding box"
                ))
            }
        }
    }
    Ok(out)
}

/// A grid over the set with a certified covering radius.
pub struct CertifiedGrid {
    pub points: Vec<Vec<f64>>,
    /// Every point of the set is within this distance of some grid point.
    /// `None` when the set has no projection oracle (V-polytopes), in which
    /// case only the in-box lattice points that pass `contains` are kept and
    /// no covering guarantee is made.
    pub covering_radius: Option<f64>,
}

/// Lattice over the bounding box with roughly `target` points. Lattice nodes
/// outside the set are projected into it when a projection oracle exists, so
/// the covering radius of the returned points over the whole set is at most
/// half the lattice cell diagonal (projection onto a convex set does not
/// increase the distance to any point of the set).
pub fn certified_grid(set: &ActionSet, target: usize) -> CertifiedGrid {
    let dim = set.dim();
    let (lo, hi) = set.bounding_box();
    let sides: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
    let positive: Vec<usize> = (0..dim).filter(|&d| sides[d] > 0.0).collect();
    let per_dim = if positive.is_empty() {
        1usize
    } else {
        (target as f64)
            .powf(1.0 / positive.len() as f64)
            .round()
            .max(2.0) as usize
    };
    let counts: Vec<usize> = (0..dim)
        .map(|d| if sides[d] > 0.0 { per_dim } else { 1 })
        .collect();

    let mut cell_sq = 0.0;
    for d in 0..dim {
        if counts[d] > 1 {
            let delta = sides[d] / (counts[d] - 1) as f64;
            cell_sq += delta * delta;
        }
    }
    let radius = 0.5 * cell_sq.sqrt();

    let total: usize = counts.iter().product();
    let mut points = Vec::with_capacity(total);
    let projectable = set.supports_projection();
    let mut index = vec![0usize; dim];
    for _ in 0..total {
        let point: Vec<f64> = (0..dim)
            .map(|d| {
                if counts[d] == 1 {
                    lo[d]
                } else {
                    lo[d] + sides[d] * index[d] as f64 / (counts[d] - 1) as f64
                }
            })
            .collect();
        if set.contains(&point) {
            points.push(point);
        } else if projectable {
            points.push(set.project(&point).expect("projectable set"));
        }
        for d in 0..dim {
            index[d] += 1;
            if index[d] < counts[d] {
                break;
            }
            index[d] = 0;
        }
    }

    CertifiedGrid {
        points,
        covering_radius: projectable.then_some(radius),
    }
}
