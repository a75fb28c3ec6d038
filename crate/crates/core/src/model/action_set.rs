//! Geometric description of the continuous action set and its oracles.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::lp;

/// Default tolerance for membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A compact convex action set.
///
/// Each variant implements the subset of the four oracles (`contains`,
/// `project`, `vertices`, `linear_max`) it supports; solvers request what
/// they need and fail fast with a capability error otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionSet {
    /// Axis-aligned box `{a : lo ≤ a ≤ hi}`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean ball `{a : ‖a − center‖₂ ≤ radius}`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Cartesian product of lower-dimensional sets, coordinates concatenated.
    Product { factors: Vec<ActionSet> },
    /// Convex hull of an explicit vertex list (V-representation).
    PolytopeV { vertices: Vec<Vec<f64>> },
}

impl ActionSet {
    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            ActionSet::Box { lo, .. } => lo.len(),
            ActionSet::Ball { center, .. } => center.len(),
            ActionSet::Product { factors } => factors.iter().map(|f| f.dim()).sum(),
            ActionSet::PolytopeV { vertices } => {
                vertices.first().map(|v| v.len()).unwrap_or(0)
            }
        }
    }

    /// Structural invariants: nonempty, consistent dimensions.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ActionSet::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(ModelError::Invalid(
                        "box bounds must be nonempty and of equal length".into(),
                    ));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(ModelError::Invalid(
                        "box requires lo <= hi componentwise".into(),
                    ));
                }
            }
            ActionSet::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(ModelError::Invalid("ball center must be nonempty".into()));
                }
                if !(*radius > 0.0) {
                    return Err(ModelError::Invalid("ball radius must be positive".into()));
                }
            }
            ActionSet::Product { factors } => {
                if factors.is_empty() {
                    return Err(ModelError::Invalid(
                        "product needs at least one factor".into(),
                    ));
                }
                for f in factors {
                    f.validate()?;
                }
            }
            ActionSet::PolytopeV { vertices } => {
                if vertices.is_empty() {
                    return Err(ModelError::Invalid(
                        "polytope needs at least one vertex".into(),
                    ));
                }
                let d = vertices[0].len();
                if d == 0 || vertices.iter().any(|v| v.len() != d) {
                    return Err(ModelError::Invalid(
                        "polytope vertices must share a positive dimension".into(),
                    ));
                }
            }
        }
        if self
            .bounding_box()
            .0
            .iter()
            .chain(self.bounding_box().1.iter())
            .any(|x| !x.is_finite())
        {
            return Err(ModelError::Invalid(
                "action set coordinates must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with_tol(x, MEMBERSHIP_TOL)
    }

    pub fn contains_with_tol(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            ActionSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            ActionSet::Ball { center, radius } => {
                let dist: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum::<f64>()
                    .sqrt();
                dist <= radius + tol
            }
            ActionSet::Product { factors } => {
                let mut off = 0;
                factors.iter().all(|f| {
                    let d = f.dim();
                    let ok = f.contains_with_tol(&x[off..off + d], tol);
                    off += d;
                    ok
                })
            }
            ActionSet::PolytopeV { vertices } => lp::hull_contains(vertices, x, tol),
        }
    }

    /// Whether the variant supports closed-form Euclidean projection.
    pub fn supports_projection(&self) -> bool {
        match self {
            ActionSet::Box { .. } | ActionSet::Ball { .. } => true,
            ActionSet::Product { factors } => factors.iter().all(|f| f.supports_projection()),
            ActionSet::PolytopeV { .. } => false,
        }
    }

    /// Euclidean projection onto the set. Boxes clamp per coordinate, balls
    /// rescale the offset from the center, products project factor-wise.
    /// V-polytopes have no closed form and report a capability error.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        match self {
            ActionSet::Box { lo, hi } => Ok(x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect()),
            ActionSet::Ball { center, radius } => {
                let offset: Vec<f64> = x.iter().zip(center).map(|(v, c)| v - c).collect();
                let norm: f64 = offset.iter().map(|d| d * d).sum::<f64>().sqrt();
                if norm <= *radius {
                    Ok(x.to_vec())
                } else {
                    Ok(center
                        .iter()
                        .zip(&offset)
                        .map(|(c, d)| c + d * radius / norm)
                        .collect())
                }
            }
            ActionSet::Product { factors } => {
                let mut out = Vec::with_capacity(self.dim());
                let mut off = 0;
                for f in factors {
                    let d = f.dim();
                    out.extend(f.project(&x[off..off + d])?);
                    off += d;
                }
                Ok(out)
            }
            ActionSet::PolytopeV { .. } => Err(ModelError::Capability {
                variant: "polytope_v",
                oracle: "project",
            }),
        }
    }

    /// Vertex list for polytopic variants; balls (and products containing
    /// one) report a capability error.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>, ModelError> {
        match self {
            ActionSet::Box { lo, hi } => {
                let d = lo.len();
                let mut out = Vec::with_capacity(1 << d);
                for mask in 0..(1usize << d) {
                    out.push(
                        (0..d)
                            .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                            .collect(),
                    );
                }
                Ok(out)
            }
            ActionSet::Ball { .. } => Err(ModelError::Capability {
                variant: "ball",
                oracle: "vertices",
            }),
            ActionSet::Product { factors } => {
                let mut out: Vec<Vec<f64>> = vec![Vec::new()];
                for f in factors {
                    let vs = f.vertices()?;
                    let mut next = Vec::with_capacity(out.len() * vs.len());
                    for prefix in &out {
                        for v in &vs {
                            let mut p = prefix.clone();
                            p.extend_from_slice(v);
                            next.push(p);
                        }
                    }
                    out = next;
                }
                Ok(out)
            }
            ActionSet::PolytopeV { vertices } => Ok(vertices.clone()),
        }
    }

    /// `argmax_{x in set} wᵀx` with its value; available on every variant.
    pub fn linear_max(&self, w: &[f64]) -> (Vec<f64>, f64) {
        match self {
            ActionSet::Box { lo, hi } => {
                let x: Vec<f64> = w
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(wi, (l, h))| if *wi >= 0.0 { *h } else { *l })
                    .collect();
                let v = dot(w, &x);
                (x, v)
            }
            ActionSet::Ball { center, radius } => {
                let norm: f64 = w.iter().map(|d| d * d).sum::<f64>().sqrt();
                if norm == 0.0 {
                    (center.clone(), 0.0)
                } else {
                    let x: Vec<f64> = center
                        .iter()
                        .zip(w)
                        .map(|(c, wi)| c + radius * wi / norm)
                        .collect();
                    let v = dot(w, &x);
                    (x, v)
                }
            }
            ActionSet::Product { factors } => {
                let mut x = Vec::with_capacity(self.dim());
                let mut value = 0.0;
                let mut off = 0;
                for f in factors {
                    let d = f.dim();
                    let (xf, vf) = f.linear_max(&w[off..off + d]);
                    x.extend(xf);
                    value += vf;
                    off += d;
                }
                (x, value)
            }
            ActionSet::PolytopeV { vertices } => {
                let mut best = 0;
                let mut best_v = f64::NEG_INFINITY;
                for (i, v) in vertices.iter().enumerate() {
                    let val = dot(w, v);
                    if val > best_v {
                        best_v = val;
                        best = i;
                    }
                }
                (vertices[best].clone(), best_v)
            }
        }
    }

    /// Smallest axis-aligned box containing the set.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ActionSet::Box { lo, hi } => (lo.clone(), hi.clone()),
            ActionSet::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            ActionSet::Product { factors } => {
                let mut lo = Vec::with_capacity(self.dim());
                let mut hi = Vec::with_capacity(self.dim());
                for f in factors {
                    let (l, h) = f.bounding_box();
                    lo.extend(l);
                    hi.extend(h);
                }
                (lo, hi)
            }
            ActionSet::PolytopeV { vertices } => {
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for v in vertices {
                    for i in 0..d {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// A cheap interior reference point: box midpoint, ball center, vertex
    /// mean.
    pub fn center(&self) -> Vec<f64> {
        match self {
            ActionSet::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect()
            }
            ActionSet::Ball { center, .. } => center.clone(),
            ActionSet::Product { factors } => {
                factors.iter().flat_map(|f| f.center()).collect()
            }
            ActionSet::PolytopeV { vertices } => {
                let d = self.dim();
                let mut c = vec![0.0; d];
                for v in vertices {
                    for i in 0..d {
                        c[i] += v[i];
                    }
                }
                for x in &mut c {
                    *x /= vertices.len() as f64;
                }
                c
            }
        }
    }

    /// Whether the set is a polytope (box, V-polytope, or product of such).
    pub fn is_polytopic(&self) -> bool {
        match self {
            ActionSet::Box { .. } | ActionSet::PolytopeV { .. } => true,
            ActionSet::Ball { .. } => false,
            ActionSet::Product { factors } => factors.iter().all(|f| f.is_polytopic()),
        }
    }

    /// Upper bound on the set diameter: the bounding-box diagonal.
    pub fn diameter_bound(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cylinder() -> ActionSet {
        ActionSet::Product {
            factors: vec![
                ActionSet::Ball {
                    center: vec![0.5, 0.5],
                    radius: 0.2f64.sqrt(),
                },
                ActionSet::Box {
                    lo: vec![0.0],
                    hi: vec![1.0],
                },
            ],
        }
    }

    #[test]
    fn box_projection_clamps() {
        let set = ActionSet::Box {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        assert_eq!(set.project(&[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn ball_projection_scales() {
        let set = ActionSet::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let p = set.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-12);
        assert!((p[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn cylinder_projection_is_factorwise() {
        let set = cylinder();
        let p = set.project(&[2.0, 0.5, 7.0]).unwrap();
        // First two coordinates land on the disk boundary toward (2, 0.5),
        // the third clamps to 1.
        let r = 0.2f64.sqrt();
        assert!((p[0] - (0.5 + r)).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
        assert_eq!(p[2], 1.0);
        assert!(set.contains(&p));
    }

    #[test]
    fn product_vertices_are_cartesian() {
        let set = ActionSet::Product {
            factors: vec![
                ActionSet::Box {
                    lo: vec![0.0],
                    hi: vec![1.0],
                },
                ActionSet::PolytopeV {
                    vertices: vec![vec![2.0], vec![3.0]],
                },
            ],
        };
        let mut vs = set.vertices().unwrap();
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            vs,
            vec![
                vec![0.0, 2.0],
                vec![0.0, 3.0],
                vec![1.0, 2.0],
                vec![1.0, 3.0]
            ]
        );
        assert!(cylinder().vertices().is_err());
    }

    #[test]
    fn polytope_membership_and_projection_capability() {
        let tri = ActionSet::PolytopeV {
            vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert!(tri.contains(&[0.25, 0.25]));
        assert!(!tri.contains(&[0.8, 0.8]));
        assert!(matches!(
            tri.project(&[0.5, 0.5]),
            Err(ModelError::Capability { .. })
        ));
    }

    #[test]
    fn linear_max_closed_forms() {
        let set = cylinder();
        let (x, v) = set.linear_max(&[1.0, 0.0, -1.0]);
        let r = 0.2f64.sqrt();
        assert!((x[0] - (0.5 + r)).abs() < 1e-12);
        assert!((x[1] - 0.5).abs() < 1e-12);
        assert_eq!(x[2], 0.0);
        assert!((v - (0.5 + r)).abs() < 1e-12);
    }

    #[test]
    fn projection_lands_in_set() {
        let set = cylinder();
        for i in 0..200u64 {
            let u = crate::sampling::halton_point(i + 1, 3);
            let x = vec![u[0] * 4.0 - 2.0, u[1] * 4.0 - 2.0, u[2] * 4.0 - 2.0];
            let p = set.project(&x).unwrap();
            assert!(set.contains_with_tol(&p, 1e-9));
        }
    }
}
