//! Transition-bound functions of the action variable.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Eigenvalue sign tolerance for the quadratic shape check.
pub const SHAPE_EIGEN_TOL: f64 = 1e-10;

/// Declared curvature of a function of the action variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Linear,
    Concave,
    Convex,
    Unknown,
}

impl Shape {
    pub fn is_concave_or_linear(self) -> bool {
        matches!(self, Shape::Concave | Shape::Linear)
    }

    pub fn is_convex_or_linear(self) -> bool {
        matches!(self, Shape::Convex | Shape::Linear)
    }

    /// Shape of `w * f` given the shape of `f`.
    pub(crate) fn scaled(self, w: f64) -> Shape {
        if w == 0.0 {
            Shape::Linear
        } else if w > 0.0 {
            self
        } else {
            match self {
                Shape::Concave => Shape::Convex,
                Shape::Convex => Shape::Concave,
                other => other,
            }
        }
    }

    /// Shape of `f + g`.
    pub(crate) fn plus(self, other: Shape) -> Shape {
        use Shape::*;
        match (self, other) {
            (Linear, s) | (s, Linear) => s,
            (Concave, Concave) => Concave,
            (Convex, Convex) => Convex,
            _ => Unknown,
        }
    }
}

pub type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type GradientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// The representation behind a [`BoundFunction`].
///
/// Quadratics use the convention `f(a) = ½ aᵀHa + cᵀa + d` with symmetric
/// `H`, so the gradient is `Ha + c`. Opaque bounds carry caller-supplied
/// re-entrant evaluators and are not serializable.
#[derive(Clone)]
pub enum BoundKind {
    Affine {
        coeffs: Vec<f64>,
        offset: f64,
    },
    Quadratic {
        hessian: Vec<Vec<f64>>,
        linear: Vec<f64>,
        offset: f64,
    },
    Opaque {
        value: Arc<ValueFn>,
        gradient: Arc<GradientFn>,
    },
}

/// One transition-probability bound as a function of the action, together
/// with its declared shape.
#[derive(Clone)]
pub struct BoundFunction {
    kind: BoundKind,
    shape: Shape,
}

/// Borrowed polynomial coefficients of an affine or quadratic bound.
pub(crate) struct PolyView<'a> {
    pub hessian: Option<&'a [Vec<f64>]>,
    pub linear: &'a [f64],
    pub offset: f64,
}

impl BoundFunction {
    /// Affine bound `cᵀa + d`; always shape `Linear`.
    pub fn affine(coeffs: Vec<f64>, offset: f64) -> Self {
        BoundFunction {
            kind: BoundKind::Affine { coeffs, offset },
            shape: Shape::Linear,
        }
    }

    /// Constant bound in an action space of dimension `dim`.
    pub fn constant(dim: usize, value: f64) -> Self {
        Self::affine(vec![0.0; dim], value)
    }

    /// Quadratic bound `½ aᵀHa + cᵀa + d` with a declared shape.
    ///
    /// `H` must be symmetric and its eigenvalue signs must match the declared
    /// shape (all `≤ SHAPE_EIGEN_TOL` for concave, all `≥ -SHAPE_EIGEN_TOL`
    /// for convex).
    pub fn quadratic(
        hessian: Vec<Vec<f64>>,
        linear: Vec<f64>,
        offset: f64,
        shape: Shape,
    ) -> Result<Self, ModelError> {
        let n = linear.len();
        if hessian.len() != n || hessian.iter().any(|row| row.len() != n) {
            return Err(ModelError::Invalid(format!(
                "quadratic hessian must be {n}x{n} to match the linear term"
            )));
        }
        let scale = hessian
            .iter()
            .flatten()
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (hessian[i][j] - hessian[j][i]).abs() > 1e-12 * (1.0 + scale) {
                    return Err(ModelError::Invalid(
                        "quadratic hessian must be symmetric".into(),
                    ));
                }
            }
        }
        if !matches!(shape, Shape::Concave | Shape::Convex) {
            return Err(ModelError::Invalid(
                "quadratic bounds must be declared concave or convex".into(),
            ));
        }
        let (min_eig, max_eig) = symmetric_eigen_range(&hessian);
        match shape {
            Shape::Concave if max_eig > SHAPE_EIGEN_TOL => {
                return Err(ModelError::ShapeCheck {
                    declared: shape,
                    detail: format!("largest hessian eigenvalue {max_eig:.3e} > 0"),
                })
            }
            Shape::Convex if min_eig < -SHAPE_EIGEN_TOL => {
                return Err(ModelError::ShapeCheck {
                    declared: shape,
                    detail: format!("smallest hessian eigenvalue {min_eig:.3e} < 0"),
                })
            }
            _ => {}
        }
        Ok(BoundFunction {
            kind: BoundKind::Quadratic {
                hessian,
                linear,
                offset,
            },
            shape,
        })
    }

    /// Bound backed by caller-supplied evaluators. The shape is trusted here
    /// and spot-checked when the containing model is built.
    pub fn opaque(value: Arc<ValueFn>, gradient: Arc<GradientFn>, shape: Shape) -> Self {
        BoundFunction {
            kind: BoundKind::Opaque { value, gradient },
            shape,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn kind(&self) -> &BoundKind {
        &self.kind
    }

    /// Action dimension, when the representation fixes one.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            BoundKind::Affine { coeffs, .. } => Some(coeffs.len()),
            BoundKind::Quadratic { linear, .. } => Some(linear.len()),
            BoundKind::Opaque { .. } => None,
        }
    }

    pub fn eval(&self, a: &[f64]) -> f64 {
        match &self.kind {
            BoundKind::Affine { coeffs, offset } => {
                offset + coeffs.iter().zip(a).map(|(c, x)| c * x).sum::<f64>()
            }
            BoundKind::Quadratic {
                hessian,
                linear,
                offset,
            } => {
                let mut v = *offset;
                for (i, row) in hessian.iter().enumerate() {
                    let mut hx = 0.0;
                    for (j, h) in row.iter().enumerate() {
                        hx += h * a[j];
                    }
                    v += 0.5 * a[i] * hx + linear[i] * a[i];
                }
                v
            }
            BoundKind::Opaque { value, .. } => value(a),
        }
    }

    pub fn gradient(&self, a: &[f64]) -> Vec<f64> {
        match &self.kind {
            BoundKind::Affine { coeffs, .. } => coeffs.clone(),
            BoundKind::Quadratic {
                hessian, linear, ..
            } => hessian
                .iter()
                .zip(linear)
                .map(|(row, c)| c + row.iter().zip(a).map(|(h, x)| h * x).sum::<f64>())
                .collect(),
            BoundKind::Opaque { gradient, .. } => gradient(a),
        }
    }

    pub(crate) fn poly_view(&self) -> Option<PolyView<'_>> {
        match &self.kind {
            BoundKind::Affine { coeffs, offset } => Some(PolyView {
                hessian: None,
                linear: coeffs,
                offset: *offset,
            }),
            BoundKind::Quadratic {
                hessian,
                linear,
                offset,
            } => Some(PolyView {
                hessian: Some(hessian),
                linear,
                offset: *offset,
            }),
            BoundKind::Opaque { .. } => None,
        }
    }
}

impl fmt::Debug for BoundFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            BoundKind::Affine { coeffs, offset } => f
                .debug_struct("Affine")
                .field("coeffs", coeffs)
                .field("offset", offset)
                .finish(),
            BoundKind::Quadratic {
                hessian,
                linear,
                offset,
            } => f
                .debug_struct("Quadratic")
                .field("hessian", hessian)
                .field("linear", linear)
                .field("offset", offset)
                .field("shape", &self.shape)
                .finish(),
            BoundKind::Opaque { .. } => f
                .debug_struct("Opaque")
                .field("shape", &self.shape)
                .finish(),
        }
    }
}

impl PartialEq for BoundFunction {
    fn eq(&self, other: &Self) -> bool {
        if self.shape != other.shape {
            return false;
        }
        match (&self.kind, &other.kind) {
            (
                BoundKind::Affine { coeffs: c1, offset: d1 },
                BoundKind::Affine { coeffs: c2, offset: d2 },
            ) => c1 == c2 && d1 == d2,
            (
                BoundKind::Quadratic {
                    hessian: h1,
                    linear: c1,
                    offset: d1,
                },
                BoundKind::Quadratic {
                    hessian: h2,
                    linear: c2,
                    offset: d2,
                },
            ) => h1 == h2 && c1 == c2 && d1 == d2,
            (
                BoundKind::Opaque { value: v1, .. },
                BoundKind::Opaque { value: v2, .. },
            ) => Arc::ptr_eq(v1, v2),
            _ => false,
        }
    }
}

fn symmetric_eigen_range(h: &[Vec<f64>]) -> (f64, f64) {
    let n = h.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (h[i][j] + h[j][i]));
    let eigen = m.symmetric_eigenvalues();
    let min = eigen.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eigen.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}
