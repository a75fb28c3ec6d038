//! Model-file serialization.
//!
//! Top-level schema:
//!
//! ```json
//! {
//!   "n_states": 2,
//!   "n_actions_dim": 3,
//!   "action_set": {"type": "box", "lo": [0.0, 0.0, 0.0], "hi": [1.0, 1.0, 1.0]},
//!   "lower": [[{"kind": "affine", "c": [0.0, 0.0, 0.0], "d": 0.5}, ...], ...],
//!   "upper": [[{"kind": "quadratic", "H": [[...]], "c": [...], "d": 0.5,
//!               "shape": "convex"}, ...], ...],
//!   "reward": [1.0, 2.0]
//! }
//! ```
//!
//! Quadratic bounds read `½ aᵀHa + cᵀa + d`. Opaque bounds have no file
//! representation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActionSet, BoundFunction, Caimdp, ModelError, Shape};

#[derive(Serialize, Deserialize)]
struct ModelFile {
    n_states: usize,
    n_actions_dim: usize,
    action_set: ActionSet,
    lower: Vec<Vec<BoundRepr>>,
    upper: Vec<Vec<BoundRepr>>,
    reward: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum BoundRepr {
    Affine {
        c: Vec<f64>,
        d: f64,
    },
    Quadratic {
        #[serde(rename = "H")]
        h: Vec<Vec<f64>>,
        c: Vec<f64>,
        d: f64,
        shape: QuadraticShape,
    },
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum QuadraticShape {
    Concave,
    Convex,
}

impl BoundRepr {
    fn into_bound(self, side: &str, q: usize, q2: usize) -> Result<BoundFunction, ModelError> {
        match self {
            BoundRepr::Affine { c, d } => Ok(BoundFunction::affine(c, d)),
            BoundRepr::Quadratic { h, c, d, shape } => {
                let shape = match shape {
                    QuadraticShape::Concave => Shape::Concave,
                    QuadraticShape::Convex => Shape::Convex,
                };
                BoundFunction::quadratic(h, c, d, shape).map_err(|e| {
                    ModelError::Invalid(format!("{side}[{q}][{q2}]: {e}"))
                })
            }
        }
    }

    fn from_bound(bound: &BoundFunction) -> Result<Self, ModelError> {
        let view = bound.poly_view().ok_or(ModelError::Unserializable)?;
        Ok(match view.hessian {
            None => BoundRepr::Affine {
                c: view.linear.to_vec(),
                d: view.offset,
            },
            Some(h) => BoundRepr::Quadratic {
                h: h.to_vec(),
                c: view.linear.to_vec(),
                d: view.offset,
                shape: match bound.shape() {
                    Shape::Concave => QuadraticShape::Concave,
                    Shape::Convex => QuadraticShape::Convex,
                    other => {
                        return Err(ModelError::Invalid(format!(
                            "quadratic bound with unexpected shape {other:?}"
                        )))
                    }
                },
            },
        })
    }
}

fn matrix_from_reprs(
    reprs: Vec<Vec<BoundRepr>>,
    side: &str,
) -> Result<Vec<Vec<BoundFunction>>, ModelError> {
    reprs
        .into_iter()
        .enumerate()
        .map(|(q, row)| {
            row.into_iter()
                .enumerate()
                .map(|(q2, repr)| repr.into_bound(side, q, q2))
                .collect()
        })
        .collect()
}

fn build(file: ModelFile) -> Result<Caimdp, ModelError> {
    if file.action_set.dim() != file.n_actions_dim {
        return Err(ModelError::Invalid(format!(
            "n_actions_dim = {} but the action set is {}-dimensional",
            file.n_actions_dim,
            file.action_set.dim()
        )));
    }
    if file.reward.len() != file.n_states {
        return Err(ModelError::Invalid(format!(
            "n_states = {} but reward has {} entries",
            file.n_states,
            file.reward.len()
        )));
    }
    let lower = matrix_from_reprs(file.lower, "lower")?;
    let upper = matrix_from_reprs(file.upper, "upper")?;
    Caimdp::new(file.action_set, lower, upper, file.reward)
}

fn to_file(imdp: &Caimdp) -> Result<ModelFile, ModelError> {
    let n = imdp.n_states();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for q in 0..n {
        let mut lo_row = Vec::with_capacity(n);
        let mut hi_row = Vec::with_capacity(n);
        for q2 in 0..n {
            lo_row.push(BoundRepr::from_bound(imdp.lower(q, q2))?);
            hi_row.push(BoundRepr::from_bound(imdp.upper(q, q2))?);
        }
        lower.push(lo_row);
        upper.push(hi_row);
    }
    Ok(ModelFile {
        n_states: n,
        n_actions_dim: imdp.action_dim(),
        action_set: imdp.action_set().clone(),
        lower,
        upper,
        reward: imdp.reward().to_vec(),
    })
}

/// Parse a model from a JSON string. Parse failures name the offending field
/// path.
pub fn model_from_json(json: &str) -> Result<Caimdp, ModelError> {
    let mut de = serde_json::Deserializer::from_str(json);
    let file: ModelFile =
        serde_path_to_error::deserialize(&mut de).map_err(|e| ModelError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    build(file)
}

/// Serialize a model to JSON. Fails on opaque bounds.
pub fn model_to_json(imdp: &Caimdp) -> Result<String, ModelError> {
    let file = to_file(imdp)?;
    serde_json::to_string_pretty(&file)
        .map_err(|e| ModelError::Invalid(format!("serialization failed: {e}")))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Caimdp, ModelError> {
    let json = fs::read_to_string(path.as_ref())?;
    model_from_json(&json)
}

pub fn save_model(imdp: &Caimdp, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let json = model_to_json(imdp)?;
    fs::write(path.as_ref(), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn two_state_affine() -> Caimdp {
        let set = ActionSet::Box {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        let lo = |c1: f64, c2: f64, d: f64| BoundFunction::affine(vec![c1, c2], d);
        let lower = vec![
            vec![lo(0.01, -0.01, 0.3), lo(0.0, 0.0, 0.4)],
            vec![lo(0.0, 0.02, 0.2), lo(-0.02, 0.0, 0.5)],
        ];
        let upper = vec![
            vec![lo(0.01, -0.01, 0.5), lo(0.0, 0.0, 0.6)],
            vec![lo(0.0, 0.02, 0.4), lo(-0.02, 0.0, 0.7)],
        ];
        Caimdp::new(set, lower, upper, vec![1.0, 0.5]).unwrap()
    }

    #[test]
    fn round_trip_preserves_structure() {
        let imdp = two_state_affine();
        let json = model_to_json(&imdp).unwrap();
        let loaded = model_from_json(&json).unwrap();
        assert_eq!(loaded.n_states(), 2);
        assert_eq!(loaded.action_set(), imdp.action_set());
        assert_eq!(loaded.reward(), imdp.reward());
        for q in 0..2 {
            for q2 in 0..2 {
                assert_eq!(loaded.lower(q, q2), imdp.lower(q, q2));
                assert_eq!(loaded.upper(q, q2), imdp.upper(q, q2));
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let imdp = two_state_affine();
        save_model(&imdp, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.reward(), imdp.reward());
    }

    #[test]
    fn parse_error_names_field_path() {
        let json = r#"{
            "n_states": 1,
            "n_actions_dim": 1,
            "action_set": {"type": "box", "lo": [0.0], "hi": [1.0]},
            "lower": [[{"kind": "affine", "c": "oops", "d": 0.5}]],
            "upper": [[{"kind": "affine", "c": [0.0], "d": 0.5}]],
            "reward": [1.0]
        }"#;
        let err = model_from_json(json).unwrap_err();
        match err {
            ModelError::Parse { path, .. } => assert!(path.contains("lower"), "{path}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_reward_fails_validation() {
        let json = r#"{
            "n_states": 1,
            "n_actions_dim": 1,
            "action_set": {"type": "box", "lo": [0.0], "hi": [1.0]},
            "lower": [[{"kind": "affine", "c": [0.0], "d": 1.0}]],
            "upper": [[{"kind": "affine", "c": [0.0], "d": 1.0}]],
            "reward": [-1.0]
        }"#;
        let err = model_from_json(json).unwrap_err();
        assert!(err.to_string().contains("nonnegative"), "{err}");
    }

    #[test]
    fn mislabeled_quadratic_fails_on_load() {
        let json = r#"{
            "n_states": 1,
            "n_actions_dim": 1,
            "action_set": {"type": "box", "lo": [0.0], "hi": [1.0]},
            "lower": [[{"kind": "quadratic", "H": [[1.0]], "c": [0.0], "d": 0.5,
                        "shape": "concave"}]],
            "upper": [[{"kind": "affine", "c": [0.0], "d": 1.0}]],
            "reward": [1.0]
        }"#;
        let err = model_from_json(json).unwrap_err();
        assert!(err.to_string().contains("eigenvalue"), "{err}");
    }

    #[test]
    fn opaque_models_do_not_serialize() {
        let opaque = BoundFunction::opaque(
            Arc::new(|_: &[f64]| 0.5),
            Arc::new(|a: &[f64]| vec![0.0; a.len()]),
            Shape::Linear,
        );
        let constant = BoundFunction::constant(1, 0.9);
        let imdp = Caimdp::new(
            ActionSet::Box {
                lo: vec![0.0],
                hi: vec![1.0],
            },
            vec![vec![opaque]],
            vec![vec![constant]],
            vec![1.0],
        )
        .unwrap();
        assert!(matches!(
            model_to_json(&imdp),
            Err(ModelError::Unserializable)
        ));
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;
        use proptest::strategy::ValueTree;

        fn arb_bound(dim: usize) -> impl Strategy<Value = BoundFunction> {
            let affine = (
                proptest::collection::vec(-1.0f64..1.0, dim),
                -1.0f64..1.0,
            )
                .prop_map(|(c, d)| BoundFunction::affine(c, d));
            let quad = (
                proptest::collection::vec(0.01f64..2.0, dim),
                proptest::collection::vec(-1.0f64..1.0, dim),
                -1.0f64..1.0,
                proptest::bool::ANY,
            )
                .prop_map(move |(diag, c, d, convex)| {
                    let sign = if convex { 1.0 } else { -1.0 };
                    let mut h = vec![vec![0.0; dim]; dim];
                    for i in 0..dim {
                        h[i][i] = sign * diag[i];
                    }
                    let shape = if convex { Shape::Convex } else { Shape::Concave };
                    BoundFunction::quadratic(h, c, d, shape).unwrap()
                });
            prop_oneof![affine, quad]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            /// Serialization round-trips structurally for every
            /// serializable bound kind.
            #[test]
            fn round_trip_identity(
                (n, dim) in (1usize..=3, 1usize..=2),
                seed in any::<u64>(),
            ) {
                let mut runner = proptest::test_runner::TestRunner::deterministic();
                let _ = seed;
                let entry = arb_bound(dim);
                let mut matrix = |count: usize| -> Vec<Vec<BoundFunction>> {
                    (0..count)
                        .map(|_| {
                            (0..count)
                                .map(|_| {
                                    entry
                                        .new_tree(&mut runner)
                                        .unwrap()
                                        .current()
                                })
                                .collect()
                        })
                        .collect()
                };
                let set = ActionSet::Box {
                    lo: vec![0.0; dim],
                    hi: vec![1.0; dim],
                };
                let reward: Vec<f64> = (0..n).map(|q| q as f64).collect();
                let imdp = Caimdp::new(set, matrix(n), matrix(n), reward).unwrap();
                let loaded = model_from_json(&model_to_json(&imdp).unwrap()).unwrap();
                prop_assert_eq!(loaded.reward(), imdp.reward());
                prop_assert_eq!(loaded.action_set(), imdp.action_set());
                for q in 0..n {
                    for q2 in 0..n {
                        prop_assert_eq!(loaded.lower(q, q2), imdp.lower(q, q2));
                        prop_assert_eq!(loaded.upper(q, q2), imdp.upper(q, q2));
                    }
                }
            }
        }
    }

    #[test]
    fn action_set_tags_are_stable() {
        let cyl = ActionSet::Product {
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
        };
        let json = serde_json::to_string(&cyl).unwrap();
        assert!(json.contains(r#""type":"product""#));
        assert!(json.contains(r#""type":"ball""#));
        assert!(json.contains(r#""type":"box""#));
        let poly = ActionSet::PolytopeV {
            vertices: vec![vec![0.0]],
        };
        assert!(serde_json::to_string(&poly)
            .unwrap()
            .contains(r#""type":"polytope_v""#));
    }
}
