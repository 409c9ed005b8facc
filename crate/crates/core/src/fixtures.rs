//! Two small reference ensembles over one feature in `[0, 10]`.
//!
//! `TOY-A`: one hard-voting stump at `3.0` with one-hot leaves.
//! `TOY-B`: two soft-voting stumps at `3.0` and `6.0`, weight `0.5` each.

use crate::ensemble::Ensemble;
use crate::format::load_ensemble;
use crate::scalar::Scalar;

pub const TOY_A_JSON: &str = r#"{
  "version": "cfforest/1",
  "voting": "hard",
  "split_semantics": "left_closed",
  "n_classes": 2,
  "base_scores": [0.0, 0.0],
  "tree_weights": [1.0],
  "features": [
    {"name": "x0", "kind": "numerical", "lb": 0.0, "ub": 10.0, "alpha": 1.0}
  ],
  "trees": [
    {"root": 0,
     "nodes": [{"f": 0, "tau": 3.0, "left": -1, "right": -2}],
     "leaves": [{"scores": [1.0, 0.0], "n_samples": 5}, {"scores": [0.0, 1.0], "n_samples": 5}]}
  ]
}"#;

pub const TOY_B_JSON: &str = r#"{
  "version": "cfforest/1",
  "voting": "soft",
  "split_semantics": "left_closed",
  "n_classes": 2,
  "base_scores": [0.0, 0.0],
  "tree_weights": [0.5, 0.5],
  "features": [
    {"name": "x0", "kind": "numerical", "lb": 0.0, "ub": 10.0, "alpha": 1.0}
  ],
  "trees": [
    {"root": 0,
     "nodes": [{"f": 0, "tau": 3.0, "left": -1, "right": -2}],
     "leaves": [{"scores": [0.8, 0.2], "n_samples": 4}, {"scores": [0.4, 0.6], "n_samples": 6}]},
    {"root": 0,
     "nodes": [{"f": 0, "tau": 6.0, "left": -1, "right": -2}],
     "leaves": [{"scores": [0.7, 0.3], "n_samples": 7}, {"scores": [0.2, 0.8], "n_samples": 3}]}
  ]
}"#;

pub fn toy_a() -> Ensemble<f64> {
    toy_a_as()
}

pub fn toy_b() -> Ensemble<f64> {
    toy_b_as()
}

pub fn toy_a_as<T: Scalar>() -> Ensemble<T> {
    load_ensemble(TOY_A_JSON.as_bytes()).expect("TOY-A is valid")
}

pub fn toy_b_as<T: Scalar>() -> Ensemble<T> {
    load_ensemble(TOY_B_JSON.as_bytes()).expect("TOY-B is valid")
}
