//! The `cfforest/1` interchange document.
//!
//! ```text
//! { "version": "cfforest/1", "voting": "soft", "split_semantics": "left_closed",
//!   "n_classes": 2, "base_scores": [0, 0], "tree_weights": [0.5, 0.5],
//!   "features": [{"name": "age", "kind": "numerical", "lb": 18, "ub": 90,
//!                 "actionability": "increase_only", "alpha": 0.1}],
//!   "trees": [{"root": 0,
//!              "nodes": [{"f": 0, "tau": 30.5, "left": -1, "right": -2}],
//!              "leaves": [{"scores": [0.8, 0.2], "n_samples": 12}, ...]}],
//!   "isolation_forest": {"trees": [...], "max_samples": 256, "offset": -0.5,
//!                        "contamination": 0.1} }
//! ```
//!
//! Child references `c >= 0` point into `nodes`, `c < 0` into `leaves[-c - 1]`.
//! `isolation_forest` may also be `{"per_class": {"1": {...}}}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Child, Ensemble, Leaf, Node, SplitSemantics, Tree, Voting};
use crate::error::{Error, Result};
use crate::feature_space::{Actionability, FeatureKind, FeatureSpace, FeatureSpec};
use crate::plausibility::{IsolationForests, IsolationModel};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: &str = "cfforest/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: String,
    pub voting: Voting,
    pub split_semantics: SplitSemantics,
    pub n_classes: usize,
    pub base_scores: Vec<f64>,
    pub tree_weights: Vec<f64>,
    pub features: Vec<FeatureDoc>,
    pub trees: Vec<TreeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isolation_forest: Option<IsolationDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDoc {
    pub name: String,
    pub kind: FeatureKind,
    pub lb: f64,
    pub ub: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub actionability: Actionability,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeDoc {
    pub nodes: Vec<NodeDoc>,
    pub leaves: Vec<LeafDoc>,
    pub root: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub f: usize,
    pub tau: f64,
    pub left: i64,
    pub right: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<f64>,
    #[serde(default)]
    pub n_samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationBlock {
    pub trees: Vec<TreeDoc>,
    pub max_samples: u64,
    pub offset: f64,
    #[serde(default)]
    pub contamination: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IsolationDoc {
    PerClass { per_class: BTreeMap<String, IsolationBlock> },
    Single(IsolationBlock),
}

/// Parses and validates an interchange document.
pub fn load_ensemble<T: Scalar>(bytes: &[u8]) -> Result<Ensemble<T>> {
    let doc: ModelDocument = serde_json::from_slice(bytes)?;
    doc.into_ensemble()
}

pub fn load_ensemble_file<T: Scalar>(path: impl AsRef<Path>) -> Result<Ensemble<T>> {
    load_ensemble(&std::fs::read(path)?)
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Schema(format!("{what} must be finite, got {v}")))
    }
}

/// Validates tree structure: every node and leaf reachable exactly once
/// from the root and every split on a known feature.
pub(crate) fn build_tree<T: Scalar>(
    doc: &TreeDoc,
    tree: usize,
    n_features: usize,
    n_scores: Option<usize>,
) -> Result<Tree<T>> {
    let check = |c: i64| -> Result<Child> {
        let child = Child::decode(c);
        let ok = match child {
            Child::Node(n) => n < doc.nodes.len(),
            Child::Leaf(l) => l < doc.leaves.len(),
        };
        if ok {
            Ok(child)
        } else {
            Err(Error::DanglingChild { tree, index: c })
        }
    };
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for n in &doc.nodes {
        if n.f >= n_features {
            return Err(Error::MalformedTree {
                tree,
                reason: format!("split on unknown feature {}", n.f),
            });
        }
        nodes.push(Node {
            feature: n.f,
            threshold: T::of(finite(n.tau, "split threshold")?),
            left: check(n.left)?,
            right: check(n.right)?,
        });
    }
    let mut leaves = Vec::with_capacity(doc.leaves.len());
    for (li, l) in doc.leaves.iter().enumerate() {
        if let Some(k) = n_scores {
            if l.scores.len() != k {
                return Err(Error::ScoreLength {
                    tree,
                    leaf: li,
                    got: l.scores.len(),
                    expected: k,
                });
            }
        }
        let scores = l
            .scores
            .iter()
            .map(|&s| finite(s, "leaf score").map(T::of))
            .collect::<Result<Vec<T>>>()?;
        leaves.push(Leaf {
            scores,
            n_samples: l.n_samples,
            depth: 0,
        });
    }
    let root = check(doc.root)?;
    let mut seen_nodes = vec![false; nodes.len()];
    let mut seen_leaves = vec![false; leaves.len()];
    let mut stack = vec![(root, 0usize)];
    while let Some((at, depth)) = stack.pop() {
        let seen = match at {
            Child::Node(n) => &mut seen_nodes[n],
            Child::Leaf(l) => &mut seen_leaves[l],
        };
        if *seen {
            return Err(Error::MalformedTree {
                tree,
                reason: "a node is reachable twice (shared child or cycle)".into(),
            });
        }
        *seen = true;
        match at {
            Child::Node(n) => {
                stack.push((nodes[n].left, depth + 1));
                stack.push((nodes[n].right, depth + 1));
            }
            Child::Leaf(l) => leaves[l].depth = depth,
        }
    }
    if seen_nodes.iter().chain(&seen_leaves).any(|s| !s) {
        return Err(Error::MalformedTree {
            tree,
            reason: "unreachable nodes or leaves".into(),
        });
    }
    Ok(Tree { nodes, leaves, root })
}

fn tree_doc<T: Scalar>(t: &Tree<T>) -> TreeDoc {
    TreeDoc {
        nodes: t
            .nodes
            .iter()
            .map(|n| NodeDoc {
                f: n.feature,
                tau: n.threshold.as_f64(),
                left: n.left.encode(),
                right: n.right.encode(),
            })
            .collect(),
        leaves: t
            .leaves
            .iter()
            .map(|l| LeafDoc {
                scores: l.scores.iter().map(|s| s.as_f64()).collect(),
                n_samples: l.n_samples,
            })
            .collect(),
        root: t.root.encode(),
    }
}

impl IsolationDoc {
    pub fn into_forests<T: Scalar>(
        &self,
        n_features: usize,
        semantics: SplitSemantics,
        n_classes: usize,
    ) -> Result<IsolationForests<T>> {
        match self {
            IsolationDoc::Single(b) => Ok(IsolationForests::Shared(b.into_model(n_features, semantics)?)),
            IsolationDoc::PerClass { per_class } => {
                let mut map = BTreeMap::new();
                for (k, b) in per_class {
                    let class: usize = k
                        .parse()
                        .map_err(|_| Error::Schema(format!("isolation class key `{k}` is not an integer")))?;
                    if class >= n_classes {
                        return Err(Error::UnknownClass(class));
                    }
                    map.insert(class, b.into_model(n_features, semantics)?);
                }
                Ok(IsolationForests::PerClass(map))
            }
        }
    }
}

/// Isolation forests for `ens` from either a full model document (its
/// `isolation_forest` block) or a bare isolation block.
pub fn load_isolation<T: Scalar>(bytes: &[u8], ens: &Ensemble<T>) -> Result<IsolationForests<T>> {
    let value: serde_json::Value = serde_json::from_slice(bytes)?;
    let doc: IsolationDoc = if value.get("version").is_some() {
        let model: ModelDocument = serde_json::from_value(value)?;
        model
            .isolation_forest
            .ok_or_else(|| Error::Schema("model document has no isolation_forest block".into()))?
    } else {
        serde_json::from_value(value)?
    };
    doc.into_forests(ens.n_features(), ens.semantics, ens.n_classes)
}

impl IsolationBlock {
    pub fn into_model<T: Scalar>(&self, n_features: usize, semantics: SplitSemantics) -> Result<IsolationModel<T>> {
        let trees = self
            .trees
            .iter()
            .enumerate()
            .map(|(i, t)| build_tree(t, i, n_features, None))
            .collect::<Result<Vec<_>>>()?;
        Ok(IsolationModel::new(trees, self.max_samples, self.offset, self.contamination)?.with_semantics(semantics))
    }

    pub fn from_model<T: Scalar>(m: &IsolationModel<T>) -> Self {
        IsolationBlock {
            trees: m.trees.iter().map(tree_doc).collect(),
            max_samples: m.max_samples,
            offset: m.offset,
            contamination: m.contamination,
        }
    }
}

impl ModelDocument {
    pub fn into_ensemble<T: Scalar>(self) -> Result<Ensemble<T>> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported version `{}`, expected `{SCHEMA_VERSION}`",
                self.version
            )));
        }
        if self.n_classes < 2 {
            return Err(Error::Schema("n_classes must be at least 2".into()));
        }
        if self.base_scores.len() != self.n_classes {
            return Err(Error::Schema(format!(
                "{} base scores for {} classes",
                self.base_scores.len(),
                self.n_classes
            )));
        }
        if self.tree_weights.len() != self.trees.len() {
            return Err(Error::Schema(format!(
                "{} tree weights for {} trees",
                self.tree_weights.len(),
                self.trees.len()
            )));
        }
        let specs = self
            .features
            .iter()
            .map(|f| {
                let lb = T::of(finite(f.lb, "feature bound")?);
                let ub = T::of(finite(f.ub, "feature bound")?);
                let alpha = match f.alpha {
                    Some(a) => T::of(a),
                    None => FeatureSpec::default_alpha(f.kind, lb, ub),
                };
                let spec = FeatureSpec {
                    name: f.name.clone(),
                    kind: f.kind,
                    lb,
                    ub,
                    group: None,
                    ordinal_grid: f.ordinal_grid.as_ref().map(|g| g.iter().map(|&v| T::of(v)).collect()),
                    actionability: f.actionability,
                    alpha,
                };
                Ok((spec, f.group.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let features = FeatureSpace::new(specs)?;
        let n_features = features.len();
        let trees = self
            .trees
            .iter()
            .enumerate()
            .map(|(i, t)| build_tree(t, i, n_features, Some(self.n_classes)))
            .collect::<Result<Vec<Tree<T>>>>()?;
        let weights = self
            .tree_weights
            .iter()
            .map(|&w| finite(w, "tree weight").map(T::of))
            .collect::<Result<Vec<T>>>()?;
        let base_scores = self
            .base_scores
            .iter()
            .map(|&b| finite(b, "base score").map(T::of))
            .collect::<Result<Vec<T>>>()?;
        if self.voting == Voting::Hard {
            if let Some(t) = weights.iter().position(|&w| w != T::one()) {
                return Err(Error::Schema(format!("hard voting requires unit weights (tree {t})")));
            }
            for (ti, tree) in trees.iter().enumerate() {
                for (li, leaf) in tree.leaves.iter().enumerate() {
                    let ones = leaf.scores.iter().filter(|&&s| s == T::one()).count();
                    let zeros = leaf.scores.iter().filter(|&&s| s == T::zero()).count();
                    if ones != 1 || ones + zeros != leaf.scores.len() {
                        return Err(Error::NonOneHotLeaf { tree: ti, leaf: li });
                    }
                }
            }
        }
        let isolation = match &self.isolation_forest {
            None => None,
            Some(doc) => Some(doc.into_forests(n_features, self.split_semantics, self.n_classes)?),
        };
        Ok(Ensemble {
            trees,
            weights,
            base_scores,
            voting: self.voting,
            semantics: self.split_semantics,
            n_classes: self.n_classes,
            features,
            isolation,
        })
    }
}

impl<T: Scalar> Ensemble<T> {
    pub fn to_document(&self) -> ModelDocument {
        let groups = &self.features.groups;
        ModelDocument {
            version: SCHEMA_VERSION.to_string(),
            voting: self.voting,
            split_semantics: self.semantics,
            n_classes: self.n_classes,
            base_scores: self.base_scores.iter().map(|b| b.as_f64()).collect(),
            tree_weights: self.weights.iter().map(|w| w.as_f64()).collect(),
            features: self
                .features
                .features
                .iter()
                .map(|f| FeatureDoc {
                    name: f.name.clone(),
                    kind: f.kind,
                    lb: f.lb.as_f64(),
                    ub: f.ub.as_f64(),
                    group: f.group.map(|g| groups[g].name.clone()),
                    ordinal_grid: match f.kind {
                        FeatureKind::Ordinal => f.ordinal_grid.as_ref().map(|g| g.iter().map(|v| v.as_f64()).collect()),
                        _ => None,
                    },
                    actionability: f.actionability,
                    alpha: Some(f.alpha.as_f64()),
                })
                .collect(),
            trees: self.trees.iter().map(tree_doc).collect(),
            isolation_forest: self.isolation.as_ref().map(|iso| match iso {
                IsolationForests::Shared(m) => IsolationDoc::Single(IsolationBlock::from_model(m)),
                IsolationForests::PerClass(map) => IsolationDoc::PerClass {
                    per_class: map
                        .iter()
                        .map(|(k, m)| (k.to_string(), IsolationBlock::from_model(m)))
                        .collect(),
                },
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{TOY_A_JSON, TOY_B_JSON};

    #[test]
    fn toy_a_loads() {
        let e: Ensemble<f64> = load_ensemble(TOY_A_JSON.as_bytes()).unwrap();
        assert_eq!(e.trees.len(), 1);
        assert_eq!(e.trees[0].leaves.len(), 2);
        assert_eq!(e.n_classes, 2);
        assert_eq!(e.trees[0].leaves[1].depth, 1);
    }

    #[test]
    fn hard_voting_rejects_soft_leaves() {
        let doc = TOY_A_JSON.replace("[0.0, 1.0]", "[0.5, 0.5]");
        let err = load_ensemble::<f64>(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("non-one-hot leaf under hard voting"), "{err}");
    }

    #[test]
    fn dangling_children_are_rejected() {
        let doc = TOY_A_JSON.replace("\"left\": -1", "\"left\": -7");
        let err = load_ensemble::<f64>(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DanglingChild { tree: 0, index: -7 }), "{err}");
        assert!(err.to_string().contains("dangling child"));
    }

    #[test]
    fn shared_children_are_rejected() {
        let doc = TOY_A_JSON.replace("\"right\": -2", "\"right\": -1");
        assert!(matches!(
            load_ensemble::<f64>(doc.as_bytes()),
            Err(Error::MalformedTree { .. })
        ));
    }

    #[test]
    fn score_length_mismatch() {
        let doc = TOY_B_JSON.replacen("[0.8, 0.2]", "[0.8, 0.2, 0.0]", 1);
        assert!(matches!(
            load_ensemble::<f64>(doc.as_bytes()),
            Err(Error::ScoreLength { expected: 2, got: 3, .. })
        ));
    }

    #[test]
    fn wrong_version_is_a_schema_error() {
        let doc = TOY_A_JSON.replace("cfforest/1", "cfforest/9");
        assert!(matches!(load_ensemble::<f64>(doc.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn document_round_trip() {
        let e: Ensemble<f64> = load_ensemble(TOY_B_JSON.as_bytes()).unwrap();
        let again: Ensemble<f64> = load_ensemble(e.to_json().as_bytes()).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn loads_as_f32() {
        let e: Ensemble<f32> = load_ensemble(TOY_B_JSON.as_bytes()).unwrap();
        let p = e.predict(&[8.0]);
        assert_eq!(p.label, 1);
        assert!((p.scores[1] - 0.7).abs() < 1e-6);
    }
}
