//! Isolation-forest plausibility.
//!
//! A point is plausible when the isolation forest's decision function is
//! nonnegative. Since `decision(x) = -2^(-H(x)/c_max) - offset` is monotone in
//! the average corrected path length `H(x)`, the condition is linearized as
//! `H(x) >= H_min` with `H_min = -c_max * log2(-offset)`.

use std::collections::BTreeMap;

use crate::cp::CfModel;
use crate::ensemble::{SplitSemantics, Tree};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average unsuccessful-search path length of a binary search tree on `m` points.
pub fn correction_c(m: u64) -> f64 {
    match m {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = m as f64;
            2.0 * (m - 1.0).ln() + 2.0 * EULER_GAMMA - 2.0 * (m - 1.0) / m
        }
    }
}

/// `depth + c(n_samples)` for leaves that held more than one training sample.
pub fn leaf_path_length<T: Scalar>(tree: &Tree<T>, leaf: usize) -> f64 {
    let l = &tree.leaves[leaf];
    path_length(l.depth, l.n_samples)
}

fn path_length(depth: usize, samples: u64) -> f64 {
    if samples <= 1 {
        depth as f64
    } else {
        depth as f64 + correction_c(samples)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsolationModel<T> {
    pub trees: Vec<Tree<T>>,
    pub semantics: SplitSemantics,
    pub max_samples: u64,
    pub offset: f64,
    pub contamination: f64,
    /// Corrected path length per tree and leaf.
    pub path_lengths: Vec<Vec<f64>>,
    pub c_max: f64,
    pub h_min: f64,
}

impl<T: Scalar> IsolationModel<T> {
    pub fn new(trees: Vec<Tree<T>>, max_samples: u64, offset: f64, contamination: f64) -> Result<Self> {
        let path_lengths = trees
            .iter()
            .map(|t| (0..t.leaves.len()).map(|l| leaf_path_length(t, l)).collect())
            .collect();
        Self::from_parts(trees, path_lengths, correction_c(max_samples), max_samples, offset, contamination)
    }

    /// Model with explicit per-leaf path lengths and normalizer.
    pub fn from_parts(
        trees: Vec<Tree<T>>,
        path_lengths: Vec<Vec<f64>>,
        c_max: f64,
        max_samples: u64,
        offset: f64,
        contamination: f64,
    ) -> Result<Self> {
        if !(offset > -1.0 && offset < 0.0) {
            return Err(Error::Schema(format!("isolation offset {offset} outside (-1, 0)")));
        }
        if !(c_max > 0.0 && c_max.is_finite()) {
            return Err(Error::Schema("isolation forest needs max_samples >= 2".into()));
        }
        if trees.is_empty() || path_lengths.len() != trees.len() {
            return Err(Error::Schema("isolation forest needs at least one tree".into()));
        }
        for (t, l) in trees.iter().zip(&path_lengths) {
            if l.len() != t.leaves.len() || l.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::Schema("path lengths must be finite and nonnegative".into()));
            }
        }
        let mut m = IsolationModel {
            trees,
            semantics: SplitSemantics::LeftClosed,
            max_samples,
            offset,
            contamination,
            path_lengths,
            c_max,
            h_min: 0.0,
        };
        m.h_min = h_min_threshold(&m);
        Ok(m)
    }

    pub fn with_semantics(mut self, semantics: SplitSemantics) -> Self {
        self.semantics = semantics;
        self
    }

    /// `H(x)`: mean corrected path length over the trees.
    pub fn average_path_length(&self, point: &[T]) -> f64 {
        let total: f64 = self
            .trees
            .iter()
            .zip(&self.path_lengths)
            .map(|(t, l)| l[t.route(point, self.semantics)])
            .sum();
        total / self.trees.len() as f64
    }

    /// `-2^(-H(x) / c_max)`.
    pub fn score(&self, point: &[T]) -> f64 {
        -(2f64.powf(-self.average_path_length(point) / self.c_max))
    }

    pub fn decision(&self, point: &[T]) -> f64 {
        self.score(point) - self.offset
    }

    pub fn is_plausible(&self, point: &[T]) -> bool {
        self.decision(point) >= 0.0
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.trees.iter().flat_map(|t| t.nodes.iter()).map(|n| n.feature).max()
    }
}

/// `H_min = -c_max * log2(-offset)`.
pub fn h_min_threshold<T>(model: &IsolationModel<T>) -> f64 {
    -model.c_max * (-model.offset).log2()
}

/// Isolation forests attached to a model document: one shared model or one per target class.
#[derive(Clone, Debug, PartialEq)]
pub enum IsolationForests<T> {
    Shared(IsolationModel<T>),
    PerClass(BTreeMap<usize, IsolationModel<T>>),
}

impl<T> IsolationForests<T> {
    pub fn for_class(&self, class: usize) -> Option<&IsolationModel<T>> {
        match self {
            IsolationForests::Shared(m) => Some(m),
            IsolationForests::PerClass(map) => map.get(&class),
        }
    }
}

/// Adds the isolation forest's paths and the hard `H(x) >= H_min` constraint.
///
/// Partitions are rebuilt over the union of ensemble and isolation thresholds,
/// so the returned model replaces `cf` entirely.
pub fn attach_plausibility<'a, T: Scalar>(cf: CfModel<'a, T>, iso: &'a IsolationModel<T>) -> Result<CfModel<'a, T>> {
    if let Some(f) = iso.max_feature() {
        if f >= cf.ensemble.n_features() {
            return Err(Error::FeatureMismatch(format!(
                "isolation tree splits on feature {f}, ensemble has {}",
                cf.ensemble.n_features()
            )));
        }
    }
    if iso.semantics != cf.ensemble.semantics {
        return Err(Error::FeatureMismatch("split semantics differ".into()));
    }
    CfModel::build_with(cf.ensemble, &cf.query, cf.target, cf.options.clone(), Some(iso))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn correction_term_values() {
        assert_eq!(correction_c(0), 0.0);
        assert_eq!(correction_c(1), 0.0);
        assert_eq!(correction_c(2), 1.0);
        let c3 = 2.0 * 2f64.ln() + 2.0 * EULER_GAMMA - 4.0 / 3.0;
        assert_abs_diff_eq!(correction_c(3), c3, epsilon = 1e-15);
        assert_abs_diff_eq!(correction_c(3), 1.20740, epsilon = 1e-5);
        assert_abs_diff_eq!(correction_c(256), 10.24477, epsilon = 1e-5);
    }

    #[test]
    fn path_lengths() {
        assert_eq!(path_length(4, 1), 4.0);
        assert_eq!(path_length(4, 2), 5.0);
        assert_abs_diff_eq!(path_length(2, 3), 3.20740, epsilon = 1e-5);
    }

    fn stump() -> Tree<f64> {
        use crate::ensemble::{Child, Leaf, Node};
        Tree {
            nodes: vec![Node {
                feature: 0,
                threshold: 6.0,
                left: Child::Leaf(0),
                right: Child::Leaf(1),
            }],
            leaves: vec![
                Leaf { scores: vec![], n_samples: 1, depth: 1 },
                Leaf { scores: vec![], n_samples: 5, depth: 1 },
            ],
            root: Child::Node(0),
        }
    }

    #[test]
    fn h_min_examples() {
        let m = IsolationModel::from_parts(vec![stump()], vec![vec![0.5, 3.0]], 1.0, 2, -0.5, 0.1).unwrap();
        assert_abs_diff_eq!(m.h_min, 1.0, epsilon = 1e-15);
        let m = IsolationModel::from_parts(vec![stump()], vec![vec![0.5, 3.0]], 2.0, 2, -0.25, 0.1).unwrap();
        assert_abs_diff_eq!(m.h_min, 4.0, epsilon = 1e-15);
        let m = IsolationModel::new(vec![stump()], 256, -0.5, 0.1).unwrap();
        assert_abs_diff_eq!(m.h_min, 10.24477, epsilon = 1e-5);
    }

    #[test]
    fn offset_must_be_negative_fraction() {
        assert!(IsolationModel::new(vec![stump()], 256, 0.2, 0.1).is_err());
        assert!(IsolationModel::new(vec![stump()], 256, -1.0, 0.1).is_err());
    }

    #[test]
    fn decision_sign_matches_path_length_threshold() {
        let m = IsolationModel::from_parts(vec![stump()], vec![vec![0.5, 3.0]], 1.0, 2, -0.5, 0.1).unwrap();
        assert!(!m.is_plausible(&[2.0]));
        assert!(m.average_path_length(&[2.0]) < m.h_min);
        assert!(m.is_plausible(&[7.0]));
        assert!(m.average_path_length(&[7.0]) >= m.h_min);
    }
}
