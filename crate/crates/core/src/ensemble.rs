//! Tree ensembles and the reference evaluator.
//!
//! The evaluator here defines ground truth for every other module: a
//! counterfactual is valid iff [`predict_scores`] says so.

use serde::{Deserialize, Serialize};

use crate::feature_space::FeatureSpace;
use crate::plausibility::IsolationForests;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voting {
    Hard,
    Soft,
}

/// How a split `(f, t)` routes a value: `left_closed` sends `x <= t` left,
/// `right_open` sends `x < t` left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSemantics {
    LeftClosed,
    RightOpen,
}

impl SplitSemantics {
    #[inline]
    pub fn goes_left<T: Scalar>(self, v: T, threshold: T) -> bool {
        match self {
            SplitSemantics::LeftClosed => v <= threshold,
            SplitSemantics::RightOpen => v < threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Child {
    Node(usize),
    Leaf(usize),
}

impl Child {
    /// Interchange encoding: `c >= 0` names `nodes[c]`, `c < 0` names `leaves[-c - 1]`.
    pub fn decode(c: i64) -> Child {
        if c >= 0 {
            Child::Node(c as usize)
        } else {
            Child::Leaf((-c - 1) as usize)
        }
    }

    pub fn encode(self) -> i64 {
        match self {
            Child::Node(i) => i as i64,
            Child::Leaf(i) => -(i as i64) - 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node<T> {
    pub feature: usize,
    pub threshold: T,
    pub left: Child,
    pub right: Child,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf<T> {
    pub scores: Vec<T>,
    pub n_samples: u64,
    /// Root-to-leaf edge count, filled in at load time.
    pub depth: usize,
}

/// One condition on a root-to-leaf path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathStep<T> {
    pub feature: usize,
    pub threshold: T,
    pub left: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
    pub leaves: Vec<Leaf<T>>,
    pub root: Child,
}

impl<T: Scalar> Tree<T> {
    /// Walks from the root using array indices only.
    #[inline]
    pub fn route(&self, point: &[T], semantics: SplitSemantics) -> usize {
        let mut at = self.root;
        loop {
            match at {
                Child::Leaf(l) => return l,
                Child::Node(n) => {
                    let node = &self.nodes[n];
                    at = if semantics.goes_left(point[node.feature], node.threshold) {
                        node.left
                    } else {
                        node.right
                    };
                }
            }
        }
    }

    /// Path conditions of every leaf, indexed by leaf.
    pub fn leaf_paths(&self) -> Vec<Vec<PathStep<T>>> {
        let mut out = vec![Vec::new(); self.leaves.len()];
        let mut stack = vec![(self.root, Vec::new())];
        while let Some((at, path)) = stack.pop() {
            match at {
                Child::Leaf(l) => out[l] = path,
                Child::Node(n) => {
                    let node = &self.nodes[n];
                    let mut lp = path.clone();
                    lp.push(PathStep {
                        feature: node.feature,
                        threshold: node.threshold,
                        left: true,
                    });
                    let mut rp = path;
                    rp.push(PathStep {
                        feature: node.feature,
                        threshold: node.threshold,
                        left: false,
                    });
                    stack.push((node.right, rp));
                    stack.push((node.left, lp));
                }
            }
        }
        out
    }

    pub fn max_depth(&self) -> usize {
        self.leaves.iter().map(|l| l.depth).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<T> {
    pub trees: Vec<Tree<T>>,
    pub weights: Vec<T>,
    pub base_scores: Vec<T>,
    pub voting: Voting,
    pub semantics: SplitSemantics,
    pub n_classes: usize,
    pub features: FeatureSpace<T>,
    pub isolation: Option<IsolationForests<T>>,
}

/// Per-class scores and the argmax label.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    pub scores: Vec<T>,
    pub label: usize,
}

impl<T: Scalar> Prediction<T> {
    /// Smallest `s[target] - s[y]` over rivals `y`.
    pub fn margin(&self, target: usize) -> T {
        self.scores
            .iter()
            .enumerate()
            .filter(|&(y, _)| y != target)
            .map(|(_, &s)| self.scores[target] - s)
            .fold(T::infinity(), T::min)
    }
}

impl<T: Scalar> Ensemble<T> {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Every split threshold placed on feature `f`.
    pub fn thresholds_on(&self, f: usize) -> impl Iterator<Item = T> + '_ {
        self.trees
            .iter()
            .flat_map(|t| t.nodes.iter())
            .filter(move |n| n.feature == f)
            .map(|n| n.threshold)
    }

    /// Number of split nodes testing each feature.
    pub fn split_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_features()];
        for n in self.trees.iter().flat_map(|t| t.nodes.iter()) {
            c[n.feature] += 1;
        }
        c
    }

    pub fn predict(&self, point: &[T]) -> Prediction<T> {
        predict_scores(self, point)
    }

    /// True when `point` is classified as `target` with margin `>= eps`.
    pub fn attains(&self, point: &[T], target: usize, eps: f64) -> bool {
        let p = self.predict(point);
        p.margin(target).as_f64() >= eps
    }
}

/// Leaf reached by `point` in `tree`.
pub fn route_leaf<T: Scalar>(tree: &Tree<T>, point: &[T], semantics: SplitSemantics) -> usize {
    tree.route(point, semantics)
}

/// `s_y(x) = b_y + sum_t w_t p_{t, leaf_t(x), y}`, with the lowest-index argmax.
pub fn predict_scores<T: Scalar>(ens: &Ensemble<T>, point: &[T]) -> Prediction<T> {
    let mut scores = ens.base_scores.clone();
    for (tree, &w) in ens.trees.iter().zip(&ens.weights) {
        let leaf = &tree.leaves[tree.route(point, ens.semantics)];
        for (s, &p) in scores.iter_mut().zip(&leaf.scores) {
            *s = *s + w * p;
        }
    }
    let label = argmax(&scores);
    Prediction { scores, label }
}

/// Lowest index among the maxima.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
