//! Finite-domain model of the counterfactual problem and its
//! branch-and-bound solver.
//!
//! Decision variables are interval indices (and one-hot group choices);
//! leaf selections are implied by the variables and never branched on. Class
//! scores are scaled by `1e9` and rounded so that every target-class
//! comparison is an exact integer inequality over leaf selections.

mod propagate;
mod search;
mod solution;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

pub use propagate::{lower_bound, propagate, Outcome, Propagator, State};
pub use search::{solve, solve_with, SolveOptions};
pub use solution::{Solution, Status};

use crate::ensemble::{Ensemble, Voting};
use crate::error::{Error, Result};
use crate::feature_space::{Actionability, Norm};
use crate::plausibility::IsolationModel;
use crate::scalar::{scaled_round, Scalar};
use crate::space::{CompiledTree, SearchSpace};

/// Integer scale applied to leaf scores, base scores and the target margin.
pub const SCORE_SCALE: f64 = 1e9;

pub const DEFAULT_EPSILON_C: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct CfOptions {
    pub norm: Norm,
    /// Required margin `s_target - s_y >= epsilon_c` for every rival `y`.
    pub epsilon_c: f64,
    /// Per-feature overrides of the document's actionability.
    pub actionability: BTreeMap<usize, Actionability>,
    /// Accept a query already classified as the target (zero-cost answer).
    pub allow_identity: bool,
}

impl Default for CfOptions {
    fn default() -> Self {
        CfOptions {
            norm: Norm::L1,
            epsilon_c: DEFAULT_EPSILON_C,
            actionability: BTreeMap::new(),
            allow_identity: false,
        }
    }
}

impl CfOptions {
    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_actionability(mut self, feature: usize, a: Actionability) -> Self {
        self.actionability.insert(feature, a);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    Class { rival: usize },
    Plausibility,
}

/// Per-tree coefficients of one linear constraint over leaf selections.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub tree: usize,
    pub coef: Vec<i64>,
}

/// `sum_terms coef[selected leaf] >= rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub kind: ConstraintKind,
    pub terms: Vec<Term>,
    pub rhs: i64,
}

impl LinearConstraint {
    pub fn holds(&self, leaves: &[usize]) -> bool {
        self.slack(leaves) >= 0
    }

    pub fn slack(&self, leaves: &[usize]) -> i64 {
        self.terms.iter().map(|t| t.coef[leaves[t.tree]]).sum::<i64>() - self.rhs
    }
}

pub struct CfModel<'a, T> {
    pub ensemble: &'a Ensemble<T>,
    pub plausibility: Option<&'a IsolationModel<T>>,
    pub query: Vec<T>,
    pub target: usize,
    pub options: CfOptions,
    pub space: SearchSpace<T>,
    /// Ensemble trees first, then isolation trees.
    pub trees: Vec<CompiledTree>,
    pub n_ensemble_trees: usize,
    /// `round(1e9 * w_t * p_{t,l,y})` per tree, leaf and class.
    pub scaled_scores: Vec<Vec<Vec<i64>>>,
    pub scaled_base: Vec<i64>,
    /// `max(1, round(1e9 * epsilon_c))`.
    pub margin: i64,
    pub constraints: Vec<LinearConstraint>,
    pub build_time: Duration,
}

/// Builds the model for moving `query` into class `target`.
pub fn build_model<'a, T: Scalar>(
    ens: &'a Ensemble<T>,
    query: &[T],
    target: usize,
    options: CfOptions,
) -> Result<CfModel<'a, T>> {
    CfModel::build_with(ens, query, target, options, None)
}

impl<'a, T: Scalar> CfModel<'a, T> {
    pub fn build_with(
        ens: &'a Ensemble<T>,
        query: &[T],
        target: usize,
        options: CfOptions,
        plausibility: Option<&'a IsolationModel<T>>,
    ) -> Result<Self> {
        let start = Instant::now();
        if target >= ens.n_classes {
            return Err(Error::UnknownClass(target));
        }
        if !(options.epsilon_c > 0.0 && options.epsilon_c.is_finite()) {
            return Err(Error::Query("epsilon_c must be a positive real".into()));
        }
        ens.features.check_point(query)?;
        if !options.allow_identity && ens.predict(query).label == target {
            return Err(Error::AlreadyTarget(target));
        }
        let extra: Vec<_> = plausibility.map(|m| m.trees.iter().collect()).unwrap_or_default();
        let space = SearchSpace::new(ens, &extra, query, options.norm, &options.actionability)?;

        let mut trees: Vec<CompiledTree> = ens.trees.iter().map(|t| space.compile_tree(t)).collect();
        let n_ensemble_trees = trees.len();
        let scaled_scores: Vec<Vec<Vec<i64>>> = ens
            .trees
            .iter()
            .zip(&ens.weights)
            .map(|(t, &w)| {
                t.leaves
                    .iter()
                    .map(|l| {
                        l.scores
                            .iter()
                            .map(|&p| scaled_round(w.as_f64() * p.as_f64(), SCORE_SCALE))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let scaled_base: Vec<i64> = ens
            .base_scores
            .iter()
            .map(|b| scaled_round(b.as_f64(), SCORE_SCALE))
            .collect();
        let margin = scaled_round(options.epsilon_c, SCORE_SCALE).max(1);

        let mut constraints = Vec::new();
        for rival in (0..ens.n_classes).filter(|&y| y != target) {
            let terms = scaled_scores
                .iter()
                .enumerate()
                .map(|(t, leaves)| Term {
                    tree: t,
                    coef: leaves.iter().map(|p| p[target] - p[rival]).collect(),
                })
                .filter(|term| term.coef.iter().any(|&c| c != 0))
                .collect();
            constraints.push(LinearConstraint {
                kind: ConstraintKind::Class { rival },
                terms,
                rhs: margin - (scaled_base[target] - scaled_base[rival]),
            });
        }

        if let Some(iso) = plausibility {
            let offset = trees.len();
            let mut terms = Vec::with_capacity(iso.trees.len());
            for (i, (t, lengths)) in iso.trees.iter().zip(&iso.path_lengths).enumerate() {
                trees.push(space.compile_tree(t));
                terms.push(Term {
                    tree: offset + i,
                    coef: lengths.iter().map(|&l| scaled_round(l, SCORE_SCALE)).collect(),
                });
            }
            let h_min = (iso.h_min * SCORE_SCALE).floor() as i64;
            constraints.push(LinearConstraint {
                kind: ConstraintKind::Plausibility,
                terms,
                rhs: iso.trees.len() as i64 * h_min,
            });
        }

        Ok(CfModel {
            ensemble: ens,
            plausibility,
            query: query.to_vec(),
            target,
            options,
            space,
            trees,
            n_ensemble_trees,
            scaled_scores,
            scaled_base,
            margin,
            constraints,
            build_time: start.elapsed(),
        })
    }

    pub fn n_vars(&self) -> usize {
        self.space.vars.len()
    }

    /// Leaf of every compiled tree for a full variable assignment.
    pub fn leaves_of(&self, values: &[usize]) -> Option<Vec<usize>> {
        self.trees.iter().map(|t| t.leaf_of(values)).collect()
    }

    /// Exact integer check of every linear constraint at a full assignment.
    pub fn satisfies(&self, values: &[usize]) -> bool {
        match self.leaves_of(values) {
            Some(leaves) => self.constraints.iter().all(|c| c.holds(&leaves)),
            None => false,
        }
    }

    /// Reference-evaluator check of a concrete point: target margin and,
    /// when attached, isolation-forest plausibility.
    pub fn validates(&self, point: &[T]) -> bool {
        point_is_valid(self.ensemble, self.plausibility, point, self.target, self.options.epsilon_c)
    }

    pub fn is_hard_voting(&self) -> bool {
        self.ensemble.voting == Voting::Hard
    }
}

/// `s_target(x) >= s_y(x) + eps` for all rivals and `decision(x) >= 0` if an
/// isolation forest is supplied.
pub fn point_is_valid<T: Scalar>(
    ens: &Ensemble<T>,
    iso: Option<&IsolationModel<T>>,
    point: &[T],
    target: usize,
    eps: f64,
) -> bool {
    ens.attains(point, target, eps) && iso.is_none_or(|m| m.is_plausible(point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy_a, toy_b};

    #[test]
    fn toy_a_model_shape() {
        let e = toy_a();
        let m = build_model(&e, &[1.0], 1, CfOptions::default()).unwrap();
        assert_eq!(m.n_vars(), 1);
        assert_eq!(m.space.vars[0].n_values, 2);
        assert_eq!(m.trees[0].leaves.len(), 2);
        assert_eq!(m.constraints.len(), 1);
        assert_eq!(m.margin, 100);
    }

    #[test]
    fn toy_b_scaled_scores() {
        let e = toy_b();
        let m = build_model(&e, &[1.0], 1, CfOptions::default()).unwrap();
        assert_eq!(m.space.vars[0].n_values, 3);
        assert_eq!(m.scaled_scores[0][1], vec![200_000_000, 300_000_000]);
    }

    #[test]
    fn immutable_feature_domain_is_pinned() {
        let e = toy_a();
        let opts = CfOptions::default().with_actionability(0, Actionability::Immutable);
        let m = build_model(&e, &[1.0], 1, opts).unwrap();
        assert_eq!(m.space.vars[0].allowed.iter().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn rejects_bad_targets() {
        let e = toy_a();
        assert!(matches!(
            build_model(&e, &[1.0], 0, CfOptions::default()),
            Err(Error::AlreadyTarget(0))
        ));
        assert!(matches!(
            build_model(&e, &[1.0], 5, CfOptions::default()),
            Err(Error::UnknownClass(5))
        ));
        let opts = CfOptions {
            allow_identity: true,
            ..CfOptions::default()
        };
        assert!(build_model(&e, &[1.0], 0, opts).is_ok());
    }
}
