//! The finite counterfactual search space.
//!
//! Every numerical, ordinal and binary feature becomes one interval-index
//! variable, every one-hot group one categorical variable whose values are the
//! group's members. Each variable carries its admissible values (after
//! actionability) and its per-value cost table. Tree paths compile to
//! conditions on these variables.

use std::collections::BTreeMap;

use crate::bitset::BitSet;
use crate::ensemble::{Ensemble, SplitSemantics, Tree};
use crate::error::{Error, Result};
use crate::feature_space::{
    displacement_cost, realize_value, Actionability, FeatureKind, FeaturePartition, Norm,
};
use crate::scalar::{scaled_round, Scalar};

/// Objective quantum: costs are compared as `round(COST_SCALE * cost)`.
pub const COST_SCALE: f64 = 1e6;

#[derive(Clone, Debug, PartialEq)]
pub enum VarKind<T> {
    Interval {
        feature: usize,
        partition: FeaturePartition<T>,
    },
    Group {
        group: usize,
        members: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionVar<T> {
    pub kind: VarKind<T>,
    pub n_values: usize,
    /// The query's value.
    pub home: usize,
    pub allowed: BitSet,
    /// `alpha * delta` per value; `f64::INFINITY` for values that hold no
    /// admissible point.
    pub cost: Vec<f64>,
    pub qcost: Vec<i64>,
    /// Number of split nodes (ensemble and isolation trees) testing this variable.
    pub splits: usize,
}

impl<T> DecisionVar<T> {
    pub fn is_group(&self) -> bool {
        matches!(self.kind, VarKind::Group { .. })
    }
}

/// Location of a feature column among the decision variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureSlot {
    Interval(usize),
    Member { var: usize, position: usize },
}

/// Condition on one variable along a root-to-leaf path.
#[derive(Clone, Debug, PartialEq)]
pub enum Cond {
    /// Inclusive value range of an interval variable.
    Range(usize, usize),
    /// Allowed members of a group variable.
    Mask(BitSet),
}

impl Cond {
    #[inline]
    pub fn admits(&self, v: usize) -> bool {
        match self {
            Cond::Range(lo, hi) => *lo <= v && v <= *hi,
            Cond::Mask(m) => m.contains(v),
        }
    }

    #[inline]
    pub fn meets(&self, dom: &BitSet) -> bool {
        match self {
            Cond::Range(lo, hi) => dom.any_in(*lo, *hi),
            Cond::Mask(m) => m.intersects(dom),
        }
    }
}

/// A leaf as a conjunction of variable conditions, sorted by variable.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafPath {
    pub conds: Vec<(usize, Cond)>,
    /// False when the path contradicts itself or a constant split.
    pub reachable: bool,
}

impl LeafPath {
    pub fn cond_on(&self, var: usize) -> Option<&Cond> {
        self.conds.iter().find(|(v, _)| *v == var).map(|(_, c)| c)
    }

    pub fn admits(&self, values: &[usize]) -> bool {
        self.reachable && self.conds.iter().all(|(v, c)| c.admits(values[*v]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledTree {
    pub leaves: Vec<LeafPath>,
    /// Variables constrained by at least one leaf.
    pub vars: Vec<usize>,
}

impl CompiledTree {
    pub fn leaf_of(&self, values: &[usize]) -> Option<usize> {
        self.leaves.iter().position(|l| l.admits(values))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace<T> {
    pub vars: Vec<DecisionVar<T>>,
    pub slots: Vec<FeatureSlot>,
    pub query: Vec<T>,
    pub norm: Norm,
    pub semantics: SplitSemantics,
    /// Admissible grid per feature (ordinal and binary features).
    pub grids: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> SearchSpace<T> {
    /// Builds variables for `query`. Partitions cover the thresholds of the
    /// ensemble and of any `extra` trees (isolation forests).
    pub fn new(
        ens: &Ensemble<T>,
        extra: &[&Tree<T>],
        query: &[T],
        norm: Norm,
        overrides: &BTreeMap<usize, Actionability>,
    ) -> Result<Self> {
        let fs = &ens.features;
        fs.check_point(query)?;
        let n = fs.len();
        let mut thresholds: Vec<Vec<T>> = vec![Vec::new(); n];
        let mut splits = vec![0usize; n];
        for tree in ens.trees.iter().chain(extra.iter().copied()) {
            for node in &tree.nodes {
                thresholds[node.feature].push(node.threshold);
                splits[node.feature] += 1;
            }
        }
        let act = |f: usize| overrides.get(&f).copied().unwrap_or(fs.features[f].actionability);

        let mut vars = Vec::new();
        let mut slots = vec![FeatureSlot::Interval(usize::MAX); n];
        for (f, spec) in fs.features.iter().enumerate() {
            if spec.kind == FeatureKind::CategoricalMember {
                continue;
            }
            let partition = FeaturePartition::from_thresholds(
                spec.lb,
                spec.ub,
                ens.semantics,
                thresholds[f].iter().copied(),
            );
            let x = query[f];
            let home = partition.interval_of_unchecked(x);
            let grid = spec.admissible_grid();
            let n_values = partition.n_intervals();
            let cost: Vec<f64> = (0..n_values)
                .map(|m| displacement_cost(&partition, x, m, norm, spec.alpha, grid).unwrap_or(f64::INFINITY))
                .collect();
            let allowed = BitSet::from_fn(n_values, |m| {
                let ok = m == home || cost[m].is_finite();
                ok && match act(f) {
                    Actionability::Free => true,
                    Actionability::Immutable => m == home,
                    Actionability::IncreaseOnly => m >= home,
                    Actionability::DecreaseOnly => m <= home,
                }
            });
            let qcost = quantize(&cost);
            slots[f] = FeatureSlot::Interval(vars.len());
            vars.push(DecisionVar {
                kind: VarKind::Interval { feature: f, partition },
                n_values,
                home,
                allowed,
                cost,
                qcost,
                splits: splits[f],
            });
        }
        for (gi, g) in fs.groups.iter().enumerate() {
            let var = vars.len();
            let home = g
                .members
                .iter()
                .position(|&m| query[m] == T::one())
                .expect("check_point validated one-hot groups");
            let alpha = fs.features[g.members[0]].alpha.as_f64();
            let k = g.members.len();
            let cost: Vec<f64> = (0..k).map(|p| if p == home { 0.0 } else { alpha }).collect();
            let allowed = BitSet::from_fn(k, |p| {
                g.members.iter().enumerate().all(|(q, &m)| {
                    let hot_now = q == home;
                    let hot_then = q == p;
                    match act(m) {
                        Actionability::Free => true,
                        Actionability::Immutable => hot_now == hot_then,
                        Actionability::IncreaseOnly => !hot_now || hot_then,
                        Actionability::DecreaseOnly => hot_now || !hot_then,
                    }
                })
            });
            for (position, &m) in g.members.iter().enumerate() {
                slots[m] = FeatureSlot::Member { var, position };
            }
            vars.push(DecisionVar {
                kind: VarKind::Group {
                    group: gi,
                    members: g.members.clone(),
                },
                n_values: k,
                home,
                allowed,
                qcost: quantize(&cost),
                cost,
                splits: g.members.iter().map(|&m| splits[m]).sum(),
            });
        }
        Ok(SearchSpace {
            vars,
            slots,
            query: query.to_vec(),
            norm,
            semantics: ens.semantics,
            grids: fs.features.iter().map(|f| f.ordinal_grid.clone()).collect(),
        })
    }

    pub fn home_values(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.home).collect()
    }

    /// Variable values of a concrete point.
    pub fn values_of(&self, point: &[T]) -> Vec<usize> {
        self.vars
            .iter()
            .map(|v| match &v.kind {
                VarKind::Interval { feature, partition } => partition.interval_of_unchecked(point[*feature]),
                VarKind::Group { members, .. } => members.iter().position(|&m| point[m] == T::one()).unwrap_or(0),
            })
            .collect()
    }

    /// Representative point of a cell: per variable, the value closest to the query.
    pub fn realize(&self, values: &[usize]) -> Result<Vec<T>> {
        let mut point = self.query.clone();
        for (var, &val) in self.vars.iter().zip(values) {
            match &var.kind {
                VarKind::Interval { feature, partition } => {
                    let grid = self.grid_of(*feature);
                    point[*feature] = realize_value(partition, self.query[*feature], val, grid).map_err(|e| match e {
                        Error::EmptyInterval { interval, .. } => Error::EmptyInterval {
                            feature: *feature,
                            interval,
                        },
                        other => other,
                    })?;
                }
                VarKind::Group { members, .. } => {
                    for (p, &m) in members.iter().enumerate() {
                        point[m] = if p == val { T::one() } else { T::zero() };
                    }
                }
            }
        }
        Ok(point)
    }

    fn grid_of(&self, feature: usize) -> Option<&[T]> {
        self.grids[feature].as_deref()
    }

    pub fn cost_of(&self, values: &[usize]) -> f64 {
        self.vars.iter().zip(values).map(|(v, &a)| v.cost[a]).sum()
    }

    pub fn qcost_of(&self, values: &[usize]) -> i64 {
        self.vars.iter().zip(values).map(|(v, &a)| v.qcost[a]).sum()
    }

    /// Compiles root-to-leaf paths into variable conditions.
    pub fn compile_tree(&self, tree: &Tree<T>) -> CompiledTree {
        let mut var_set = Vec::new();
        let leaves = tree
            .leaf_paths()
            .into_iter()
            .map(|path| {
                let mut conds: Vec<(usize, Cond)> = Vec::new();
                let mut reachable = true;
                for step in path {
                    let c = match self.slots[step.feature] {
                        FeatureSlot::Interval(var) => {
                            let VarKind::Interval { partition, .. } = &self.vars[var].kind else {
                                unreachable!()
                            };
                            let last = partition.n_intervals() - 1;
                            match partition.threshold_index(step.threshold) {
                                Some(j) if step.left => Some((var, Cond::Range(0, j - 1))),
                                Some(j) => Some((var, Cond::Range(j, last))),
                                None => {
                                    // Dropped threshold: constant routing over [lb, ub].
                                    let left = self.semantics.goes_left(partition.lb(), step.threshold);
                                    if left != step.left {
                                        reachable = false;
                                    }
                                    None
                                }
                            }
                        }
                        FeatureSlot::Member { var, position } => {
                            let k = self.vars[var].n_values;
                            let zero_left = self.semantics.goes_left(T::zero(), step.threshold);
                            let one_left = self.semantics.goes_left(T::one(), step.threshold);
                            let mask = BitSet::from_fn(k, |p| {
                                let goes_left = if p == position { one_left } else { zero_left };
                                goes_left == step.left
                            });
                            if mask.count() == k {
                                None
                            } else {
                                Some((var, Cond::Mask(mask)))
                            }
                        }
                    };
                    if let Some((var, c)) = c {
                        match conds.iter_mut().find(|(v, _)| *v == var) {
                            Some((_, existing)) => *existing = intersect(existing, &c),
                            None => conds.push((var, c)),
                        }
                    }
                }
                for (_, c) in &conds {
                    let empty = match c {
                        Cond::Range(lo, hi) => lo > hi,
                        Cond::Mask(m) => m.is_empty(),
                    };
                    if empty {
                        reachable = false;
                    }
                }
                conds.sort_by_key(|(v, _)| *v);
                for (v, _) in &conds {
                    if !var_set.contains(v) {
                        var_set.push(*v);
                    }
                }
                LeafPath { conds, reachable }
            })
            .collect();
        var_set.sort_unstable();
        CompiledTree { leaves, vars: var_set }
    }

    /// Total number of cells in the admissible grid.
    pub fn cell_count(&self) -> u128 {
        self.vars.iter().map(|v| v.allowed.count() as u128).product()
    }
}

fn intersect(a: &Cond, b: &Cond) -> Cond {
    match (a, b) {
        (Cond::Range(a0, a1), Cond::Range(b0, b1)) => Cond::Range(*a0.max(b0), *a1.min(b1)),
        (Cond::Mask(a), Cond::Mask(b)) => {
            let mut m = a.clone();
            m.intersect_with(b);
            Cond::Mask(m)
        }
        _ => unreachable!("conditions on one variable share a kind"),
    }
}

pub fn quantize(cost: &[f64]) -> Vec<i64> {
    cost.iter()
        .map(|&c| if c.is_finite() { scaled_round(c, COST_SCALE) } else { i64::MAX / 4 })
        .collect()
}
