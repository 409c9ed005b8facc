//! Domain filtering for the counterfactual model.
//!
//! A [`State`] holds one domain per decision variable and one live-leaf set
//! per compiled tree. Filtering runs to a fixpoint over four rules:
//! leaf support, per-tree domain support, linear-constraint bounds and
//! incumbent cost bounds.

use crate::bitset::BitSet;
use crate::cp::CfModel;
use crate::scalar::Scalar;
use crate::space::{Cond, DecisionVar};

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub domains: Vec<BitSet>,
    pub alive: Vec<BitSet>,
}

impl State {
    /// Admissible domains and reachable leaves.
    pub fn root<T: Scalar>(model: &CfModel<'_, T>) -> State {
        State {
            domains: model.space.vars.iter().map(|v| v.allowed.clone()).collect(),
            alive: model
                .trees
                .iter()
                .map(|t| BitSet::from_fn(t.leaves.len(), |l| t.leaves[l].reachable))
                .collect(),
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.domains.iter().all(|d| d.count() == 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Fixpoint,
    Conflict,
}

/// Quantized cost `never` reached by a real assignment.
pub(crate) const UNBOUNDED: i64 = i64::MAX / 2;

/// Cheapest value of `dom`; costs are nonincreasing toward `home` on both sides.
#[inline]
pub(crate) fn cheapest<T>(var: &DecisionVar<T>, dom: &BitSet) -> Option<(usize, i64)> {
    let below = dom.prev_at_or_before(var.home);
    let above = dom.next_at_or_after(var.home);
    match (below, above) {
        (Some(a), Some(b)) if var.qcost[b] < var.qcost[a] => Some((b, var.qcost[b])),
        (Some(a), _) => Some((a, var.qcost[a])),
        (None, Some(b)) => Some((b, var.qcost[b])),
        (None, None) => None,
    }
}

/// Cheapest cost of `dom ∩ cond`.
#[inline]
fn cheapest_in<T>(var: &DecisionVar<T>, dom: &BitSet, cond: &Cond) -> Option<i64> {
    match *cond {
        Cond::Range(lo, hi) => {
            let h = var.home;
            let pick = if h < lo {
                dom.next_at_or_after(lo).filter(|&v| v <= hi)
            } else if h > hi {
                dom.prev_at_or_before(hi).filter(|&v| v >= lo)
            } else {
                let a = dom.prev_at_or_before(h).filter(|&v| v >= lo);
                let b = dom.next_at_or_after(h).filter(|&v| v <= hi);
                return match (a, b) {
                    (Some(a), Some(b)) => Some(var.qcost[a].min(var.qcost[b])),
                    (Some(a), None) => Some(var.qcost[a]),
                    (None, Some(b)) => Some(var.qcost[b]),
                    (None, None) => None,
                };
            };
            pick.map(|v| var.qcost[v])
        }
        Cond::Mask(ref m) => m.iter().filter(|&v| dom.contains(v)).map(|v| var.qcost[v]).min(),
    }
}

fn entailed(cond: &Cond, dom: &BitSet) -> bool {
    match *cond {
        Cond::Range(lo, hi) => matches!((dom.first(), dom.last()), (Some(a), Some(b)) if a >= lo && b <= hi),
        Cond::Mask(ref m) => dom.is_subset(m),
    }
}

/// Runs filtering to a fixpoint without an incumbent.
pub fn propagate<T: Scalar>(model: &CfModel<'_, T>, state: &mut State) -> Outcome {
    Propagator::new(model).propagate(state, UNBOUNDED)
}

/// Sum over variables of the cheapest displacement cost left in each domain;
/// `f64::INFINITY` when some domain is empty.
pub fn lower_bound<T: Scalar>(model: &CfModel<'_, T>, state: &State) -> f64 {
    model
        .space
        .vars
        .iter()
        .zip(&state.domains)
        .map(|(v, d)| d.iter().map(|a| v.cost[a]).fold(f64::INFINITY, f64::min))
        .sum()
}

pub struct Propagator<'m, 'a, T> {
    model: &'m CfModel<'a, T>,
    union: Vec<BitSet>,
    leaves: Vec<usize>,
    mins: Vec<i64>,
    reach: Vec<Vec<i64>>,
    items: Vec<(i64, usize, i64)>,
}

impl<'m, 'a, T: Scalar> Propagator<'m, 'a, T> {
    pub fn new(model: &'m CfModel<'a, T>) -> Self {
        Propagator {
            model,
            union: model.space.vars.iter().map(|v| BitSet::empty(v.n_values)).collect(),
            leaves: Vec::new(),
            mins: vec![0; model.space.vars.len()],
            reach: model.trees.iter().map(|t| vec![0; t.leaves.len()]).collect(),
            items: Vec::new(),
        }
    }

    pub fn model(&self) -> &'m CfModel<'a, T> {
        self.model
    }

    /// Filters `st` against the constraints and the incumbent bound `ub`
    /// (exclusive: only assignments cheaper than `ub` survive).
    pub fn propagate(&mut self, st: &mut State, ub: i64) -> Outcome {
        loop {
            let mut changed = false;
            match self.support(st) {
                None => return Outcome::Conflict,
                Some(c) => changed |= c,
            }
            match self.linear(st) {
                None => return Outcome::Conflict,
                Some(c) => changed |= c,
            }
            if ub < UNBOUNDED {
                match self.cost(st, ub) {
                    None => return Outcome::Conflict,
                    Some(c) => changed |= c,
                }
            }
            if !changed {
                return Outcome::Fixpoint;
            }
        }
    }

    /// Leaf support and per-tree domain support.
    fn support(&mut self, st: &mut State) -> Option<bool> {
        let mut changed = false;
        for (t, tree) in self.model.trees.iter().enumerate() {
            self.leaves.clear();
            self.leaves.extend(st.alive[t].iter());
            for &l in &self.leaves {
                if !tree.leaves[l].conds.iter().all(|(v, c)| c.meets(&st.domains[*v])) {
                    st.alive[t].remove(l);
                    changed = true;
                }
            }
            if st.alive[t].is_empty() {
                return None;
            }
            'vars: for &v in &tree.vars {
                let u = &mut self.union[v];
                u.clear();
                for l in st.alive[t].iter() {
                    match tree.leaves[l].cond_on(v) {
                        None => continue 'vars,
                        Some(Cond::Range(lo, hi)) => u.insert_range(*lo, hi + 1),
                        Some(Cond::Mask(m)) => u.union_with(m),
                    }
                }
                if st.domains[v].intersect_with(u) {
                    changed = true;
                    if st.domains[v].is_empty() {
                        return None;
                    }
                }
            }
        }
        Some(changed)
    }

    /// `sum max >= rhs`, and leaves that cannot reach `rhs` are dropped.
    fn linear(&mut self, st: &mut State) -> Option<bool> {
        let mut changed = false;
        for c in &self.model.constraints {
            let mut total = 0i64;
            for term in &c.terms {
                total += st.alive[term.tree].iter().map(|l| term.coef[l]).max()?;
            }
            if total < c.rhs {
                return None;
            }
            for term in &c.terms {
                let alive = &mut st.alive[term.tree];
                let best = alive.iter().map(|l| term.coef[l]).max()?;
                let slack = total - best;
                self.leaves.clear();
                self.leaves.extend(alive.iter().filter(|&l| slack + term.coef[l] < c.rhs));
                for &l in &self.leaves {
                    alive.remove(l);
                    changed = true;
                }
            }
        }
        Some(changed)
    }

    /// Refreshes per-variable minima and per-leaf reach costs; returns the domain bound.
    fn refresh_reach(&mut self, st: &State) -> Option<i64> {
        let vars = &self.model.space.vars;
        let mut total = 0i64;
        for (v, var) in vars.iter().enumerate() {
            let (_, c) = cheapest(var, &st.domains[v])?;
            self.mins[v] = c;
            total += c;
        }
        for (t, tree) in self.model.trees.iter().enumerate() {
            for l in st.alive[t].iter() {
                let mut r = total;
                for (v, cond) in &tree.leaves[l].conds {
                    match cheapest_in(&vars[*v], &st.domains[*v], cond) {
                        Some(c) => r += c - self.mins[*v],
                        None => {
                            r = UNBOUNDED;
                            break;
                        }
                    }
                }
                self.reach[t][l] = r;
            }
        }
        Some(total)
    }

    /// Removes values and leaves whose cheapest completion reaches `ub`.
    fn cost(&mut self, st: &mut State, ub: i64) -> Option<bool> {
        let total = self.refresh_reach(st)?;
        if total >= ub {
            return None;
        }
        let mut changed = false;
        for (v, var) in self.model.space.vars.iter().enumerate() {
            let base = total - self.mins[v];
            let dom = &mut st.domains[v];
            self.leaves.clear();
            self.leaves.extend(dom.iter().filter(|&a| base + var.qcost[a] >= ub));
            for &a in &self.leaves {
                dom.remove(a);
                changed = true;
            }
        }
        for t in 0..self.model.trees.len() {
            self.leaves.clear();
            self.leaves.extend(st.alive[t].iter().filter(|&l| self.reach[t][l] >= ub));
            for &l in &self.leaves {
                st.alive[t].remove(l);
                changed = true;
            }
            if st.alive[t].is_empty() {
                return None;
            }
        }
        Some(changed)
    }

    /// Quantized lower bound on any feasible completion of `st`, combining
    /// the domain bound with a per-constraint sweep over leaf reach costs.
    /// `None` when no completion can satisfy some constraint.
    pub fn bound(&mut self, st: &State) -> Option<i64> {
        let mut lb = self.refresh_reach(st)?;
        for c in &self.model.constraints {
            if c.terms.is_empty() {
                if c.rhs > 0 {
                    return None;
                }
                continue;
            }
            self.items.clear();
            for (i, term) in c.terms.iter().enumerate() {
                let reach = &self.reach[term.tree];
                self.items
                    .extend(st.alive[term.tree].iter().map(|l| (reach[l], i, term.coef[l])));
            }
            self.items.sort_unstable_by_key(|&(r, _, _)| r);
            let mut best = vec![i64::MIN; c.terms.len()];
            let mut missing = c.terms.len();
            let mut sum = 0i64;
            let mut found = None;
            for &(r, i, coef) in &self.items {
                if best[i] == i64::MIN {
                    missing -= 1;
                    best[i] = coef;
                    sum += coef;
                } else if coef > best[i] {
                    sum += coef - best[i];
                    best[i] = coef;
                }
                if missing == 0 && sum >= c.rhs {
                    found = Some(r);
                    break;
                }
            }
            lb = lb.max(found?);
        }
        (lb < UNBOUNDED).then_some(lb)
    }

    /// Cheapest value per variable.
    pub fn completion(&self, st: &State) -> Option<(Vec<usize>, i64)> {
        let mut values = Vec::with_capacity(st.domains.len());
        let mut total = 0;
        for (var, dom) in self.model.space.vars.iter().zip(&st.domains) {
            let (a, c) = cheapest(var, dom)?;
            values.push(a);
            total += c;
        }
        Some((values, total))
    }

    /// Exact integer feasibility of a full assignment restricted to live leaves.
    pub fn feasible(&self, st: &State, values: &[usize]) -> bool {
        let mut leaves = Vec::with_capacity(self.model.trees.len());
        for (t, tree) in self.model.trees.iter().enumerate() {
            match st.alive[t].iter().find(|&l| tree.leaves[l].admits(values)) {
                Some(l) => leaves.push(l),
                None => return false,
            }
        }
        self.model.constraints.iter().all(|c| c.holds(&leaves))
    }

    /// Per-variable count of live path conditions the domain does not decide.
    pub fn undecided(&self, st: &State, counts: &mut [usize]) {
        counts.iter_mut().for_each(|c| *c = 0);
        for (t, tree) in self.model.trees.iter().enumerate() {
            for l in st.alive[t].iter() {
                for (v, cond) in &tree.leaves[l].conds {
                    if !entailed(cond, &st.domains[*v]) {
                        counts[*v] += 1;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp::{build_model, CfOptions};
    use crate::fixtures::{toy_a, toy_b};

    fn doms(st: &State) -> Vec<Vec<usize>> {
        st.domains.iter().map(|d| d.iter().collect()).collect()
    }

    #[test]
    fn toy_a_root_propagation_fixes_the_interval() {
        let e = toy_a();
        let m = build_model(&e, &[1.0], 1, CfOptions::default()).unwrap();
        let mut st = State::root(&m);
        assert_eq!(propagate(&m, &mut st), Outcome::Fixpoint);
        assert_eq!(doms(&st), vec![vec![1]]);
        assert_eq!(st.alive[0].iter().collect::<Vec<_>>(), vec![1]);
        // Distance from 1 to the closure of (3, 10] with alpha = 1.
        assert!((lower_bound(&m, &st) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn toy_b_root() {
        let e = toy_b();
        let m = build_model(&e, &[1.0], 1, CfOptions::default()).unwrap();
        let st = State::root(&m);
        assert_eq!(lower_bound(&m, &st), 0.0);
        let mut st2 = st.clone();
        assert_eq!(propagate(&m, &mut st2), Outcome::Fixpoint);
        // Only (6, 10] reaches the target: 0.4 + 0.8 against 0.8 + 0.2 needs both right leaves.
        assert_eq!(doms(&st2), vec![vec![2]]);
        let mut p = Propagator::new(&m);
        assert_eq!(p.bound(&st2), Some(5_000_000));
        assert_eq!(p.bound(&st), Some(5_000_000));
    }

    #[test]
    fn incumbent_bound_prunes() {
        let e = toy_a();
        let m = build_model(&e, &[1.0], 1, CfOptions::default()).unwrap();
        let mut p = Propagator::new(&m);
        let mut st = State::root(&m);
        assert_eq!(p.propagate(&mut st, 2_000_000), Outcome::Conflict);
        let mut st = State::root(&m);
        assert_eq!(p.propagate(&mut st, 2_000_001), Outcome::Fixpoint);
    }

    #[test]
    fn immutable_target_is_infeasible() {
        let e = toy_a();
        let opts = CfOptions::default().with_actionability(0, crate::feature_space::Actionability::Immutable);
        let m = build_model(&e, &[1.0], 1, opts).unwrap();
        let mut st = State::root(&m);
        assert_eq!(propagate(&m, &mut st), Outcome::Conflict);
    }
}
