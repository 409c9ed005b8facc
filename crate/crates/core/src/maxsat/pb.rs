//! Pseudo-Boolean `sum a_i l_i >= k` to CNF through a reduced ordered
//! decision diagram with interval memoization.
//!
//! Node `(i, K)` stands for `sum_{j >= i} a_j l_j >= K`. Every node built for
//! some `K` is reused for the whole interval of right-hand sides it agrees
//! with, which keeps the diagram small for the few distinct coefficient
//! values of tree ensembles. Nodes implied by the root are emitted without an
//! auxiliary variable.

use std::collections::HashSet;

use super::wcnf::{Lit, VarMeaning, VarTable};
use crate::error::{Error, Result};

/// Decision-diagram node cap per constraint.
pub const NODE_LIMIT: usize = 2_000_000;

const NEG_INF: i64 = i64::MIN / 4;
const POS_INF: i64 = i64::MAX / 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Ref {
    True,
    False,
    Node(usize),
}

struct Diagram {
    lits: Vec<Lit>,
    coefs: Vec<i64>,
    suffix: Vec<i64>,
    /// `(i, hi, lo)`: the literal index and its two successors.
    nodes: Vec<(usize, Ref, Ref)>,
    memo: Vec<Vec<(i64, i64, Ref)>>,
}

impl Diagram {
    fn build(&mut self, i: usize, k: i64) -> Result<(Ref, i64, i64)> {
        if k <= 0 {
            return Ok((Ref::True, NEG_INF, 0));
        }
        if k > self.suffix[i] {
            return Ok((Ref::False, self.suffix[i] + 1, POS_INF));
        }
        if let Some(&(b, g, r)) = self.memo[i].iter().find(|(b, g, _)| *b <= k && k <= *g) {
            return Ok((r, b, g));
        }
        let a = self.coefs[i];
        let (hi, b1, g1) = self.build(i + 1, k - a)?;
        let (lo, b0, g0) = self.build(i + 1, k)?;
        let beta = (b1.saturating_add(a)).max(b0);
        let gamma = (g1.saturating_add(a)).min(g0);
        let r = if hi == lo {
            hi
        } else {
            if self.nodes.len() >= NODE_LIMIT {
                return Err(Error::EncodingTooLarge(NODE_LIMIT));
            }
            self.nodes.push((i, hi, lo));
            Ref::Node(self.nodes.len() - 1)
        };
        self.memo[i].push((beta, gamma, r));
        Ok((r, beta, gamma))
    }
}

/// Clauses satisfied by exactly the assignments meeting `sum coef * lit >= rhs`.
/// Terms on the same literal must not repeat. Auxiliaries are drawn from `vars`.
pub fn encode_pb_geq(terms: &[(Lit, i64)], rhs: i64, vars: &mut VarTable) -> Result<Vec<Vec<Lit>>> {
    let mut k = rhs;
    let mut norm: Vec<(Lit, i64)> = Vec::with_capacity(terms.len());
    for &(l, a) in terms {
        match a.cmp(&0) {
            std::cmp::Ordering::Greater => norm.push((l, a)),
            std::cmp::Ordering::Less => {
                // a*l = a - a*(not l)
                norm.push((-l, -a));
                k -= a;
            }
            std::cmp::Ordering::Equal => {}
        }
    }
    if k <= 0 {
        return Ok(Vec::new());
    }
    let total: i64 = norm.iter().map(|t| t.1).sum();
    if total < k {
        return Ok(vec![Vec::new()]);
    }
    norm.sort_by_key(|t| std::cmp::Reverse(t.1));
    let n = norm.len();
    let mut suffix = vec![0i64; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + norm[i].1;
    }
    let mut d = Diagram {
        lits: norm.iter().map(|t| t.0).collect(),
        coefs: norm.iter().map(|t| t.1).collect(),
        suffix,
        nodes: Vec::new(),
        memo: vec![Vec::new(); n + 1],
    };
    let (root, _, _) = d.build(0, k)?;
    let Ref::Node(root) = root else {
        unreachable!("0 < k <= total yields an internal root")
    };

    // Nodes implied by the root: a false successor forces the other branch.
    let mut forced = HashSet::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        if !forced.insert(n) {
            continue;
        }
        let (_, hi, lo) = d.nodes[n];
        match (hi, lo) {
            (Ref::Node(h), Ref::False) => stack.push(h),
            (Ref::False, Ref::Node(l)) => stack.push(l),
            _ => {}
        }
    }

    let mut aux: Vec<Option<Lit>> = vec![None; d.nodes.len()];
    let mut clauses = Vec::new();
    let mut seen = HashSet::new();
    let mut stack = vec![root];
    let lit_of = |r: Ref, aux: &mut Vec<Option<Lit>>, vars: &mut VarTable| -> Option<Option<Lit>> {
        // None: constant true; Some(None): constant false; Some(Some(l)): literal.
        match r {
            Ref::True => None,
            Ref::False => Some(None),
            Ref::Node(m) if forced.contains(&m) => None,
            Ref::Node(m) => Some(Some(*aux[m].get_or_insert_with(|| vars.fresh(VarMeaning::Aux)))),
        }
    };
    while let Some(n) = stack.pop() {
        if !seen.insert(n) {
            continue;
        }
        let (i, hi, lo) = d.nodes[n];
        let x = d.lits[i];
        let guard = if forced.contains(&n) {
            None
        } else {
            Some(-lit_of(Ref::Node(n), &mut aux, vars).flatten().expect("unforced node has a literal"))
        };
        for (branch, sel) in [(hi, -x), (lo, x)] {
            if let Some(target) = lit_of(branch, &mut aux, vars) {
                let mut c: Vec<Lit> = guard.into_iter().collect();
                c.push(sel);
                c.extend(target);
                clauses.push(c);
            }
            if let Ref::Node(m) = branch {
                stack.push(m);
            }
        }
    }
    Ok(clauses)
}
