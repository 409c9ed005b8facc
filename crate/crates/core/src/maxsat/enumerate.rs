//! Exact minimum-weight search over every valuation of a small formula.
//!
//! Variables are assigned in index order; a clause is checked as soon as its
//! largest variable is assigned, and a branch is abandoned once a hard clause
//! fails or the violated soft weight reaches the best found.

use super::wcnf::{Lit, Wcnf};
use crate::error::{Error, Result};

pub const MAX_ENUMERATION_VARS: usize = 32;

struct Clause {
    pos: u64,
    neg: u64,
    weight: Option<u64>,
}

/// Minimum-weight hard-feasible valuation, `None` when the hard part is UNSAT.
pub fn min_weight_assignment(w: &Wcnf) -> Result<Option<(Vec<bool>, u64)>> {
    let n = w.n_vars;
    if n > MAX_ENUMERATION_VARS {
        return Err(Error::Parse(format!(
            "{n} variables exceed the enumeration limit of {MAX_ENUMERATION_VARS}"
        )));
    }
    // by_last[v]: clauses whose largest variable is v (0-based); empty clauses at 0.
    let mut by_last: Vec<Vec<Clause>> = (0..n.max(1)).map(|_| Vec::new()).collect();
    let mut add = |lits: &[Lit], weight: Option<u64>| {
        let mut c = Clause { pos: 0, neg: 0, weight };
        let mut last = 0;
        for &l in lits {
            let v = l.unsigned_abs() as usize - 1;
            last = last.max(v);
            if l > 0 {
                c.pos |= 1 << v;
            } else {
                c.neg |= 1 << v;
            }
        }
        by_last[last].push(c);
    };
    for h in &w.hard {
        add(h, None);
    }
    for (s, wt) in &w.soft {
        add(s, Some(*wt));
    }
    let mut best: Option<(u64, u64)> = None;
    search(&by_last, n, 0, 0, 0, &mut best);
    Ok(best.map(|(mask, cost)| ((0..n).map(|v| mask >> v & 1 == 1).collect(), cost)))
}

fn search(by_last: &[Vec<Clause>], n: usize, v: usize, mask: u64, cost: u64, best: &mut Option<(u64, u64)>) {
    if v == n {
        if n == 0 {
            // Only empty clauses can exist; check them here.
            let mut c = cost;
            for cl in by_last.first().into_iter().flatten() {
                match cl.weight {
                    None => return,
                    Some(w) => c += w,
                }
            }
            *best = Some((0, c));
            return;
        }
        if best.is_none_or(|(_, b)| cost < b) {
            *best = Some((mask, cost));
        }
        return;
    }
    for bit in [false, true] {
        let m = if bit { mask | 1 << v } else { mask };
        let mut c = cost;
        let mut ok = true;
        for cl in &by_last[v] {
            let sat = m & cl.pos != 0 || !m & cl.neg & ((1u64 << (v + 1)) - 1) != 0;
            if !sat {
                match cl.weight {
                    None => {
                        ok = false;
                        break;
                    }
                    Some(w) => c += w,
                }
            }
        }
        if ok && best.is_none_or(|(_, b)| c < b) {
            search(by_last, n, v + 1, m, c, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_minimum() {
        let w = Wcnf {
            n_vars: 3,
            hard: vec![vec![1, 2], vec![-1, -2]],
            soft: vec![(vec![1], 5), (vec![2], 3), (vec![-3], 1)],
            top: 10,
            comments: vec![],
        };
        let (a, c) = min_weight_assignment(&w).unwrap().unwrap();
        assert_eq!(c, 3);
        assert_eq!(a, vec![true, false, false]);
    }

    #[test]
    fn unsat_hard_part() {
        let w = Wcnf {
            n_vars: 1,
            hard: vec![vec![1], vec![-1]],
            soft: vec![],
            top: 1,
            comments: vec![],
        };
        assert!(min_weight_assignment(&w).unwrap().is_none());
        let w = Wcnf {
            n_vars: 1,
            hard: vec![vec![]],
            soft: vec![],
            top: 1,
            comments: vec![],
        };
        assert!(min_weight_assignment(&w).unwrap().is_none());
    }
}
