//! Exhaustive reference solver.
//!
//! Enumerates every cell of the interval grid (after actionability), scores a
//! representative point of each with the reference evaluator, and keeps the
//! cheapest valid one. Ties go to the lexicographically first cell.

use std::time::Instant;

use rayon::prelude::*;

use crate::cp::{point_is_valid, CfOptions, Solution, Status};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::plausibility::IsolationModel;
use crate::scalar::Scalar;
use crate::space::{SearchSpace, COST_SCALE};

pub const DEFAULT_CELL_CAP: u128 = 10_000_000;

#[derive(Clone, Debug)]
pub struct OracleOptions<'a, T> {
    pub cf: CfOptions,
    pub plausibility: Option<&'a IsolationModel<T>>,
    pub cap: u128,
}

impl<T> Default for OracleOptions<'_, T> {
    fn default() -> Self {
        OracleOptions {
            cf: CfOptions::default(),
            plausibility: None,
            cap: DEFAULT_CELL_CAP,
        }
    }
}

impl<'a, T> OracleOptions<'a, T> {
    pub fn new(cf: CfOptions) -> Self {
        OracleOptions {
            cf,
            plausibility: None,
            cap: DEFAULT_CELL_CAP,
        }
    }

    pub fn with_plausibility(mut self, iso: &'a IsolationModel<T>) -> Self {
        self.plausibility = Some(iso);
        self
    }
}

/// Per-variable candidate values in lexicographic order.
pub struct SearchGrid {
    pub candidates: Vec<Vec<usize>>,
    pub cells: u128,
}

impl SearchGrid {
    pub fn new<T: Scalar>(space: &SearchSpace<T>) -> Self {
        let candidates: Vec<Vec<usize>> = space.vars.iter().map(|v| v.allowed.iter().collect()).collect();
        let cells = candidates.iter().map(|c| c.len() as u128).product();
        SearchGrid { candidates, cells }
    }

    /// Values of cell `index`; the first variable varies slowest.
    pub fn cell(&self, mut index: u64) -> Vec<usize> {
        let mut values = vec![0; self.candidates.len()];
        for (v, c) in self.candidates.iter().enumerate().rev() {
            let n = c.len() as u64;
            values[v] = c[(index % n) as usize];
            index /= n;
        }
        values
    }
}

pub fn brute_force_optimum<T: Scalar>(
    ens: &Ensemble<T>,
    query: &[T],
    target: usize,
    opts: &OracleOptions<'_, T>,
) -> Result<Solution<T>> {
    let start = Instant::now();
    if target >= ens.n_classes {
        return Err(Error::UnknownClass(target));
    }
    if !opts.cf.allow_identity && ens.predict(query).label == target {
        return Err(Error::AlreadyTarget(target));
    }
    let extra: Vec<_> = opts.plausibility.map(|m| m.trees.iter().collect()).unwrap_or_default();
    let space = SearchSpace::new(ens, &extra, query, opts.cf.norm, &opts.cf.actionability)?;
    let grid = SearchGrid::new(&space);
    if grid.cells > opts.cap {
        return Err(Error::GridTooLarge {
            cells: grid.cells,
            cap: opts.cap,
        });
    }
    let build_time = start.elapsed().as_secs_f64();
    let eps = opts.cf.epsilon_c;
    let best = (0..grid.cells as u64)
        .into_par_iter()
        .filter_map(|i| {
            let values = grid.cell(i);
            let point = space.realize(&values).ok()?;
            point_is_valid(ens, opts.plausibility, &point, target, eps).then(|| (space.qcost_of(&values), i, values, point))
        })
        .min_by_key(|(q, i, _, _)| (*q, *i));
    let solve_time = start.elapsed().as_secs_f64() - build_time;
    let sol = match best {
        Some((q, _, values, point)) => {
            let obj = space.cost_of(&values);
            Solution {
                status: Status::Optimal,
                objective: Some(obj),
                objective_quantized: Some(q),
                values: Some(values),
                point: Some(point),
                bound: q as f64 / COST_SCALE,
                trace: vec![(solve_time, obj)],
                bound_trace: vec![(solve_time, q as f64 / COST_SCALE)],
                nodes: grid.cells as u64,
                build_time,
                solve_time,
            }
        }
        None => Solution {
            status: Status::Infeasible,
            objective: None,
            objective_quantized: None,
            values: None,
            point: None,
            bound: f64::INFINITY,
            trace: Vec::new(),
            bound_trace: Vec::new(),
            nodes: grid.cells as u64,
            build_time,
            solve_time,
        },
    };
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_space::Actionability;
    use crate::fixtures::{toy_a, toy_b};

    #[test]
    fn toy_a_optimum() {
        let e = toy_a();
        let s = brute_force_optimum(&e, &[1.0], 1, &OracleOptions::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(s.values, Some(vec![1]));
    }

    #[test]
    fn toy_b_optimum() {
        let e = toy_b();
        let s = brute_force_optimum(&e, &[1.0], 1, &OracleOptions::default()).unwrap();
        assert!((s.objective.unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(s.values, Some(vec![2]));
    }

    #[test]
    fn immutable_is_infeasible() {
        let e = toy_a();
        let opts = OracleOptions::new(CfOptions::default().with_actionability(0, Actionability::Immutable));
        let s = brute_force_optimum(&e, &[1.0], 1, &opts).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn cap_is_enforced() {
        let e = toy_b();
        let opts = OracleOptions {
            cap: 2,
            ..OracleOptions::default()
        };
        assert!(matches!(
            brute_force_optimum(&e, &[1.0], 1, &opts),
            Err(Error::GridTooLarge { cells: 3, cap: 2 })
        ));
    }

    #[test]
    fn grid_order_is_lexicographic() {
        let g = SearchGrid {
            candidates: vec![vec![0, 1], vec![0, 2, 3]],
            cells: 6,
        };
        let cells: Vec<_> = (0..6).map(|i| g.cell(i)).collect();
        assert_eq!(cells[0], vec![0, 0]);
        assert_eq!(cells[1], vec![0, 2]);
        assert_eq!(cells[3], vec![1, 0]);
        assert_eq!(cells[5], vec![1, 3]);
    }
}
