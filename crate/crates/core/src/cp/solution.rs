use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    /// Incumbent proved optimal.
    Optimal,
    /// Incumbent found, search stopped by the node limit.
    Feasible,
    /// Search space exhausted without a valid counterfactual.
    Infeasible,
    /// Time budget exhausted; an incumbent may or may not exist.
    Timeout,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "OPTIMAL",
            Status::Feasible => "FEASIBLE",
            Status::Infeasible => "INFEASIBLE",
            Status::Timeout => "TIMEOUT",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution<T> {
    pub status: Status,
    /// Variable values of the incumbent cell.
    pub values: Option<Vec<usize>>,
    pub point: Option<Vec<T>>,
    /// `sum alpha * delta` of the incumbent.
    pub objective: Option<f64>,
    pub objective_quantized: Option<i64>,
    /// Proven lower bound on the optimum, in cost units.
    pub bound: f64,
    /// `(seconds, objective)` at every strict improvement.
    pub trace: Vec<(f64, f64)>,
    /// `(seconds, bound)`, nondecreasing.
    pub bound_trace: Vec<(f64, f64)>,
    pub nodes: u64,
    pub build_time: f64,
    pub solve_time: f64,
}

impl<T: Scalar> Solution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn has_incumbent(&self) -> bool {
        self.point.is_some()
    }

    /// Feature columns whose value differs from `query`.
    pub fn changed_features(&self, query: &[T]) -> Vec<usize> {
        match &self.point {
            Some(p) => p.iter().zip(query).enumerate().filter(|(_, (a, b))| a != b).map(|(i, _)| i).collect(),
            None => Vec::new(),
        }
    }

    /// Same answer, ignoring timings and search statistics.
    pub fn same_answer(&self, other: &Self) -> bool {
        self.status == other.status
            && self.values == other.values
            && self.point == other.point
            && self.objective_quantized == other.objective_quantized
    }
}
