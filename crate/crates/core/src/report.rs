//! Result document shared by the solver, the oracle and the CLI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cp::{Solution, Status};
use crate::ensemble::Ensemble;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub status: Status,
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_quantized: Option<i64>,
    /// `null` for an infeasible proof.
    pub bound: Option<f64>,
    pub build_time_s: f64,
    pub solve_time_s: f64,
    /// Counterfactual by feature name; `null` without an incumbent.
    pub point: Option<BTreeMap<String, f64>>,
    pub changed_features: Vec<String>,
    pub trace: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bound_trace: Vec<[f64; 2]>,
    pub target: usize,
    pub query: BTreeMap<String, f64>,
    pub norm: String,
    pub epsilon_c: f64,
    #[serde(default)]
    pub plausibility: bool,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub nodes: u64,
}

pub fn named_point<T: Scalar>(ens: &Ensemble<T>, point: &[T]) -> BTreeMap<String, f64> {
    ens.features
        .features
        .iter()
        .zip(point)
        .map(|(f, v)| (f.name.clone(), v.as_f64()))
        .collect()
}

pub struct ReportContext<'a, T> {
    pub ensemble: &'a Ensemble<T>,
    pub query: &'a [T],
    pub target: usize,
    pub norm: crate::feature_space::Norm,
    pub epsilon_c: f64,
    pub plausibility: bool,
}

impl ResultDocument {
    pub fn new<T: Scalar>(ctx: &ReportContext<'_, T>, sol: &Solution<T>, oracle: bool) -> Self {
        let names = &ctx.ensemble.features.features;
        ResultDocument {
            status: sol.status,
            objective: sol.objective,
            objective_quantized: sol.objective_quantized,
            bound: sol.bound.is_finite().then_some(sol.bound),
            build_time_s: sol.build_time,
            solve_time_s: sol.solve_time,
            point: sol.point.as_ref().map(|p| named_point(ctx.ensemble, p)),
            changed_features: sol
                .changed_features(ctx.query)
                .into_iter()
                .map(|i| names[i].name.clone())
                .collect(),
            trace: sol.trace.iter().map(|&(t, c)| [t, c]).collect(),
            bound_trace: sol.bound_trace.iter().map(|&(t, c)| [t, c]).collect(),
            target: ctx.target,
            query: named_point(ctx.ensemble, ctx.query),
            norm: ctx.norm.to_string(),
            epsilon_c: ctx.epsilon_c,
            plausibility: ctx.plausibility,
            oracle,
            nodes: sol.nodes,
        }
    }

    /// Dense point in feature order, if every feature is named.
    pub fn dense_point<T: Scalar>(&self, ens: &Ensemble<T>) -> Option<Vec<T>> {
        let p = self.point.as_ref()?;
        ens.features
            .features
            .iter()
            .map(|f| p.get(&f.name).map(|&v| T::of(v)))
            .collect()
    }

    pub fn dense_query<T: Scalar>(&self, ens: &Ensemble<T>) -> Option<Vec<T>> {
        ens.features
            .features
            .iter()
            .map(|f| self.query.get(&f.name).map(|&v| T::of(v)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}
