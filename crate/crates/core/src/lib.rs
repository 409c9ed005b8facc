//! Exact, plausible counterfactual explanations for tree ensembles.
//!
//! A trained ensemble (random forest or gradient boosting) is loaded from the
//! `cfforest/1` interchange document. Each feature's domain is cut at the
//! ensemble's split thresholds into finitely many intervals; the cheapest
//! change of a query that flips the ensemble's decision is then found by
//! either of two exact back ends over those intervals:
//!
//! * [`cp`]: a finite-domain branch-and-bound solver with exact integer
//!   class-score constraints.
//! * [`maxsat`]: an encoder to weighted partial MaxSAT (DIMACS `wcnf`) and a
//!   decoder for external solver output.
//!
//! [`oracle`] enumerates the interval grid directly and is the reference for
//! both. [`plausibility`] adds an isolation-forest constraint.
//!
//! The model and evaluator layer is generic over [`Scalar`] (`f32`, `f64`);
//! solver arithmetic is on scaled integers.

pub mod bitset;
pub mod cp;
pub mod ensemble;
pub mod error;
pub mod feature_space;
pub mod fixtures;
pub mod format;
pub mod maxsat;
pub mod oracle;
pub mod plausibility;
pub mod report;
pub mod scalar;
pub mod space;
pub mod synth;

pub use cp::{build_model, solve, solve_with, CfModel, CfOptions, Solution, SolveOptions, Status};
pub use ensemble::{predict_scores, route_leaf, Ensemble, Prediction, SplitSemantics, Tree, Voting};
pub use error::{Error, Result};
pub use feature_space::{
    build_partition, displacement_cost, interval_of, realize_value, Actionability, FeatureKind, FeaturePartition,
    FeatureSpace, FeatureSpec, Norm,
};
pub use format::{load_ensemble, load_ensemble_file, load_isolation, ModelDocument, SCHEMA_VERSION};
pub use oracle::{brute_force_optimum, OracleOptions};
pub use plausibility::{attach_plausibility, h_min_threshold, IsolationForests, IsolationModel};
pub use report::ResultDocument;
pub use scalar::Scalar;

pub type EnsembleF32 = Ensemble<f32>;
pub type EnsembleF64 = Ensemble<f64>;
pub type SolutionF32 = Solution<f32>;
pub type SolutionF64 = Solution<f64>;
pub type IsolationModelF64 = IsolationModel<f64>;
