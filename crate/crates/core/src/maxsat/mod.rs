//! Weighted partial MaxSAT encoding of the counterfactual problem.
//!
//! Each interval variable with `k` thresholds becomes threshold literals
//! `t_1..t_k` (`t_m` iff the interval index is below `m`), chained by
//! `(not t_m or t_{m+1})`; each one-hot group becomes one literal per member.
//! Leaf literals are tied to their paths, exactly one per tree, and the class
//! (and plausibility) constraints are pseudo-Boolean inequalities over leaf
//! literals. The L1 objective is a set of unit soft clauses, one per
//! threshold, whose violated weights telescope to the interval cost.

mod decode;
mod encode;
mod enumerate;
mod pb;
mod wcnf;

pub use decode::{decode_model, Decoded};
pub use encode::{encode_model, encode_wcnf, VarEncoding, WcnfInstance};
pub use enumerate::{min_weight_assignment, MAX_ENUMERATION_VARS};
pub use pb::{encode_pb_geq, NODE_LIMIT};
pub use wcnf::{lit_value, parse_assignment, Lit, VarMeaning, VarTable, Wcnf};
