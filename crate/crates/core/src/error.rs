use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("dangling child index {index} in tree {tree}")]
    DanglingChild { tree: usize, index: i64 },
    #[error("tree {tree} is not a single rooted binary tree: {reason}")]
    MalformedTree { tree: usize, reason: String },
    #[error("score vector of tree {tree} leaf {leaf} has length {got}, expected {expected}")]
    ScoreLength {
        tree: usize,
        leaf: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-one-hot leaf under hard voting (tree {tree}, leaf {leaf})")]
    NonOneHotLeaf { tree: usize, leaf: usize },
    #[error("invalid feature `{name}`: {reason}")]
    Feature { name: String, reason: String },
    #[error("value {value} of feature {feature} is outside [{lb}, {ub}]")]
    OutOfBounds {
        feature: usize,
        value: f64,
        lb: f64,
        ub: f64,
    },
    #[error("invalid query: {0}")]
    Query(String),
    #[error("query is already classified as target class {0}")]
    AlreadyTarget(usize),
    #[error("unknown target class {0}")]
    UnknownClass(usize),
    #[error("interval {interval} of feature {feature} holds no admissible value")]
    EmptyInterval { feature: usize, interval: usize },
    #[error("isolation forest does not match the ensemble: {0}")]
    FeatureMismatch(String),
    #[error("search grid has {cells} cells, above the cap of {cap}")]
    GridTooLarge { cells: u128, cap: u128 },
    #[error("{0} unsupported by WCNF encoder")]
    UnsupportedNorm(&'static str),
    #[error("degenerate objective: every soft clause weight is zero")]
    DegenerateObjective,
    #[error("pseudo-Boolean encoding exceeds {0} decision-diagram nodes")]
    EncodingTooLarge(usize),
    #[error("top weight overflows 2^63-1")]
    WeightOverflow,
    #[error("assignment violates hard clause {0}")]
    HardClauseViolated(usize),
    #[error("threshold literals of feature {0} are not monotone")]
    NonMonotone(usize),
    #[error("decoded counterfactual fails the target-class check")]
    InvalidCounterfactual,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
