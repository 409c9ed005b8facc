use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cfforest::{Norm, SplitSemantics, Voting};

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cpcf,
    /// WCNF encoding, solved by enumeration when tiny, else by `wcnf_solver`.
    Wcnf,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Cpcf => "cpcf",
            Method::Wcnf => "wcnf",
            Method::Oracle => "oracle",
        }
    }
}

/// Gaussian blobs on `[0, 10]^features`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    #[serde(default = "default_rows")]
    pub rows: usize,
    pub features: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_spread")]
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSpec {
    pub voting: Voting,
    pub semantics: SplitSemantics,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec {
            voting: Voting::Soft,
            semantics: SplitSemantics::LeftClosed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sweeps {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
}

impl Default for Sweeps {
    fn default() -> Self {
        Sweeps {
            n_estimators: vec![10],
            max_depth: vec![5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsolationSpec {
    pub n_trees: usize,
    pub max_samples: usize,
    pub contamination: f64,
}

impl Default for IsolationSpec {
    fn default() -> Self {
        IsolationSpec {
            n_trees: 100,
            max_samples: 256,
            contamination: 0.1,
        }
    }
}

/// One benchmark run. Relative paths resolve against the config file.
///
/// With `model_path` the model is used as is and `sweeps` is ignored;
/// otherwise a forest is trained per sweep point on `data_path` or
/// `synthetic` data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_dataset")]
    pub dataset: String,
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    /// CSV with a header; a final `label` column is used for training.
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticData>,
    #[serde(default)]
    pub forest: ForestSpec,
    #[serde(default)]
    pub sweeps: Sweeps,
    #[serde(default = "default_queries")]
    pub queries: usize,
    pub methods: Vec<Method>,
    #[serde(default = "default_norms")]
    pub norms: Vec<Norm>,
    /// Isolation-forest constraint off/on, one run per entry.
    #[serde(default = "default_plausibility")]
    pub plausibility: Vec<bool>,
    #[serde(default)]
    pub isolation: IsolationSpec,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_epsilon")]
    pub epsilon_c: f64,
    /// Solver threads per query.
    #[serde(default = "default_one")]
    pub threads: usize,
    /// Queries solved concurrently.
    #[serde(default = "default_one")]
    pub workers: usize,
    #[serde(default)]
    pub oracle_cap: Option<u128>,
    /// External MaxSAT command; the WCNF path is appended as last argument.
    #[serde(default)]
    pub wcnf_solver: Option<Vec<String>>,
    pub output_dir: PathBuf,
}

fn default_dataset() -> String {
    "synthetic".into()
}
fn default_rows() -> usize {
    1000
}
fn default_classes() -> usize {
    2
}
fn default_spread() -> f64 {
    1.5
}
fn default_queries() -> usize {
    10
}
fn default_norms() -> Vec<Norm> {
    vec![Norm::L1]
}
fn default_plausibility() -> Vec<bool> {
    vec![false]
}
fn default_time_limit() -> f64 {
    60.0
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_epsilon() -> f64 {
    1e-7
}
fn default_one() -> usize {
    1
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: BenchConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|_| BenchError::Missing(path.display().to_string()))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.model_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data_path.as_mut() {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::Config(m.into()));
        if self.methods.is_empty() {
            return bad("no methods");
        }
        if self.norms.is_empty() || self.seeds.is_empty() || self.plausibility.is_empty() {
            return bad("norms, seeds and plausibility must be non-empty");
        }
        if self.time_limit_s.is_nan() || self.time_limit_s <= 0.0 {
            return bad("time_limit_s must be positive");
        }
        if self.epsilon_c.is_nan() || self.epsilon_c <= 0.0 {
            return bad("epsilon_c must be positive");
        }
        if self.threads == 0 || self.workers == 0 {
            return bad("threads and workers must be at least 1");
        }
        if self.model_path.is_none() && self.data_path.is_none() && self.synthetic.is_none() {
            return bad("one of model_path, data_path or synthetic is required");
        }
        if self.data_path.is_some() && self.synthetic.is_some() {
            return bad("data_path and synthetic are exclusive");
        }
        if self.model_path.is_none() && (self.sweeps.n_estimators.is_empty() || self.sweeps.max_depth.is_empty()) {
            return bad("sweeps must list at least one n_estimators and max_depth");
        }
        if self.methods.contains(&Method::Wcnf) {
            if let Some(n) = self.norms.iter().find(|n| **n != Norm::L1) {
                return Err(BenchError::Incompatible {
                    method: "wcnf",
                    what: format!("norm {}", n.name()),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = BenchConfig::from_json(r#"{"synthetic": {"features": 3}, "methods": ["cpcf"], "output_dir": "out"}"#).unwrap();
        assert_eq!(c.queries, 10);
        assert_eq!(c.norms, vec![Norm::L1]);
        assert_eq!(c.time_limit_s, 60.0);
        assert_eq!(c.sweeps.max_depth, vec![5]);
        assert_eq!(c.forest.voting, Voting::Soft);
    }

    #[test]
    fn wcnf_rejects_l2() {
        let e = BenchConfig::from_json(
            r#"{"synthetic": {"features": 3}, "methods": ["wcnf"], "norms": ["l2"], "output_dir": "out"}"#,
        )
        .expect_err("l2 with wcnf");
        assert!(matches!(e, BenchError::Incompatible { method: "wcnf", .. }));
    }

    #[test]
    fn needs_a_data_source() {
        assert!(BenchConfig::from_json(r#"{"methods": ["cpcf"], "output_dir": "out"}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"synthetic": {"features": 2}, "methods": ["cpcf"], "output": "x"}"#).is_err());
    }
}
