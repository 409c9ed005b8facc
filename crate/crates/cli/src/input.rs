//! Query, actionability and isolation-forest arguments.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

use cfforest::{load_ensemble_file, load_isolation, Actionability, EnsembleF64, IsolationForests};

pub fn load_model(path: &Path) -> Result<EnsembleF64> {
    load_ensemble_file(path).with_context(|| format!("loading model {}", path.display()))
}

/// Inline JSON (`{"f0": 1.0}` or `[1.0, ...]`) or a path to a file holding it.
pub fn parse_query(ens: &EnsembleF64, arg: &str) -> Result<Vec<f64>> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading query file {arg}"))?
    };
    let value: Value = serde_json::from_str(&text).context("query is not valid JSON")?;
    let names = &ens.features.features;
    let point = match value {
        Value::Array(xs) => {
            if xs.len() != names.len() {
                bail!("query has {} values, model has {} features", xs.len(), names.len());
            }
            xs.iter()
                .map(|x| x.as_f64().ok_or_else(|| anyhow!("query value `{x}` is not a number")))
                .collect::<Result<Vec<_>>>()?
        }
        Value::Object(map) => {
            if let Some(k) = map.keys().find(|k| ens.features.index_of(k).is_none()) {
                bail!("query names unknown feature `{k}`");
            }
            names
                .iter()
                .map(|f| {
                    map.get(&f.name)
                        .ok_or_else(|| anyhow!("query lacks feature `{}`", f.name))?
                        .as_f64()
                        .ok_or_else(|| anyhow!("query value of `{}` is not a number", f.name))
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => bail!("query must be a JSON object or array"),
    };
    ens.features.check_point(&point)?;
    Ok(point)
}

/// `name=mode` pairs, repeated or comma-separated.
pub fn parse_actionability(ens: &EnsembleF64, args: &[String]) -> Result<BTreeMap<usize, Actionability>> {
    let mut out = BTreeMap::new();
    for item in args.iter().flat_map(|a| a.split(',')).filter(|s| !s.trim().is_empty()) {
        let (name, mode) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("actionability `{item}` is not of the form name=mode"))?;
        let f = ens
            .features
            .index_of(name.trim())
            .ok_or_else(|| anyhow!("actionability names unknown feature `{name}`"))?;
        out.insert(f, mode.trim().parse::<Actionability>()?);
    }
    Ok(out)
}

/// `embedded` takes the model's own block; anything else is a file path.
pub fn load_plausibility(ens: &EnsembleF64, arg: Option<&str>) -> Result<Option<IsolationForests<f64>>> {
    match arg {
        None => Ok(None),
        Some("embedded") => ens
            .isolation
            .clone()
            .map(Some)
            .ok_or_else(|| anyhow!("model has no embedded isolation_forest block")),
        Some(path) => {
            let bytes = std::fs::read(path).with_context(|| format!("reading isolation forest {path}"))?;
            Ok(Some(load_isolation(&bytes, ens)?))
        }
    }
}
