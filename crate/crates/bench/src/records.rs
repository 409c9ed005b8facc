//! Benchmark records and the summary, cactus and anytime tables derived from them.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::{censored_quartiles, log_grid, mean_curve, normalized_anytime_error};

/// One (method, query) run. Column order is the CSV layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub seed: u64,
    pub method: String,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub voting: String,
    pub norm: String,
    pub plausibility: bool,
    pub query_id: usize,
    pub target: usize,
    /// OPTIMAL, FEASIBLE, INFEASIBLE, TIMEOUT, or ENCODED / SKIPPED / ERROR
    /// for runs that did not solve.
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub build_time_s: f64,
    pub solve_time_s: f64,
    /// Censored at the time limit for runs that did not finish.
    pub total_time_s: f64,
    /// Isolation-forest verdict on the returned point, when a forest is available.
    pub plausible: Option<bool>,
    /// Target-margin check of the returned point under the reference evaluator.
    pub valid: Option<bool>,
    pub nodes: u64,
}

impl BenchRecord {
    pub fn is_optimal(&self) -> bool {
        self.status == "OPTIMAL"
    }

    /// Proved optimal or proved infeasible.
    pub fn is_solved(&self) -> bool {
        self.status == "OPTIMAL" || self.status == "INFEASIBLE"
    }

    pub fn group(&self) -> GroupKey {
        GroupKey {
            dataset: self.dataset.clone(),
            method: self.method.clone(),
            n_estimators: self.n_estimators,
            max_depth: self.max_depth,
            voting: self.voting.clone(),
            norm: self.norm.clone(),
            plausibility: self.plausibility,
        }
    }

    pub fn instance(&self) -> InstanceKey {
        InstanceKey {
            dataset: self.dataset.clone(),
            seed: self.seed,
            n_estimators: self.n_estimators,
            max_depth: self.max_depth,
            voting: self.voting.clone(),
            norm: self.norm.clone(),
            plausibility: self.plausibility,
            query_id: self.query_id,
        }
    }
}

/// Summary grouping: everything but seed and query.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub dataset: String,
    pub method: String,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub voting: String,
    pub norm: String,
    pub plausibility: bool,
}

/// One query under one configuration, across methods.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceKey {
    pub dataset: String,
    pub seed: u64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub voting: String,
    pub norm: String,
    pub plausibility: bool,
    pub query_id: usize,
}

/// Incumbent trace of one run, kept beside its record.
#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub instance: InstanceKey,
    pub method: String,
    pub trace: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: String,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub voting: String,
    pub norm: String,
    pub plausibility: bool,
    pub runs: usize,
    pub optimal: usize,
    pub infeasible: usize,
    pub solved_fraction: f64,
    pub median_total_s: Option<f64>,
    pub q1_total_s: Option<f64>,
    pub q3_total_s: Option<f64>,
    /// Share of returned points the isolation forest accepts.
    pub plausible_rate: Option<f64>,
    pub valid_rate: Option<f64>,
    /// OPTIMAL records whose objective differs from the oracle's on the same instance.
    pub oracle_mismatches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CactusRow {
    pub dataset: String,
    pub method: String,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub voting: String,
    pub norm: String,
    pub plausibility: bool,
    pub rank: usize,
    pub total_time_s: f64,
    pub solved_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnytimeRow {
    pub dataset: String,
    pub method: String,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub voting: String,
    pub norm: String,
    pub plausibility: bool,
    /// Empty on rows of the mean curve.
    pub seed: Option<u64>,
    pub query_id: Option<usize>,
    pub time_s: f64,
    pub error: f64,
}

fn rate(flags: impl Iterator<Item = Option<bool>>) -> Option<f64> {
    let (mut n, mut yes) = (0usize, 0usize);
    for f in flags.flatten() {
        n += 1;
        yes += usize::from(f);
    }
    (n > 0).then(|| yes as f64 / n as f64)
}

/// Quantized objective equality, the resolution both solvers work at.
pub fn same_objective(a: f64, b: f64) -> bool {
    (a * 1e6).round() == (b * 1e6).round()
}

fn oracle_objectives(records: &[BenchRecord]) -> BTreeMap<InstanceKey, Option<f64>> {
    records
        .iter()
        .filter(|r| r.method == "oracle" && r.is_solved())
        .map(|r| (r.instance(), r.objective))
        .collect()
}

pub fn summarize(records: &[BenchRecord], time_limit: f64) -> Vec<SummaryRow> {
    let oracle = oracle_objectives(records);
    let mut groups: BTreeMap<GroupKey, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.group()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| {
            let times: Vec<f64> = rs
                .iter()
                .filter(|r| !matches!(r.status.as_str(), "SKIPPED" | "ENCODED" | "ERROR"))
                .map(|r| if r.is_solved() { r.total_time_s } else { time_limit })
                .collect();
            let quart = censored_quartiles(&times, time_limit);
            let optimal = rs.iter().filter(|r| r.is_optimal()).count();
            let infeasible = rs.iter().filter(|r| r.status == "INFEASIBLE").count();
            let oracle_mismatches = rs
                .iter()
                .filter(|r| r.method != "oracle" && r.is_solved())
                .filter(|r| match (oracle.get(&r.instance()), r.objective) {
                    (Some(Some(o)), Some(v)) => !same_objective(*o, v),
                    (Some(None), None) => false,
                    (Some(_), _) => true,
                    (None, _) => false,
                })
                .count();
            SummaryRow {
                runs: rs.len(),
                optimal,
                infeasible,
                solved_fraction: (optimal + infeasible) as f64 / rs.len() as f64,
                median_total_s: quart.map(|q| q.1),
                q1_total_s: quart.map(|q| q.0),
                q3_total_s: quart.map(|q| q.2),
                plausible_rate: rate(rs.iter().map(|r| r.plausible)),
                valid_rate: rate(rs.iter().map(|r| r.valid)),
                oracle_mismatches,
                dataset: k.dataset,
                method: k.method,
                n_estimators: k.n_estimators,
                max_depth: k.max_depth,
                voting: k.voting,
                norm: k.norm,
                plausibility: k.plausibility,
            }
        })
        .collect()
}

/// Solved-fraction-versus-time steps: sorted total times of OPTIMAL runs.
pub fn cactus(records: &[BenchRecord]) -> Vec<CactusRow> {
    let mut groups: BTreeMap<GroupKey, (usize, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let e = groups.entry(r.group()).or_default();
        e.0 += 1;
        if r.is_optimal() {
            e.1.push(r.total_time_s);
        }
    }
    let mut out = Vec::new();
    for (k, (n, mut times)) in groups {
        times.sort_by(f64::total_cmp);
        for (i, t) in times.into_iter().enumerate() {
            out.push(CactusRow {
                dataset: k.dataset.clone(),
                method: k.method.clone(),
                n_estimators: k.n_estimators,
                max_depth: k.max_depth,
                voting: k.voting.clone(),
                norm: k.norm.clone(),
                plausibility: k.plausibility,
                rank: i + 1,
                total_time_s: t,
                solved_fraction: (i + 1) as f64 / n as f64,
            });
        }
    }
    out
}

/// Normalized anytime curves per instance plus a mean curve per group.
///
/// Only instances every traced method solved to optimality take part;
/// `cost_max` is the worst incumbent over those traces.
pub fn anytime(records: &[BenchRecord], traces: &[RunTrace], time_limit: f64) -> Vec<AnytimeRow> {
    let mut by_instance: BTreeMap<&InstanceKey, Vec<&RunTrace>> = BTreeMap::new();
    for t in traces.iter().filter(|t| !t.trace.is_empty()) {
        by_instance.entry(&t.instance).or_default().push(t);
    }
    let status: BTreeMap<(InstanceKey, &str), &BenchRecord> =
        records.iter().map(|r| ((r.instance(), r.method.as_str()), r)).collect();

    let mut rows = Vec::new();
    let mut curves: BTreeMap<GroupKey, Vec<Vec<(f64, f64)>>> = BTreeMap::new();
    for (inst, ts) in by_instance {
        let recs: Vec<&BenchRecord> = ts
            .iter()
            .filter_map(|t| status.get(&(inst.clone(), t.method.as_str())).copied())
            .collect();
        if recs.len() != ts.len() || !recs.iter().all(|r| r.is_optimal()) {
            continue;
        }
        let cost_star = recs.iter().filter_map(|r| r.objective).fold(f64::INFINITY, f64::min);
        let cost_max = ts
            .iter()
            .flat_map(|t| t.trace.iter().map(|p| p.1))
            .fold(f64::NEG_INFINITY, f64::max);
        for (t, r) in ts.iter().zip(&recs) {
            let Some(curve) = normalized_anytime_error(&t.trace, cost_star, cost_max) else {
                continue;
            };
            for &(time_s, error) in &curve {
                rows.push(AnytimeRow {
                    dataset: inst.dataset.clone(),
                    method: t.method.clone(),
                    n_estimators: inst.n_estimators,
                    max_depth: inst.max_depth,
                    voting: inst.voting.clone(),
                    norm: inst.norm.clone(),
                    plausibility: inst.plausibility,
                    seed: Some(inst.seed),
                    query_id: Some(inst.query_id),
                    time_s,
                    error,
                });
            }
            curves.entry(r.group()).or_default().push(curve);
        }
    }
    let grid = log_grid(1e-3, time_limit, 40);
    for (k, cs) in curves {
        for (time_s, error) in mean_curve(&cs, &grid) {
            rows.push(AnytimeRow {
                dataset: k.dataset.clone(),
                method: k.method.clone(),
                n_estimators: k.n_estimators,
                max_depth: k.max_depth,
                voting: k.voting.clone(),
                norm: k.norm.clone(),
                plausibility: k.plausibility,
                seed: None,
                query_id: None,
                time_s,
                error,
            });
        }
    }
    rows
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: &str, query_id: usize, status: &str, objective: Option<f64>, total: f64) -> BenchRecord {
        BenchRecord {
            dataset: "d".into(),
            seed: 0,
            method: method.into(),
            n_estimators: 10,
            max_depth: 3,
            voting: "soft".into(),
            norm: "l1".into(),
            plausibility: false,
            query_id,
            target: 1,
            status: status.into(),
            objective,
            bound: objective,
            build_time_s: 0.0,
            solve_time_s: total,
            total_time_s: total,
            plausible: None,
            valid: objective.map(|_| true),
            nodes: 1,
        }
    }

    #[test]
    fn summary_censors_and_checks_the_oracle() {
        let rs = vec![
            rec("cpcf", 0, "OPTIMAL", Some(1.0), 1.0),
            rec("cpcf", 1, "OPTIMAL", Some(2.0), 2.0),
            rec("cpcf", 2, "TIMEOUT", Some(3.0), 900.0),
            rec("oracle", 0, "OPTIMAL", Some(1.0), 0.1),
            rec("oracle", 1, "OPTIMAL", Some(1.5), 0.1),
        ];
        let s = summarize(&rs, 900.0);
        let cp = s.iter().find(|r| r.method == "cpcf").unwrap();
        assert_eq!(cp.runs, 3);
        assert_eq!(cp.median_total_s, Some(2.0));
        assert!((cp.solved_fraction - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(cp.oracle_mismatches, 1);
        assert_eq!(cp.valid_rate, Some(1.0));
    }

    #[test]
    fn cactus_is_sorted_per_group() {
        let rs = vec![
            rec("cpcf", 0, "OPTIMAL", Some(1.0), 5.0),
            rec("cpcf", 1, "OPTIMAL", Some(1.0), 1.0),
            rec("cpcf", 2, "TIMEOUT", None, 60.0),
        ];
        let c = cactus(&rs);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].rank, c[0].total_time_s), (1, 1.0));
        assert!((c[1].solved_fraction - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn anytime_uses_worst_incumbent_and_skips_degenerate() {
        let rs = vec![rec("cpcf", 0, "OPTIMAL", Some(4.0), 2.0), rec("cpcf", 1, "OPTIMAL", Some(1.0), 1.0)];
        let inst = |q: usize| rs[q].instance();
        let traces = vec![
            RunTrace {
                instance: inst(0),
                method: "cpcf".into(),
                trace: vec![(1.0, 10.0), (2.0, 4.0)],
            },
            RunTrace {
                instance: inst(1),
                method: "cpcf".into(),
                trace: vec![(0.5, 1.0)],
            },
        ];
        let rows = anytime(&rs, &traces, 10.0);
        let per: Vec<_> = rows.iter().filter(|r| r.query_id.is_some()).map(|r| (r.time_s, r.error)).collect();
        assert_eq!(per, vec![(1.0, 1.0), (2.0, 0.0)]);
        let mean: Vec<_> = rows.iter().filter(|r| r.query_id.is_none()).collect();
        assert_eq!(mean.last().unwrap().error, 0.0);
    }

    #[test]
    fn records_round_trip_through_csv() {
        let dir = std::env::temp_dir().join(format!("cfforest-records-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("records.csv");
        let rs = vec![rec("cpcf", 0, "OPTIMAL", Some(0.25), 1.0), rec("cpcf", 1, "TIMEOUT", None, 60.0)];
        write_csv(&p, &rs).unwrap();
        assert_eq!(read_records(&p).unwrap(), rs);
        std::fs::remove_dir_all(&dir).ok();
    }
}
