use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use cfforest::cp::point_is_valid;
use cfforest::maxsat::{decode_model, encode_wcnf, min_weight_assignment, parse_assignment, WcnfInstance};
use cfforest::oracle::DEFAULT_CELL_CAP;
use cfforest::synth::{
    gaussian_blobs, random_point, train_forest, train_isolation_forest, Dataset, ForestConfig, IsolationConfig,
};
use cfforest::{
    brute_force_optimum, load_ensemble_file, solve_with, CfModel, CfOptions, EnsembleF64, Error, IsolationModelF64,
    Norm, OracleOptions, SolveOptions, Voting,
};

use crate::config::{BenchConfig, Method};
use crate::error::{BenchError, Result};
use crate::queries::{sample_queries, Query};
use crate::records::{anytime, cactus, summarize, write_csv, BenchRecord, RunTrace, SummaryRow};

/// Formulas up to this many variables are solved in-process by enumeration.
pub const WCNF_ENUMERATION_LIMIT: usize = 24;

pub struct BenchOutcome {
    /// Sorted by instance, then method.
    pub records: Vec<BenchRecord>,
    pub traces: Vec<RunTrace>,
    pub summary: Vec<SummaryRow>,
    pub output_dir: PathBuf,
}

pub fn run_benchmark_file(path: impl AsRef<Path>) -> Result<BenchOutcome> {
    run_benchmark(&BenchConfig::from_file(path)?)
}

/// Loads a CSV of numeric columns; a final `label` column holds class ids.
pub fn load_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|_| BenchError::Missing(path.display().to_string()))?;
    let header = r.headers()?.clone();
    let labelled = header.iter().next_back() == Some("label");
    let width = header.len() - usize::from(labelled);
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| BenchError::Config(format!("row {}: `{s}` is not a number", i + 1)))
        };
        let row = rec.iter().take(width).map(parse).collect::<Result<Vec<f64>>>()?;
        if labelled {
            labels.push(parse(&rec[width])? as usize);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(BenchError::Config(format!("{} has no rows", path.display())));
    }
    let bounds = (0..width)
        .map(|f| {
            let lo = rows.iter().map(|r| r[f]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r[f]).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    Ok(Dataset {
        rows,
        labels,
        n_classes,
        bounds,
    })
}

fn load_data(cfg: &BenchConfig, seed: u64) -> Result<Option<Dataset>> {
    if let Some(p) = &cfg.data_path {
        return Ok(Some(load_dataset_csv(p)?));
    }
    Ok(cfg
        .synthetic
        .as_ref()
        .map(|s| gaussian_blobs(s.rows, s.features, s.classes, s.spread, seed)))
}

/// One ensemble and the rows queries are drawn from.
struct Setup {
    ensemble: EnsembleF64,
    rows: Vec<Vec<f64>>,
    isolation: Option<IsolationModelF64>,
}

fn setups(cfg: &BenchConfig, seed: u64) -> Result<Vec<Setup>> {
    let data = load_data(cfg, seed)?;
    let isolation = |ens: &EnsembleF64| -> Result<Option<IsolationModelF64>> {
        let Some(d) = &data else { return Ok(None) };
        Ok(Some(train_isolation_forest(
            &d.rows,
            &IsolationConfig {
                n_trees: cfg.isolation.n_trees,
                max_samples: cfg.isolation.max_samples,
                contamination: cfg.isolation.contamination,
                semantics: ens.semantics,
                seed,
            },
        )?))
    };
    if let Some(p) = &cfg.model_path {
        if !p.exists() {
            return Err(BenchError::Missing(p.display().to_string()));
        }
        let ensemble: EnsembleF64 = load_ensemble_file(p)?;
        let rows = match &data {
            Some(d) => d.rows.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..cfg.queries.max(1) * 20)
                    .map(|_| random_point(&ensemble.features, &mut rng))
                    .collect()
            }
        };
        let isolation = if ensemble.isolation.is_some() { None } else { isolation(&ensemble)? };
        return Ok(vec![Setup {
            ensemble,
            rows,
            isolation,
        }]);
    }
    let d = data.as_ref().expect("validated: a data source exists");
    if d.labels.len() != d.rows.len() || d.n_classes < 2 {
        return Err(BenchError::Config("training needs a `label` column with at least two classes".into()));
    }
    let mut out = Vec::new();
    for &n_trees in &cfg.sweeps.n_estimators {
        for &max_depth in &cfg.sweeps.max_depth {
            let ensemble = train_forest(
                d,
                &ForestConfig {
                    n_trees,
                    max_depth,
                    voting: cfg.forest.voting,
                    semantics: cfg.forest.semantics,
                    seed,
                    ..ForestConfig::default()
                },
            );
            let isolation = isolation(&ensemble)?;
            out.push(Setup {
                ensemble,
                rows: d.rows.clone(),
                isolation,
            });
        }
    }
    Ok(out)
}

struct Ctx<'a> {
    cfg: &'a BenchConfig,
    seed: u64,
    ens: &'a EnsembleF64,
    /// Used to measure plausibility of every returned point.
    iso: Option<&'a IsolationModelF64>,
    /// Attached as a constraint when plausibility is on.
    constraint: Option<&'a IsolationModelF64>,
    norm: Norm,
}

impl Ctx<'_> {
    fn record(&self, q: &Query, method: Method) -> BenchRecord {
        BenchRecord {
            dataset: self.cfg.dataset.clone(),
            seed: self.seed,
            method: method.name().into(),
            n_estimators: self.ens.trees.len(),
            max_depth: self.ens.trees.iter().map(|t| t.max_depth()).max().unwrap_or(0),
            voting: match self.ens.voting {
                Voting::Hard => "hard".into(),
                Voting::Soft => "soft".into(),
            },
            norm: self.norm.name().into(),
            plausibility: self.constraint.is_some(),
            query_id: q.id,
            target: q.target,
            status: "ERROR".into(),
            objective: None,
            bound: None,
            build_time_s: 0.0,
            solve_time_s: 0.0,
            total_time_s: 0.0,
            plausible: None,
            valid: None,
            nodes: 0,
        }
    }

    fn options(&self) -> CfOptions {
        CfOptions {
            norm: self.norm,
            epsilon_c: self.cfg.epsilon_c,
            ..CfOptions::default()
        }
    }

    fn check_point(&self, r: &mut BenchRecord, point: &[f64]) {
        r.valid = Some(point_is_valid(self.ens, None, point, r.target, self.cfg.epsilon_c));
        r.plausible = self.iso.map(|m| m.is_plausible(point));
    }

    /// Unfinished runs are censored at the time limit.
    fn finish_times(&self, r: &mut BenchRecord) {
        let limit = self.cfg.time_limit_s;
        if r.is_solved() {
            r.total_time_s = r.build_time_s + r.solve_time_s;
        } else {
            r.build_time_s = r.build_time_s.min(limit);
            r.solve_time_s = limit - r.build_time_s;
            r.total_time_s = limit;
        }
    }

    fn run(&self, q: &Query, method: Method) -> (BenchRecord, Option<RunTrace>) {
        let mut r = self.record(q, method);
        let trace = match method {
            Method::Cpcf => self.run_cpcf(q, &mut r),
            Method::Oracle => {
                self.run_oracle(q, &mut r);
                None
            }
            Method::Wcnf => {
                self.run_wcnf(q, &mut r);
                None
            }
        };
        if !matches!(r.status.as_str(), "SKIPPED" | "ENCODED" | "ERROR") {
            self.finish_times(&mut r);
        }
        let trace = trace.map(|trace| RunTrace {
            instance: r.instance(),
            method: r.method.clone(),
            trace,
        });
        (r, trace)
    }

    fn run_cpcf(&self, q: &Query, r: &mut BenchRecord) -> Option<Vec<(f64, f64)>> {
        let model = match CfModel::build_with(self.ens, &q.point, q.target, self.options(), self.constraint) {
            Ok(m) => m,
            Err(_) => return None,
        };
        let left = (self.cfg.time_limit_s - model.build_time.as_secs_f64()).max(0.0);
        let sol = solve_with(
            &model,
            &SolveOptions {
                time_limit: Some(Duration::from_secs_f64(left)),
                threads: self.cfg.threads,
                seed: self.seed,
                ..SolveOptions::default()
            },
        );
        r.status = sol.status.to_string();
        r.objective = sol.objective;
        r.bound = sol.bound.is_finite().then_some(sol.bound);
        r.build_time_s = sol.build_time;
        r.solve_time_s = sol.solve_time;
        r.nodes = sol.nodes;
        if let Some(p) = &sol.point {
            self.check_point(r, p);
        }
        Some(sol.trace)
    }

    fn run_oracle(&self, q: &Query, r: &mut BenchRecord) {
        let mut opts = OracleOptions::new(self.options());
        opts.plausibility = self.constraint;
        opts.cap = self.cfg.oracle_cap.unwrap_or(DEFAULT_CELL_CAP);
        match brute_force_optimum(self.ens, &q.point, q.target, &opts) {
            Ok(sol) => {
                r.status = sol.status.to_string();
                r.objective = sol.objective;
                r.bound = sol.bound.is_finite().then_some(sol.bound);
                r.build_time_s = sol.build_time;
                r.solve_time_s = sol.solve_time;
                r.nodes = sol.nodes;
                if let Some(p) = &sol.point {
                    self.check_point(r, p);
                }
            }
            Err(Error::GridTooLarge { .. }) => r.status = "SKIPPED".into(),
            Err(_) => r.status = "ERROR".into(),
        }
    }

    fn run_wcnf(&self, q: &Query, r: &mut BenchRecord) {
        let start = Instant::now();
        let inst = match encode_wcnf(self.ens, &q.point, q.target, self.options(), self.constraint) {
            Ok(i) => i,
            Err(_) => return,
        };
        r.build_time_s = start.elapsed().as_secs_f64();
        let solve_start = Instant::now();
        let outcome = if inst.n_vars() <= WCNF_ENUMERATION_LIMIT {
            match min_weight_assignment(&inst.formula) {
                Ok(Some((a, _))) => Some(("OPTIMAL", Some(a))),
                Ok(None) => Some(("INFEASIBLE", None)),
                Err(_) => None,
            }
        } else if let Some(cmd) = &self.cfg.wcnf_solver {
            let budget = (self.cfg.time_limit_s - r.build_time_s).max(0.0);
            self.external(cmd, &inst, r, budget)
        } else {
            r.status = "ENCODED".into();
            return;
        };
        r.solve_time_s = solve_start.elapsed().as_secs_f64();
        let Some((status, assignment)) = outcome else {
            return;
        };
        r.status = status.into();
        if let Some(a) = assignment {
            match decode_model(&inst, &a) {
                Ok(d) => {
                    r.objective = Some(d.objective);
                    self.check_point(r, &d.point);
                }
                Err(_) => r.status = "ERROR".into(),
            }
        }
        if r.status == "OPTIMAL" {
            r.bound = r.objective;
        }
    }

    /// Runs an external MaxSAT solver on a written WCNF file.
    fn external(
        &self,
        cmd: &[String],
        inst: &WcnfInstance<'_, f64>,
        r: &BenchRecord,
        budget: f64,
    ) -> Option<(&'static str, Option<Vec<bool>>)> {
        let dir = self.cfg.output_dir.join("wcnf");
        fs::create_dir_all(&dir).ok()?;
        let path = dir.join(format!(
            "{}_s{}_n{}_d{}_{}_q{}.wcnf",
            r.dataset, r.seed, r.n_estimators, r.max_depth, r.norm, r.query_id
        ));
        fs::write(&path, inst.to_dimacs()).ok()?;
        let (prog, args) = cmd.split_first()?;
        let mut child = Command::new(prog)
            .args(args)
            .arg(&path)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .ok()?;
        let mut stdout = child.stdout.take()?;
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let deadline = Instant::now() + Duration::from_secs_f64(budget);
        loop {
            if child.try_wait().ok()?.is_some() {
                break;
            }
            if Instant::now() >= deadline {
                child.kill().ok();
                child.wait().ok();
                return Some(("TIMEOUT", None));
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let out = reader.join().ok()?.ok()?;
        let status = out.lines().find_map(|l| l.trim().strip_prefix("s ")).unwrap_or("");
        match status.trim() {
            "OPTIMUM FOUND" => Some(("OPTIMAL", parse_assignment(&out, inst.n_vars()).ok())),
            "UNSATISFIABLE" => Some(("INFEASIBLE", None)),
            "SATISFIABLE" => Some(("FEASIBLE", parse_assignment(&out, inst.n_vars()).ok())),
            _ => Some(("TIMEOUT", None)),
        }
    }
}

/// Runs every (seed, sweep point, plausibility, norm, query, method) combination.
///
/// Records are appended to `records.csv` as they finish; `summary.csv`,
/// `cactus.csv` and `anytime.csv` are written at the end.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let sink = Mutex::new(csv::Writer::from_writer(File::create(cfg.output_dir.join("records.csv"))?));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;

    let mut records = Vec::new();
    let mut traces = Vec::new();
    for &seed in &cfg.seeds {
        for setup in setups(cfg, seed)? {
            let ens = &setup.ensemble;
            let queries = sample_queries(&setup.rows, ens, cfg.queries, seed)?;
            if cfg.plausibility.contains(&true) && setup.isolation.is_none() && ens.isolation.is_none() {
                return Err(BenchError::Config(
                    "plausibility requested but no isolation forest is available".into(),
                ));
            }
            for &plaus in &cfg.plausibility {
                for &norm in &cfg.norms {
                    let results: Vec<Vec<(BenchRecord, Option<RunTrace>)>> = pool.install(|| {
                        queries
                            .par_iter()
                            .map(|q| {
                                let iso = match &ens.isolation {
                                    Some(forests) => forests.for_class(q.target),
                                    None => setup.isolation.as_ref(),
                                };
                                let ctx = Ctx {
                                    cfg,
                                    seed,
                                    ens,
                                    iso,
                                    constraint: if plaus { iso } else { None },
                                    norm,
                                };
                                cfg.methods
                                    .iter()
                                    .map(|&m| {
                                        let out = ctx.run(q, m);
                                        let mut w = sink.lock().expect("record sink");
                                        w.serialize(&out.0).and_then(|_| w.flush().map_err(csv::Error::from)).ok();
                                        out
                                    })
                                    .collect()
                            })
                            .collect()
                    });
                    for (r, t) in results.into_iter().flatten() {
                        records.push(r);
                        traces.extend(t);
                    }
                }
            }
        }
    }
    records.sort_by(|a, b| (a.instance(), &a.method).cmp(&(b.instance(), &b.method)));
    let summary = summarize(&records, cfg.time_limit_s);
    write_csv(&cfg.output_dir.join("summary.csv"), &summary)?;
    write_csv(&cfg.output_dir.join("cactus.csv"), &cactus(&records))?;
    write_csv(
        &cfg.output_dir.join("anytime.csv"),
        &anytime(&records, &traces, cfg.time_limit_s),
    )?;
    Ok(BenchOutcome {
        records,
        traces,
        summary,
        output_dir: cfg.output_dir.clone(),
    })
}

