use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use cfforest::maxsat::{decode_model, encode_wcnf, parse_assignment};
use cfforest::report::ReportContext;
use cfforest::space::SearchSpace;
use cfforest::{
    brute_force_optimum, solve_with, CfModel, CfOptions, EnsembleF64, IsolationModelF64, Norm, OracleOptions,
    ResultDocument, SolutionF64, SolveOptions, Status,
};

mod input;

use input::{load_model, load_plausibility, parse_actionability, parse_query};

/// Exit codes.
const OK: u8 = 0;
const FAILED: u8 = 1;
const TIMEOUT_WITH_INCUMBENT: u8 = 2;
const INFEASIBLE: u8 = 3;
const INPUT_ERROR: u8 = 4;
const NO_ANSWER: u8 = 5;

#[derive(Parser)]
#[command(name = "cfforest", version, about = "Exact counterfactual explanations for tree ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimal counterfactual by branch and bound.
    Explain {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, default_value_t = 900.0)]
        time_limit: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "CFFOREST_THREADS", default_value_t = 8)]
        threads: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Optimal counterfactual by exhaustive enumeration of the interval grid.
    Oracle {
        #[command(flatten)]
        problem: Problem,
        /// Largest grid enumerated.
        #[arg(long, default_value_t = cfforest::oracle::DEFAULT_CELL_CAP)]
        cap: u128,
        #[command(flatten)]
        out: Output,
    },
    /// Weighted partial MaxSAT instance in DIMACS WCNF.
    EncodeWcnf {
        #[command(flatten)]
        problem: Problem,
        /// Destination; standard output when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Result document from an external MaxSAT solver's output on `encode-wcnf`.
    DecodeWcnf {
        #[command(flatten)]
        problem: Problem,
        /// Solver output with `s` and `v` lines.
        #[arg(long)]
        assignment: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Benchmark runs described by a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-checks a result document against the model.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        result: PathBuf,
        /// Isolation forest for documents produced with plausibility
        /// (`embedded` or a path); defaults to the model's own block.
        #[arg(long)]
        plausibility: Option<String>,
    },
}

#[derive(Args)]
struct Problem {
    #[arg(long)]
    model: PathBuf,
    /// JSON object keyed by feature name, JSON array, or a file holding either.
    #[arg(long)]
    query: String,
    #[arg(long)]
    target: usize,
    #[arg(long, default_value = "l1", value_parser = parse_norm)]
    norm: Norm,
    #[arg(long, default_value_t = 1e-7)]
    epsilon_c: f64,
    /// Isolation-forest constraint: `embedded` or a path.
    #[arg(long)]
    plausibility: Option<String>,
    /// `name=mode` with mode free, immutable, increase_only or decrease_only.
    #[arg(long)]
    actionability: Vec<String>,
}

#[derive(Args)]
struct Output {
    /// Result document destination.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write zero timings so repeated runs give identical files.
    #[arg(long)]
    no_timings: bool,
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    match s.to_ascii_lowercase().as_str() {
        "l0" => Ok(Norm::L0),
        "l1" => Ok(Norm::L1),
        "l2" => Ok(Norm::L2),
        _ => Err(format!("unknown norm `{s}`, expected l0, l1 or l2")),
    }
}

/// A failed command: exit code and message.
struct Fail(u8, anyhow::Error);

trait OrFail<T> {
    fn input(self) -> Result<T, Fail>;
    fn internal(self) -> Result<T, Fail>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn input(self) -> Result<T, Fail> {
        self.map_err(|e| Fail(INPUT_ERROR, e.into()))
    }
    fn internal(self) -> Result<T, Fail> {
        self.map_err(|e| Fail(FAILED, e.into()))
    }
}

/// Loaded inputs of a single-query command.
struct Loaded {
    ens: EnsembleF64,
    query: Vec<f64>,
    options: CfOptions,
    iso: Option<IsolationModelF64>,
}

impl Problem {
    fn load(&self) -> Result<Loaded> {
        let ens = load_model(&self.model)?;
        let query = parse_query(&ens, &self.query)?;
        let actionability = parse_actionability(&ens, &self.actionability)?;
        let iso = match load_plausibility(&ens, self.plausibility.as_deref())? {
            None => None,
            Some(forests) => Some(
                forests
                    .for_class(self.target)
                    .cloned()
                    .ok_or_else(|| anyhow!("no isolation forest for class {}", self.target))?,
            ),
        };
        let options = CfOptions {
            norm: self.norm,
            epsilon_c: self.epsilon_c,
            actionability,
            allow_identity: false,
        };
        Ok(Loaded {
            ens,
            query,
            options,
            iso,
        })
    }
}

impl Loaded {
    fn context(&self, target: usize) -> ReportContext<'_, f64> {
        ReportContext {
            ensemble: &self.ens,
            query: &self.query,
            target,
            norm: self.options.norm,
            epsilon_c: self.options.epsilon_c,
            plausibility: self.iso.is_some(),
        }
    }
}

fn status_code(sol: &SolutionF64) -> u8 {
    match sol.status {
        Status::Optimal => OK,
        Status::Infeasible => INFEASIBLE,
        Status::Feasible | Status::Timeout if sol.has_incumbent() => TIMEOUT_WITH_INCUMBENT,
        Status::Feasible | Status::Timeout => NO_ANSWER,
    }
}

fn emit(doc: &mut ResultDocument, out: &Output) -> Result<(), Fail> {
    if out.no_timings {
        doc.build_time_s = 0.0;
        doc.solve_time_s = 0.0;
        doc.trace.iter_mut().for_each(|p| p[0] = 0.0);
        doc.bound_trace.iter_mut().for_each(|p| p[0] = 0.0);
    }
    if let Some(path) = &out.output {
        std::fs::write(path, doc.to_json() + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .internal()?;
    }
    println!("status: {}", doc.status);
    match doc.objective {
        Some(o) => println!("objective: {o}"),
        None => println!("objective: none"),
    }
    if doc.point.is_some() {
        println!("changed features: {}", doc.changed_features.join(", "));
    }
    println!(
        "time: build {:.3}s, solve {:.3}s, total {:.3}s",
        doc.build_time_s,
        doc.solve_time_s,
        doc.build_time_s + doc.solve_time_s
    );
    Ok(())
}

fn explain(problem: &Problem, time_limit: f64, seed: u64, threads: usize, out: &Output) -> Result<u8, Fail> {
    let l = problem.load().input()?;
    let model = CfModel::build_with(&l.ens, &l.query, problem.target, l.options.clone(), l.iso.as_ref()).input()?;
    let sol = solve_with(
        &model,
        &SolveOptions {
            time_limit: Some(Duration::from_secs_f64(time_limit.max(0.0))),
            threads: threads.max(1),
            seed,
            ..SolveOptions::default()
        },
    );
    let mut doc = ResultDocument::new(&l.context(problem.target), &sol, false);
    emit(&mut doc, out)?;
    Ok(status_code(&sol))
}

fn oracle(problem: &Problem, cap: u128, out: &Output) -> Result<u8, Fail> {
    let l = problem.load().input()?;
    let opts = OracleOptions {
        cf: l.options.clone(),
        plausibility: l.iso.as_ref(),
        cap,
    };
    let sol = brute_force_optimum(&l.ens, &l.query, problem.target, &opts).input()?;
    let mut doc = ResultDocument::new(&l.context(problem.target), &sol, true);
    emit(&mut doc, out)?;
    Ok(status_code(&sol))
}

fn encode(problem: &Problem, output: Option<&Path>) -> Result<u8, Fail> {
    let l = problem.load().input()?;
    let inst = encode_wcnf(&l.ens, &l.query, problem.target, l.options.clone(), l.iso.as_ref()).input()?;
    let text = inst.to_dimacs();
    match output {
        Some(p) => {
            std::fs::write(p, text)
                .with_context(|| format!("writing {}", p.display()))
                .internal()?;
            let f = &inst.formula;
            println!(
                "variables: {}, hard clauses: {}, soft clauses: {}, top: {}",
                f.n_vars,
                f.hard.len(),
                f.soft.len(),
                f.top
            );
        }
        None => print!("{text}"),
    }
    Ok(OK)
}

fn decode(problem: &Problem, assignment: &Path, out: &Output) -> Result<u8, Fail> {
    let l = problem.load().input()?;
    let inst = encode_wcnf(&l.ens, &l.query, problem.target, l.options.clone(), l.iso.as_ref()).input()?;
    let text = std::fs::read_to_string(assignment)
        .with_context(|| format!("reading {}", assignment.display()))
        .input()?;
    let status_line = text.lines().find_map(|s| s.trim().strip_prefix("s ")).map(str::trim);
    if status_line == Some("UNSATISFIABLE") {
        let sol = SolutionF64 {
            status: Status::Infeasible,
            values: None,
            point: None,
            objective: None,
            objective_quantized: None,
            bound: f64::INFINITY,
            trace: Vec::new(),
            bound_trace: Vec::new(),
            nodes: 0,
            build_time: 0.0,
            solve_time: 0.0,
        };
        let mut doc = ResultDocument::new(&l.context(problem.target), &sol, false);
        emit(&mut doc, out)?;
        return Ok(INFEASIBLE);
    }
    let a = parse_assignment(&text, inst.n_vars()).input()?;
    let d = decode_model(&inst, &a).input()?;
    let optimal = status_line == Some("OPTIMUM FOUND");
    let sol = SolutionF64 {
        status: if optimal { Status::Optimal } else { Status::Feasible },
        objective: Some(d.objective),
        objective_quantized: Some(d.weight as i64),
        bound: if optimal { d.objective } else { f64::NEG_INFINITY },
        trace: vec![(0.0, d.objective)],
        bound_trace: Vec::new(),
        values: Some(d.values),
        point: Some(d.point),
        nodes: 0,
        build_time: 0.0,
        solve_time: 0.0,
    };
    let mut doc = ResultDocument::new(&l.context(problem.target), &sol, false);
    emit(&mut doc, out)?;
    Ok(status_code(&sol))
}

fn bench(config: &Path) -> Result<u8, Fail> {
    use cfforest_bench::BenchError;
    let out = cfforest_bench::run_benchmark_file(config).map_err(|e| match e {
        BenchError::Config(_) | BenchError::Missing(_) | BenchError::Incompatible { .. } | BenchError::Core(_) => {
            Fail(INPUT_ERROR, e.into())
        }
        other => Fail(FAILED, other.into()),
    })?;
    println!(
        "{:<10} {:<7} {:>5} {:>5} {:<4} {:<3} {:>4} {:>7} {:>9} {:>10}",
        "dataset", "method", "trees", "depth", "norm", "if", "runs", "solved", "median_s", "plausible"
    );
    for s in &out.summary {
        println!(
            "{:<10} {:<7} {:>5} {:>5} {:<4} {:<3} {:>4} {:>7.2} {:>9} {:>10}",
            s.dataset,
            s.method,
            s.n_estimators,
            s.max_depth,
            s.norm,
            if s.plausibility { "on" } else { "off" },
            s.runs,
            s.solved_fraction,
            s.median_total_s.map_or("-".into(), |m| format!("{m:.3}")),
            s.plausible_rate.map_or("-".into(), |p| format!("{p:.2}")),
        );
    }
    println!("records: {}", out.output_dir.join("records.csv").display());
    Ok(OK)
}

fn validate(model: &Path, result: &Path, plausibility: Option<&str>) -> Result<u8, Fail> {
    let ens = load_model(model).input()?;
    let text = std::fs::read_to_string(result)
        .with_context(|| format!("reading {}", result.display()))
        .input()?;
    let doc: ResultDocument = serde_json::from_str(&text).context("parsing result document").input()?;
    let Some(point) = doc.dense_point(&ens) else {
        println!("no counterfactual in document (status {})", doc.status);
        return Ok(if doc.status == Status::Infeasible { OK } else { FAILED });
    };
    let query = doc
        .dense_query(&ens)
        .ok_or_else(|| anyhow!("result query does not name every model feature"))
        .input()?;
    let iso = if doc.plausibility {
        let forests = load_plausibility(&ens, Some(plausibility.unwrap_or("embedded"))).input()?;
        Some(
            forests
                .and_then(|f| f.for_class(doc.target).cloned())
                .ok_or_else(|| anyhow!("no isolation forest for class {}", doc.target))
                .input()?,
        )
    } else {
        None
    };
    let mut problems = Vec::new();
    if let Err(e) = ens.features.check_point(&point) {
        problems.push(e.to_string());
    }
    if !ens.attains(&point, doc.target, doc.epsilon_c) {
        let p = ens.predict(&point);
        problems.push(format!(
            "target {} misses the margin {} (scores {:?})",
            doc.target, doc.epsilon_c, p.scores
        ));
    }
    if let Some(m) = &iso {
        if !m.is_plausible(&point) {
            problems.push(format!("isolation decision {} is negative", m.decision(&point)));
        }
    }
    let norm = parse_norm(&doc.norm).map_err(|e| anyhow!(e)).input()?;
    let extra: Vec<_> = iso.iter().flat_map(|m| m.trees.iter()).collect();
    let space = SearchSpace::new(&ens, &extra, &query, norm, &BTreeMap::new()).input()?;
    let cost = space.cost_of(&space.values_of(&point));
    if let Some(obj) = doc.objective {
        if (cost - obj).abs() > 1e-6 * obj.abs().max(1.0) {
            problems.push(format!("objective {obj} disagrees with recomputed cost {cost}"));
        }
    }
    if problems.is_empty() {
        println!("valid: prediction {} with margin, cost {cost}", doc.target);
        Ok(OK)
    } else {
        for p in &problems {
            println!("invalid: {p}");
        }
        Ok(FAILED)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INPUT_ERROR } else { OK });
        }
    };
    let result = match &cli.command {
        Cmd::Explain {
            problem,
            time_limit,
            seed,
            threads,
            out,
        } => explain(problem, *time_limit, *seed, *threads, out),
        Cmd::Oracle { problem, cap, out } => oracle(problem, *cap, out),
        Cmd::EncodeWcnf { problem, output } => encode(problem, output.as_deref()),
        Cmd::DecodeWcnf {
            problem,
            assignment,
            out,
        } => decode(problem, assignment, out),
        Cmd::Bench { config } => bench(config),
        Cmd::Validate {
            model,
            result,
            plausibility,
        } => validate(model, result, plausibility.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
