//! Command-line front end: dataset generation, training sweeps, evaluation,
//! complexity audits, and SVG plots. Also hosts the experiment harness that
//! the subcommands (and integration tests) share.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::data::{
    gen_dataset, load_dataset, save_dataset, split_indices, trainer_seed, DataError, Dataset,
    DatasetParams,
};
use crate::gjtrace::{
    audit_pinv_decell, audit_pinv_greedy, mixed_dependence_suite, rank_covering_suite, AuditError,
};
use crate::linalg::{rank_k_tail_sq, DenseMatrix};
use crate::scw::scw_loss_fast;
use crate::sketch::{project_top_s, SparseSketch};
use crate::train::{
    surrogate_loss_factored, train_prepared, InstanceFactors, TraceRecord, TrainConfig, TrainError,
    TrainMode, TrainTrace,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::BadSplit { .. } => CliError::Config(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::EmptyDataset | TrainError::ZeroIterations => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

/// Experiment sweep shape: one trained sketch per (mode, s, trial) cell, with
/// dense mode appearing once per trial regardless of s.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub m: usize,
    pub k: usize,
    pub eta: f64,
    pub iterations: usize,
    pub s_list: Vec<usize>,
    pub modes: Vec<TrainMode>,
}

impl SweepParams {
    pub fn experiment_defaults() -> Self {
        SweepParams {
            m: 10,
            k: 5,
            eta: 0.1,
            iterations: 3000,
            s_list: vec![1, 3, 5],
            modes: vec![TrainMode::Fix, TrainMode::Learn, TrainMode::Dense],
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.iterations == 0 {
            return Err(CliError::Config("iterations must be at least 1".into()));
        }
        if self.k == 0 || self.m == 0 {
            return Err(CliError::Config("m and k must be positive".into()));
        }
        if self.s_list.is_empty() || self.s_list.iter().any(|&s| s == 0 || s > self.m) {
            return Err(CliError::Config(format!(
                "s_list must hold values in 1..={}",
                self.m
            )));
        }
        if self.modes.is_empty() {
            return Err(CliError::Config("modes must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditParams {
    pub m_min: usize,
    pub m_max: usize,
    pub cols: usize,
    pub seed: u64,
}

impl AuditParams {
    fn effective(&self) -> AuditParams {
        AuditParams {
            m_min: if self.m_min == 0 { 1 } else { self.m_min },
            m_max: if self.m_max == 0 { 6 } else { self.m_max },
            cols: if self.cols == 0 { 6 } else { self.cols },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetParams,
    pub sweep: SweepParams,
    #[serde(default)]
    pub audit: AuditParams,
    #[serde(default)]
    pub plot: bool,
}

impl RunConfig {
    pub fn experiment_defaults() -> Self {
        RunConfig {
            dataset: DatasetParams::experiment_defaults(),
            sweep: SweepParams::experiment_defaults(),
            audit: AuditParams::default(),
            plot: true,
        }
    }
}

/// One trained run: dense mode carries s = 0 since its budget is the full
/// column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub mode: TrainMode,
    pub s: usize,
    pub trial: usize,
}

impl RunSpec {
    pub fn name(&self) -> String {
        format!("{}_s{}_trial{}", self.mode.name(), self.s, self.trial)
    }
}

pub fn plan_runs(sweep: &SweepParams, trials: usize) -> Vec<RunSpec> {
    let mut runs = Vec::new();
    for trial in 0..trials {
        for &mode in &sweep.modes {
            match mode {
                TrainMode::Dense => runs.push(RunSpec { mode, s: 0, trial }),
                _ => {
                    for &s in &sweep.s_list {
                        runs.push(RunSpec { mode, s, trial });
                    }
                }
            }
        }
    }
    runs
}

fn train_config_for(sweep: &SweepParams, master_seed: u64, spec: &RunSpec) -> TrainConfig {
    TrainConfig {
        mode: spec.mode,
        s: if spec.mode == TrainMode::Dense {
            sweep.m
        } else {
            spec.s
        },
        eta: sweep.eta,
        iterations: sweep.iterations,
        seed: trainer_seed(master_seed, spec.trial, spec.mode.name(), spec.s),
        k: sweep.k,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub s: usize,
    pub trial: usize,
    /// Mean surrogate loss over the training split; absent for the SVD
    /// baseline, where the surrogate is undefined.
    pub train_surrogate: Option<f64>,
    pub train_scw: f64,
    pub test_scw: f64,
}

pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("method,s,trial,train_surrogate,train_scw,test_scw\n");
    for r in rows {
        let surrogate = r
            .train_surrogate
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method, r.s, r.trial, surrogate, r.train_scw, r.test_scw
        )
        .unwrap();
    }
    out
}

pub fn report_from_csv(text: &str) -> Result<Vec<ReportRow>, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("empty report CSV".into()))?;
    if header != "method,s,trial,train_surrogate,train_scw,test_scw" {
        return Err(CliError::Config(format!("bad report header: {header}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(CliError::Config(format!("report row {}: {line}", i + 2)));
        }
        let field = |j: usize| -> Result<f64, CliError> {
            parts[j]
                .parse()
                .map_err(|_| CliError::Config(format!("report row {}: {line}", i + 2)))
        };
        rows.push(ReportRow {
            method: parts[0].to_string(),
            s: parts[1]
                .parse()
                .map_err(|_| CliError::Config(format!("report row {}: {line}", i + 2)))?,
            trial: parts[2]
                .parse()
                .map_err(|_| CliError::Config(format!("report row {}: {line}", i + 2)))?,
            train_surrogate: if parts[3].is_empty() {
                None
            } else {
                Some(field(3)?)
            },
            train_scw: field(4)?,
            test_scw: field(5)?,
        });
    }
    Ok(rows)
}

pub fn trace_to_csv(trace: &TrainTrace) -> String {
    let mut out = String::from("iteration,surrogate_loss,scw_loss_sampled,scw_loss_train_mean\n");
    for r in &trace.records {
        let mean = r
            .scw_loss_train_mean
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{}",
            r.iteration, r.surrogate_loss, r.scw_loss_sampled, mean
        )
        .unwrap();
    }
    out
}

pub fn trace_from_csv(text: &str) -> Result<Vec<TraceRecord>, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("empty trace CSV".into()))?;
    if header != "iteration,surrogate_loss,scw_loss_sampled,scw_loss_train_mean" {
        return Err(CliError::Config(format!("bad trace header: {header}")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(CliError::Config(format!("trace row {}: {line}", i + 2)));
        }
        let bad = || CliError::Config(format!("trace row {}: {line}", i + 2));
        records.push(TraceRecord {
            iteration: parts[0].parse().map_err(|_| bad())?,
            surrogate_loss: parts[1].parse().map_err(|_| bad())?,
            scw_loss_sampled: parts[2].parse().map_err(|_| bad())?,
            scw_loss_train_mean: if parts[3].is_empty() {
                None
            } else {
                Some(parts[3].parse().map_err(|_| bad())?)
            },
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRow {
    pub m: usize,
    pub algorithm: String,
    pub predicate_count: usize,
    pub max_degree: u32,
    pub branch_events: u64,
}

pub fn audit_to_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from("m,algorithm,predicate_count,max_degree,branch_events\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.m, r.algorithm, r.predicate_count, r.max_degree, r.branch_events
        )
        .unwrap();
    }
    out
}

/// Evaluates a trained sketch: mean surrogate and SCW loss over the training
/// split, mean SCW loss over the test split.
pub fn evaluate_sketch(
    sketch: &DenseMatrix,
    dataset: &Dataset,
    factors: &[InstanceFactors],
    train_idx: &[usize],
    test_idx: &[usize],
    k: usize,
) -> Result<(f64, f64, f64), CliError> {
    let mut surrogate = 0.0;
    let mut train_scw = 0.0;
    for &i in train_idx {
        surrogate += surrogate_loss_factored(sketch, &factors[i], k)?;
        train_scw += scw_loss_fast(sketch, &dataset.instances[i], k)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
    }
    let mut test_scw = 0.0;
    for &i in test_idx {
        test_scw += scw_loss_fast(sketch, &dataset.instances[i], k)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
    }
    Ok((
        surrogate / train_idx.len() as f64,
        train_scw / train_idx.len() as f64,
        test_scw / test_idx.len() as f64,
    ))
}

fn svd_baseline_row(
    dataset: &Dataset,
    tails: &[f64],
    train_idx: &[usize],
    test_idx: &[usize],
    trial: usize,
) -> ReportRow {
    let _ = dataset;
    let mean = |idx: &[usize]| idx.iter().map(|&i| tails[i]).sum::<f64>() / idx.len() as f64;
    ReportRow {
        method: "svd".into(),
        s: 0,
        trial,
        train_surrogate: None,
        train_scw: mean(train_idx),
        test_scw: mean(test_idx),
    }
}

fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.s.cmp(&b.s))
            .then(a.trial.cmp(&b.trial))
    });
}

/// Runs the whole sweep in memory: generate, split, train, evaluate. Used by
/// the integration tests; the subcommands stage the same steps through files.
pub fn run_study(config: &RunConfig, jobs: usize) -> Result<Vec<ReportRow>, CliError> {
    config.sweep.validate()?;
    let dataset = gen_dataset(&config.dataset);
    let factors: Vec<InstanceFactors> = dataset
        .instances
        .iter()
        .map(|a| InstanceFactors::compute(a).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let tails: Vec<f64> = dataset
        .instances
        .iter()
        .map(|a| rank_k_tail_sq(a, config.sweep.k).map_err(|e| CliError::Numeric(e.to_string())))
        .collect::<Result<_, _>>()?;

    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..config.dataset.trials)
        .map(|t| split_indices(&config.dataset, t).map_err(CliError::from))
        .collect::<Result<_, _>>()?;

    let runs = plan_runs(&config.sweep, config.dataset.trials);
    let pool = make_pool(jobs)?;
    let mut rows: Vec<ReportRow> = pool.install(|| {
        runs.par_iter()
            .map(|spec| {
                let (train_idx, test_idx) = &splits[spec.trial];
                let data_refs: Vec<&DenseMatrix> =
                    train_idx.iter().map(|&i| &dataset.instances[i]).collect();
                let factor_refs: Vec<&InstanceFactors> =
                    train_idx.iter().map(|&i| &factors[i]).collect();
                let tc = train_config_for(&config.sweep, config.dataset.master_seed, spec);
                let trace = train_prepared(&data_refs, &factor_refs, config.sweep.m, &tc)?;
                let (surrogate, train_scw, test_scw) = evaluate_sketch(
                    &trace.final_sketch,
                    &dataset,
                    &factors,
                    train_idx,
                    test_idx,
                    config.sweep.k,
                )?;
                Ok(ReportRow {
                    method: spec.mode.name().to_string(),
                    s: spec.s,
                    trial: spec.trial,
                    train_surrogate: Some(surrogate),
                    train_scw,
                    test_scw,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    for trial in 0..config.dataset.trials {
        let (train_idx, test_idx) = &splits[trial];
        rows.push(svd_baseline_row(&dataset, &tails, train_idx, test_idx, trial));
    }
    sort_rows(&mut rows);
    Ok(rows)
}

fn make_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))
}

// ---------------------------------------------------------------------------
// Argument parsing and config loading

#[derive(Parser, Debug)]
#[command(name = "sketchlab", about = "sketching-based low-rank approximation lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate the synthetic dataset files.
    GenData(CommonArgs),
    /// Train every (method, s, trial) cell of the sweep.
    Train(TrainArgs),
    /// Evaluate trained sketches into a report CSV.
    Eval(CommonArgs),
    /// Audit the pseudo-inverse algorithms' branching complexity.
    AuditGj(CommonArgs),
    /// Render SVG figures from the report and traces.
    Plot(CommonArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path overrides, e.g. --set sweep.eta=0.05
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker thread count.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Skip runs already marked complete in the manifest.
    #[arg(long)]
    resume: bool,
}

fn apply_override(value: &mut serde_json::Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override must be KEY=VALUE: {spec}")))?;
    let mut target = &mut *value;
    for key in path.split('.') {
        target = target
            .as_object_mut()
            .and_then(|o| o.get_mut(key))
            .ok_or_else(|| CliError::Config(format!("unknown config key: {path}")))?;
    }
    *target = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    Ok(())
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config: {e}")))?;
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("config: {e}")))
}

// ---------------------------------------------------------------------------
// Subcommands

fn cmd_gen_data(args: &CommonArgs) -> Result<(), CliError> {
    let config = load_config(&args.config, &args.set)?;
    let dataset = gen_dataset(&config.dataset);
    save_dataset(&args.out.join("data"), &dataset)?;
    println!(
        "wrote {} instances to {}",
        dataset.instances.len(),
        args.out.join("data").display()
    );
    Ok(())
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct ManifestEntry {
    run: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    seconds: f64,
}

fn read_manifest(path: &Path) -> Vec<ManifestEntry> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    text.lines()
        .filter_map(|l| serde_json::from_str(l).ok())
        .collect()
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let config = load_config(&args.common.config, &args.common.set)?;
    config.sweep.validate()?;
    let dataset = load_dataset(&args.common.out.join("data"))?;
    let factors: Vec<InstanceFactors> = dataset
        .instances
        .iter()
        .map(|a| InstanceFactors::compute(a).map_err(CliError::from))
        .collect::<Result<_, _>>()?;

    let runs_dir = args.common.out.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let manifest_path = runs_dir.join("manifest.jsonl");
    let done: HashSet<String> = if args.resume {
        read_manifest(&manifest_path)
            .into_iter()
            .filter(|e| e.status == "ok")
            .filter(|e| {
                let d = runs_dir.join(&e.run);
                d.join("trace.csv").exists() && d.join("sketch.txt").exists()
            })
            .map(|e| e.run)
            .collect()
    } else {
        HashSet::new()
    };

    let runs: Vec<RunSpec> = plan_runs(&config.sweep, dataset.params.trials)
        .into_iter()
        .filter(|spec| !done.contains(&spec.name()))
        .collect();
    let manifest = Mutex::new(
        fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&manifest_path)?,
    );

    let pool = make_pool(args.common.jobs)?;
    let failures: usize = pool.install(|| {
        runs.par_iter()
            .map(|spec| {
                let start = Instant::now();
                let (train_idx, _) = match split_indices(&dataset.params, spec.trial) {
                    Ok(v) => v,
                    Err(e) => {
                        record_run(&manifest, spec, Err(e.to_string()), start);
                        return 1usize;
                    }
                };
                let data_refs: Vec<&DenseMatrix> =
                    train_idx.iter().map(|&i| &dataset.instances[i]).collect();
                let factor_refs: Vec<&InstanceFactors> =
                    train_idx.iter().map(|&i| &factors[i]).collect();
                let tc = train_config_for(&config.sweep, dataset.params.master_seed, spec);
                match train_prepared(&data_refs, &factor_refs, config.sweep.m, &tc) {
                    Ok(trace) => {
                        let dir = runs_dir.join(spec.name());
                        let write = || -> Result<(), CliError> {
                            fs::create_dir_all(&dir)?;
                            fs::write(dir.join("trace.csv"), trace_to_csv(&trace))?;
                            let sparse =
                                project_top_s(&trace.final_sketch, config.sweep.m)
                                    .map_err(|e| CliError::Numeric(e.to_string()))?;
                            fs::write(dir.join("sketch.txt"), sparse.to_text())?;
                            Ok(())
                        };
                        match write() {
                            Ok(()) => {
                                record_run(&manifest, spec, Ok(()), start);
                                0
                            }
                            Err(e) => {
                                record_run(&manifest, spec, Err(e.message().into()), start);
                                1
                            }
                        }
                    }
                    Err(e) => {
                        record_run(&manifest, spec, Err(e.to_string()), start);
                        1
                    }
                }
            })
            .sum()
    });
    println!(
        "trained {} runs ({} skipped, {} failed)",
        runs.len(),
        done.len(),
        failures
    );
    if failures > 0 {
        return Err(CliError::Numeric(format!("{failures} runs failed")));
    }
    Ok(())
}

fn record_run(
    manifest: &Mutex<fs::File>,
    spec: &RunSpec,
    outcome: Result<(), String>,
    start: Instant,
) {
    use std::io::Write;
    let entry = ManifestEntry {
        run: spec.name(),
        status: if outcome.is_ok() { "ok" } else { "failed" }.into(),
        error: outcome.err(),
        seconds: start.elapsed().as_secs_f64(),
    };
    let mut f = manifest.lock().unwrap();
    let _ = writeln!(f, "{}", serde_json::to_string(&entry).unwrap());
}

fn cmd_eval(args: &CommonArgs) -> Result<(), CliError> {
    let config = load_config(&args.config, &args.set)?;
    config.sweep.validate()?;
    let dataset = load_dataset(&args.out.join("data"))?;
    let factors: Vec<InstanceFactors> = dataset
        .instances
        .iter()
        .map(|a| InstanceFactors::compute(a).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let tails: Vec<f64> = dataset
        .instances
        .iter()
        .map(|a| rank_k_tail_sq(a, config.sweep.k).map_err(|e| CliError::Numeric(e.to_string())))
        .collect::<Result<_, _>>()?;

    let runs_dir = args.out.join("runs");
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for spec in plan_runs(&config.sweep, dataset.params.trials) {
        let sketch_path = runs_dir.join(spec.name()).join("sketch.txt");
        let Ok(text) = fs::read_to_string(&sketch_path) else {
            missing.push(spec.name());
            continue;
        };
        let sketch = SparseSketch::from_text(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", sketch_path.display())))?
            .densify();
        let (train_idx, test_idx) = split_indices(&dataset.params, spec.trial)?;
        let (surrogate, train_scw, test_scw) = evaluate_sketch(
            &sketch,
            &dataset,
            &factors,
            &train_idx,
            &test_idx,
            config.sweep.k,
        )?;
        rows.push(ReportRow {
            method: spec.mode.name().to_string(),
            s: spec.s,
            trial: spec.trial,
            train_surrogate: Some(surrogate),
            train_scw,
            test_scw,
        });
    }
    for trial in 0..dataset.params.trials {
        let (train_idx, test_idx) = split_indices(&dataset.params, trial)?;
        rows.push(svd_baseline_row(&dataset, &tails, &train_idx, &test_idx, trial));
    }
    sort_rows(&mut rows);
    fs::write(args.out.join("report.csv"), report_to_csv(&rows))?;
    fs::write(
        args.out.join("report_agg.csv"),
        aggregate_csv(&rows),
    )?;
    if !missing.is_empty() {
        eprintln!("warning: missing runs: {}", missing.join(", "));
    }
    println!(
        "wrote {} report rows to {}",
        rows.len(),
        args.out.join("report.csv").display()
    );
    Ok(())
}

/// Mean and standard deviation per (method, s) family, recomputable from the
/// per-trial rows.
pub fn aggregate_csv(rows: &[ReportRow]) -> String {
    let mut families: Vec<(String, usize)> = rows
        .iter()
        .map(|r| (r.method.clone(), r.s))
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    families.sort();
    let mut out =
        String::from("method,s,mean_train_scw,std_train_scw,mean_test_scw,std_test_scw\n");
    for (method, s) in families {
        let group: Vec<&ReportRow> = rows
            .iter()
            .filter(|r| r.method == method && r.s == s)
            .collect();
        let (m_train, s_train) = mean_std(group.iter().map(|r| r.train_scw));
        let (m_test, s_test) = mean_std(group.iter().map(|r| r.test_scw));
        writeln!(out, "{method},{s},{m_train},{s_train},{m_test},{s_test}").unwrap();
    }
    out
}

pub fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
    (mean, var.sqrt())
}

pub fn run_audits(params: &AuditParams) -> Result<Vec<AuditRow>, CliError> {
    let p = params.effective();
    let mut rows = Vec::new();
    for m in p.m_min..=p.m_max {
        let cols = p.cols.max(m);
        let decell = audit_pinv_decell(&rank_covering_suite(m, cols, p.seed))?;
        rows.push(AuditRow {
            m,
            algorithm: "decell".into(),
            predicate_count: decell.predicate_count,
            max_degree: decell.max_degree,
            branch_events: decell.branch_events,
        });
        let greedy = audit_pinv_greedy(&mixed_dependence_suite(m, cols, p.seed))?;
        rows.push(AuditRow {
            m,
            algorithm: "greedy".into(),
            predicate_count: greedy.predicate_count,
            max_degree: greedy.max_degree,
            branch_events: greedy.branch_events,
        });
    }
    Ok(rows)
}

fn cmd_audit_gj(args: &CommonArgs) -> Result<(), CliError> {
    let config = load_config(&args.config, &args.set)?;
    let rows = run_audits(&config.audit)?;
    let csv = audit_to_csv(&rows);
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("audit.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

// ---------------------------------------------------------------------------
// Plots

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const CURVE_POINTS: usize = 300;
const METHOD_COLORS: &[(&str, &str)] = &[
    ("fix", "#d62728"),
    ("learn", "#1f77b4"),
    ("dense", "#2ca02c"),
    ("svd", "#7f7f7f"),
];

fn color_for(method: &str) -> &'static str {
    METHOD_COLORS
        .iter()
        .find(|(m, _)| *m == method)
        .map(|(_, c)| *c)
        .unwrap_or("#000000")
}

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi <= lo {
        return (out_lo + out_hi) / 2.0;
    }
    out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
}

struct Curve {
    label: String,
    color: &'static str,
    /// (x, mean, std) triples.
    points: Vec<(f64, f64, f64)>,
}

fn downsample(points: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    if points.len() <= CURVE_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(CURVE_POINTS);
    points.iter().step_by(stride).copied().collect()
}

fn svg_panel(title: &str, x_label: &str, y_label: &str, curves: &[Curve]) -> String {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in curves {
        for &(x, m, s) in &c.points {
            xs.push(x);
            ys.push(m - s);
            ys.push(m + s);
        }
    }
    let (x_lo, x_hi) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y_lo, y_hi) = (
        ys.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let px = |x: f64| scale(x, x_lo, x_hi, MARGIN, PLOT_W - 20.0);
    let py = |y: f64| scale(y, y_lo, y_hi, PLOT_H - MARGIN, 20.0);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n"
    );
    writeln!(svg, "<!-- data table").unwrap();
    for c in curves {
        writeln!(svg, "{}: x,mean,std", c.label).unwrap();
        for &(x, m, s) in &c.points {
            writeln!(svg, "{x},{m},{s}").unwrap();
        }
    }
    writeln!(svg, "-->").unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"14\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        PLOT_W / 2.0
    )
    .unwrap();
    // axes
    writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"20\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\
         <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        b = PLOT_H - MARGIN,
        r = PLOT_W - 20.0
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{x_label}</text>",
        PLOT_W / 2.0,
        PLOT_H - 16.0
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 16 {})\" \
         text-anchor=\"middle\">{y_label}</text>",
        PLOT_H / 2.0,
        PLOT_H / 2.0
    )
    .unwrap();
    for (v, label) in [(y_lo, format!("{y_lo:.3}")), (y_hi, format!("{y_hi:.3}"))] {
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{label}</text>",
            MARGIN - 4.0,
            py(v) + 4.0
        )
        .unwrap();
    }
    for (v, label) in [(x_lo, format!("{x_lo:.0}")), (x_hi, format!("{x_hi:.0}"))] {
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{label}</text>",
            px(v),
            PLOT_H - MARGIN + 14.0
        )
        .unwrap();
    }

    for (i, c) in curves.iter().enumerate() {
        // std band
        let mut band = String::new();
        for &(x, m, s) in &c.points {
            write!(band, "{},{} ", px(x), py(m + s)).unwrap();
        }
        for &(x, m, s) in c.points.iter().rev() {
            write!(band, "{},{} ", px(x), py(m - s)).unwrap();
        }
        writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            band.trim_end(),
            c.color
        )
        .unwrap();
        let line: Vec<String> = c
            .points
            .iter()
            .map(|&(x, m, _)| format!("{},{}", px(x), py(m)))
            .collect();
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            line.join(" "),
            c.color
        )
        .unwrap();
        let ly = 30.0 + 16.0 * i as f64;
        writeln!(
            svg,
            "<rect x=\"{x}\" y=\"{y}\" width=\"12\" height=\"4\" fill=\"{c}\"/>\
             <text x=\"{tx}\" y=\"{ty}\" font-size=\"11\">{l}</text>",
            x = PLOT_W - 150.0,
            y = ly,
            c = c.color,
            tx = PLOT_W - 132.0,
            ty = ly + 6.0,
            l = c.label
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn svg_bar_chart(title: &str, bars: &[(String, &'static str, f64, f64)]) -> String {
    let y_hi = bars
        .iter()
        .map(|&(_, _, m, s)| m + s)
        .fold(f64::NEG_INFINITY, f64::max);
    let py = |y: f64| scale(y, 0.0, y_hi, PLOT_H - MARGIN, 20.0);
    let slot = (PLOT_W - MARGIN - 20.0) / bars.len() as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         viewBox=\"0 0 {PLOT_W} {PLOT_H}\">\n"
    );
    writeln!(svg, "<!-- data table\nlabel,mean,std").unwrap();
    for (label, _, m, s) in bars {
        writeln!(svg, "{label},{m},{s}").unwrap();
    }
    writeln!(svg, "-->").unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"14\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        PLOT_W / 2.0
    )
    .unwrap();
    writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"20\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\
         <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
        m = MARGIN,
        b = PLOT_H - MARGIN,
        r = PLOT_W - 20.0
    )
    .unwrap();
    for (v, label) in [(0.0, "0".to_string()), (y_hi, format!("{y_hi:.3}"))] {
        writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{label}</text>",
            MARGIN - 4.0,
            py(v) + 4.0
        )
        .unwrap();
    }
    for (i, (label, color, mean, std)) in bars.iter().enumerate() {
        let x = MARGIN + slot * i as f64 + slot * 0.15;
        let w = slot * 0.7;
        let top = py(*mean);
        writeln!(
            svg,
            "<rect x=\"{x}\" y=\"{top}\" width=\"{w}\" height=\"{h}\" fill=\"{color}\"/>",
            h = (PLOT_H - MARGIN) - top
        )
        .unwrap();
        let cx = x + w / 2.0;
        writeln!(
            svg,
            "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"black\"/>",
            py(mean + std),
            py((mean - std).max(0.0))
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\" font-size=\"9\" \
             transform=\"rotate(-45 {cx} {y})\">{label}</text>",
            PLOT_H - MARGIN + 24.0,
            y = PLOT_H - MARGIN + 24.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Mean/std curve over trials from per-run traces; `pick` selects the plotted
/// quantity per record.
fn trial_curves(
    runs_dir: &Path,
    mode: TrainMode,
    s: usize,
    trials: usize,
    pick: impl Fn(&TraceRecord) -> Option<(usize, f64)>,
) -> Result<Option<Vec<(f64, f64, f64)>>, CliError> {
    let mut per_trial: Vec<Vec<(usize, f64)>> = Vec::new();
    for trial in 0..trials {
        let spec = RunSpec { mode, s, trial };
        let path = runs_dir.join(spec.name()).join("trace.csv");
        let Ok(text) = fs::read_to_string(&path) else {
            continue;
        };
        let records = trace_from_csv(&text)?;
        per_trial.push(records.iter().filter_map(&pick).collect());
    }
    if per_trial.is_empty() {
        return Ok(None);
    }
    let len = per_trial.iter().map(|v| v.len()).min().unwrap();
    let mut curve = Vec::with_capacity(len);
    for i in 0..len {
        let (mean, std) = mean_std(per_trial.iter().map(|v| v[i].1));
        curve.push((per_trial[0][i].0 as f64, mean, std));
    }
    Ok(Some(downsample(&curve)))
}

fn cmd_plot(args: &CommonArgs) -> Result<(), CliError> {
    let config = load_config(&args.config, &args.set)?;
    let report_path = args.out.join("report.csv");
    let text = fs::read_to_string(&report_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", report_path.display())))?;
    let rows = report_from_csv(&text)?;
    if rows.is_empty() {
        return Err(CliError::Config("report CSV has no rows".into()));
    }
    let plots_dir = args.out.join("plots");
    fs::create_dir_all(&plots_dir)?;
    let runs_dir = args.out.join("runs");
    let trials = config.dataset.trials;

    for &s in &config.sweep.s_list {
        for (kind, y_label) in [("surrogate", "surrogate loss"), ("scw", "scw loss")] {
            let mut curves = Vec::new();
            for &mode in &config.sweep.modes {
                let run_s = if mode == TrainMode::Dense { 0 } else { s };
                let picked = trial_curves(&runs_dir, mode, run_s, trials, |r| match kind {
                    "surrogate" => Some((r.iteration, r.surrogate_loss)),
                    _ => r.scw_loss_train_mean.map(|v| (r.iteration, v)),
                })?;
                if let Some(points) = picked {
                    curves.push(Curve {
                        label: mode.name().to_string(),
                        color: color_for(mode.name()),
                        points,
                    });
                }
            }
            if curves.is_empty() {
                continue;
            }
            let svg = svg_panel(
                &format!("training {kind} loss, s = {s}"),
                "iteration",
                y_label,
                &curves,
            );
            fs::write(plots_dir.join(format!("train_{kind}_s{s}.svg")), svg)?;
        }
    }

    // Test-loss bars grouped by method then s, baseline last.
    let mut families: Vec<(String, usize)> = rows
        .iter()
        .map(|r| (r.method.clone(), r.s))
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    families.sort_by(|a, b| {
        let rank = |m: &str| match m {
            "fix" => 0,
            "learn" => 1,
            "dense" => 2,
            _ => 3,
        };
        rank(&a.0).cmp(&rank(&b.0)).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0))
    });
    let bars: Vec<(String, &'static str, f64, f64)> = families
        .iter()
        .map(|(method, s)| {
            let (mean, std) = mean_std(
                rows.iter()
                    .filter(|r| &r.method == method && r.s == *s)
                    .map(|r| r.test_scw),
            );
            let label = if *s == 0 {
                method.clone()
            } else {
                format!("{method} s={s}")
            };
            (label, color_for(method), mean, std)
        })
        .collect();
    fs::write(
        plots_dir.join("test_scw.svg"),
        svg_bar_chart("test scw loss", &bars),
    )?;
    println!("wrote plots to {}", plots_dir.display());
    Ok(())
}

pub fn run() -> i32 {
    run_from(std::env::args())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version through this path as well
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.cmd {
        Cmd::GenData(a) => cmd_gen_data(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::AuditGj(a) => cmd_audit_gj(a),
        Cmd::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
