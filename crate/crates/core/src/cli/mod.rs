//! Command-line front end.
//!
//! Exit codes: 0 when an audit accepts `H0` (and for every other successful
//! command), 3 when it decides `H1`, 64 for usage and configuration errors,
//! 65 for bad input data, 66 for I/O failures and 70 for internal errors.

pub mod config;
pub mod ingest;
pub mod report;


use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversarial::{build_hard_pair, build_mixture_family};
use crate::bounds::{BoundParams, BoundReport};
use crate::cvar_test::{draw_synthetic, run_test_dataset, Decision, TestConfig, TestOutcome};
use crate::domain::{records_to_samples, FairnessInstance, GroupWeights, MetricKind};
use crate::error::Error;
use crate::sampling::{PlanParams, PlanSpec, StrategyRegistry};
use crate::simulator::{self, threshold_sweep, write_csv, AlphaSpec, RunManifest};

use config::{experiment_from_kv, AuditConfig, KvFile, WeightSource};

pub const EXIT_H0: u8 = 0;
pub const EXIT_H1: u8 = 3;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;
pub const EXIT_IO: u8 = 66;
pub const EXIT_INTERNAL: u8 = 70;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Io { .. } => EXIT_IO,
            CliError::Internal(_) => EXIT_INTERNAL,
            CliError::Lib(e) => match e {
                Error::InvalidSample(_)
                | Error::InvalidInstance(_)
                | Error::EmptyAfterConditioning
                | Error::MissingGroup(_)
                | Error::PlanMismatch(_) => EXIT_DATA,
                _ => EXIT_USAGE,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fairaudit", version, about = "Audit a classifier for multi-group fairness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the ε-test on a CSV of records.
    Audit(AuditArgs),
    /// Estimate error probabilities over a parameter sweep.
    Simulate(SimulateArgs),
    /// Print sample-size formulas and error bounds.
    Bounds(BoundsArgs),
    /// Write a synthetic dataset with a matching audit config.
    Synth(SynthArgs),
}

/// Test parameters shared by several verbs; they override config values.
#[derive(Debug, Clone, Default, Args)]
pub struct TestFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// eo (equal opportunity) or sp (statistical parity)
    #[arg(long)]
    pub metric: Option<MetricKind>,
    /// Sampling plan: weighted or attr
    #[arg(long)]
    pub plan: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Records with group, label and prediction columns.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TestFlags,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for sweep.csv and manifest.json; the table goes to
    /// stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[command(flatten)]
    pub flags: TestFlags,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Number of groups with uniform weights.
    #[arg(long, conflicts_with = "weights")]
    pub k: Option<usize>,
    /// `group,weight` CSV.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Defaults to 1 − 1/K.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Budgets at which to evaluate the error bounds.
    #[arg(long, value_delimiter = ',')]
    pub at: Vec<u64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthSource {
    HardPair,
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "hard-pair")]
    pub source: SynthSource,
    #[arg(long, value_enum, default_value = "h1")]
    pub hypothesis: Hypothesis,
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed choosing the mixture member.
    #[arg(long, default_value_t = 0)]
    pub member_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: TestFlags,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = simulator::init_thread_pool_from_env() {
        eprintln!("fairaudit: {e}");
        return EXIT_USAGE;
    }
    let stdout = std::io::stdout();
    match dispatch(cli.command, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fairaudit: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<u8, CliError> {
    match cmd {
        Command::Audit(a) => cmd_audit(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out).map(|_| 0),
        Command::Bounds(a) => cmd_bounds(&a, out).map(|_| 0),
        Command::Synth(a) => cmd_synth(&a, out).map(|_| 0),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn stdout_err(source: std::io::Error) -> CliError {
    CliError::Io { path: PathBuf::from("<stdout>"), source }
}

/// One group's line in an audit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLine {
    pub name: String,
    pub weight: f64,
    pub count: u64,
    pub losses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub metric: MetricKind,
    pub alpha: f64,
    pub epsilon: f64,
    pub plan: PlanSpec,
    pub outcome: TestOutcome,
    pub groups: Vec<GroupLine>,
    /// Names of groups with fewer than two samples.
    pub sparse_groups: Vec<String>,
}

/// Loads data and config and runs the test, without printing.
pub fn audit(args: &AuditArgs) -> Result<AuditReport, CliError> {
    let mut cfg = match &args.config {
        Some(p) => AuditConfig::from_kv(&KvFile::load(p)?)?,
        None => AuditConfig::default(),
    };
    let f = &args.flags;
    cfg.alpha = f.alpha.or(cfg.alpha);
    cfg.epsilon = f.epsilon.or(cfg.epsilon);
    cfg.metric = f.metric.unwrap_or(cfg.metric);
    cfg.plan = f.plan.clone().unwrap_or(cfg.plan);
    cfg.eta = f.eta.or(cfg.eta);
    cfg.gamma = f.gamma.or(cfg.gamma);
    cfg.budget = f.budget.or(cfg.budget);
    let alpha = cfg.alpha.ok_or_else(|| CliError::Usage("alpha is required (config key or --alpha)".into()))?;
    let epsilon = cfg.epsilon.ok_or_else(|| CliError::Usage("epsilon is required (config key or --epsilon)".into()))?;

    let rows = ingest::read_rows(&args.input, &cfg.columns)?;
    let (index, fixed) = match &cfg.weights {
        WeightSource::File(p) => {
            let (i, w) = ingest::read_weights(p)?;
            (i, Some(w))
        }
        WeightSource::List(pairs) => {
            let (i, w) = ingest::weights_from_pairs(pairs.clone()).map_err(|e| CliError::Config(format!("weights: {e}")))?;
            (i, Some(w))
        }
        WeightSource::Uniform | WeightSource::Empirical => (ingest::index_from_rows(&rows), None),
    };
    let records = ingest::to_records(&rows, &index, &args.input)?;
    let samples = records_to_samples(&records, cfg.metric)?;
    let weights = match (fixed, &cfg.weights) {
        (Some(w), _) => w,
        (None, WeightSource::Uniform) => GroupWeights::uniform(index.len())?,
        _ => {
            let mut m = vec![0.0; index.len()];
            for s in &samples {
                m[s.group] += 1.0;
            }
            GroupWeights::from_masses(&m)?
        }
    };

    let params = PlanParams { budget: cfg.budget.unwrap_or(samples.len() as u64), eta: cfg.eta, gamma: cfg.gamma };
    let plan = StrategyRegistry::with_builtins().build(&cfg.plan, &weights, &params)?;
    let spec = plan.spec();
    let tc = TestConfig::new(alpha, epsilon, plan, cfg.metric)?;
    let outcome = run_test_dataset(&samples, &weights, &tc)?;

    let mut losses = vec![0u64; index.len()];
    for s in samples.iter().filter(|s| s.loss) {
        losses[s.group] += 1;
    }
    let groups: Vec<GroupLine> = index
        .names()
        .iter()
        .enumerate()
        .map(|(g, name)| GroupLine { name: name.clone(), weight: weights.get(g), count: outcome.counts.0[g], losses: losses[g] })
        .collect();
    let sparse_groups = groups.iter().filter(|l| l.count < 2).map(|l| l.name.clone()).collect();
    Ok(AuditReport { metric: cfg.metric, alpha, epsilon, plan: spec, outcome, groups, sparse_groups })
}

fn cmd_audit(args: &AuditArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let rep = audit(args)?;
    for g in &rep.sparse_groups {
        eprintln!("warning: group `{g}` has fewer than 2 samples");
    }
    report::write_audit(&rep, out).map_err(stdout_err)?;
    if let Some(p) = &args.out {
        let json = serde_json::to_string_pretty(&rep).map_err(|e| CliError::Internal(e.to_string()))?;
        write_file(p, json.as_bytes())?;
    }
    Ok(match rep.outcome.decision {
        Decision::H0 => EXIT_H0,
        Decision::H1 => EXIT_H1,
    })
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut exp = experiment_from_kv(&KvFile::load(&args.config)?)?;
    let f = &args.flags;
    if f.metric.is_some() {
        return Err(CliError::Usage("--metric has no effect on simulations".into()));
    }
    if let Some(s) = args.seed {
        exp.base_seed = s;
    }
    if let Some(t) = args.trials {
        exp.trials = t;
    }
    if let Some(a) = f.alpha {
        exp.point.alpha = AlphaSpec::Value(a);
    }
    if let Some(e) = f.epsilon {
        exp.point.epsilon = e;
    }
    if let Some(p) = &f.plan {
        exp.point.plan = p.clone();
    }
    exp.point.eta = f.eta.or(exp.point.eta);
    exp.point.gamma = f.gamma.or(exp.point.gamma);
    if let Some(b) = f.budget {
        exp.point.n = b;
    }
    let table = threshold_sweep(&exp)?;
    let mut csv = Vec::new();
    write_csv(&table, &mut csv)?;
    match &args.out {
        None => out.write_all(&csv).map_err(stdout_err)?,
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            let canonical = serde_json::to_string(&exp).map_err(|e| CliError::Internal(e.to_string()))?;
            let manifest = RunManifest::new(&exp, &table, &canonical);
            let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Internal(e.to_string()))?;
            write_file(&dir.join("sweep.csv"), &csv)?;
            write_file(&dir.join("manifest.json"), json.as_bytes())?;
            writeln!(out, "wrote {} rows to {}", table.rows.len(), dir.join("sweep.csv").display()).map_err(stdout_err)?;
        }
    }
    Ok(())
}

/// The report printed by `bounds`.
pub fn bounds_report(args: &BoundsArgs) -> Result<BoundReport, CliError> {
    let weights = match (&args.weights, args.k) {
        (Some(p), _) => ingest::read_weights(p)?.1,
        (None, Some(k)) => GroupWeights::uniform(k)?,
        (None, None) => return Err(CliError::Usage("either --k or --weights is required".into())),
    };
    let alpha = args.alpha.unwrap_or(1.0 - 1.0 / weights.len() as f64);
    let p = BoundParams::new(weights, alpha, args.epsilon, args.delta)?;
    Ok(BoundReport::new(&p)?.at(&p, &args.at)?)
}

fn cmd_bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rep = bounds_report(args)?;
    if args.json {
        let json = serde_json::to_string_pretty(&rep).map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(out, "{json}").map_err(stdout_err)
    } else {
        report::write_bounds(&rep, out).map_err(stdout_err)
    }
}

/// What `synth` produced, also written to `expected.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub seed: u64,
    pub hypothesis: String,
    pub mu: Vec<f64>,
    pub outcome: TestOutcome,
}

fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let f = &args.flags;
    let epsilon = f.epsilon.unwrap_or(0.3);
    let alpha = f.alpha.unwrap_or(1.0 - 1.0 / args.k as f64);
    let metric = f.metric.unwrap_or(MetricKind::StatisticalParity);
    let (h0, h1): (FairnessInstance, FairnessInstance) = match args.source {
        SynthSource::HardPair => {
            let hp = build_hard_pair(args.k, epsilon)?;
            (hp.p0, hp.p1)
        }
        SynthSource::Mixture => {
            let fam = build_mixture_family(&GroupWeights::uniform(args.k)?, alpha, epsilon)?;
            let (_, m) = fam.random_member(&mut ChaCha8Rng::seed_from_u64(args.member_seed))?;
            (fam.p0, m)
        }
    };
    let inst = match args.hypothesis {
        Hypothesis::H0 => h0,
        Hypothesis::H1 => h1,
    };
    let w = inst.weights().clone();
    let params = PlanParams { budget: f.budget.unwrap_or(1000), eta: f.eta, gamma: f.gamma };
    let plan_name = f.plan.as_deref().unwrap_or("weighted");
    let plan = StrategyRegistry::with_builtins().build(plan_name, &w, &params)?;
    let spec = plan.spec();
    let tc = TestConfig::new(alpha, epsilon, plan.clone(), metric)?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let data = draw_synthetic(&inst, &plan, &mut rng);
    let mut aux = ChaCha8Rng::seed_from_u64(args.seed);
    aux.set_stream(1);

    // (group, label, prediction); the prediction carries the loss bit.
    let mut rows: Vec<(usize, bool, bool)> = Vec::new();
    for (g, t) in data.tallies().iter().enumerate() {
        for i in 0..t.count {
            let loss = i < t.successes;
            match metric {
                MetricKind::StatisticalParity => rows.push((g, aux.random(), loss)),
                MetricKind::EqualOpportunity => {
                    rows.push((g, false, loss));
                    // Rows with label 1 are dropped by the metric.
                    if aux.random::<bool>() {
                        rows.push((g, true, aux.random()));
                    }
                }
            }
        }
    }
    rows.shuffle(&mut aux);

    std::fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let mut csv = String::from("group,label,prediction\n");
    for (g, y, p) in &rows {
        csv.push_str(&format!("g{g},{},{}\n", u8::from(*y), u8::from(*p)));
    }
    write_file(&args.out.join("data.csv"), csv.as_bytes())?;
    let mut wcsv = String::from("group,weight\n");
    for (g, x) in w.iter().enumerate() {
        wcsv.push_str(&format!("g{g},{x}\n"));
    }
    write_file(&args.out.join("weights.csv"), wcsv.as_bytes())?;
    write_file(&args.out.join("audit.cfg"), report::audit_config_text(metric, alpha, epsilon, &spec).as_bytes())?;

    let samples: Vec<_> = rows
        .iter()
        .filter(|r| metric == MetricKind::StatisticalParity || !r.1)
        .map(|&(g, _, p)| crate::domain::AuditSample { group: g, loss: p })
        .collect();
    let outcome = run_test_dataset(&samples, &w, &tc)?;
    let summary = SynthSummary {
        seed: args.seed,
        hypothesis: format!("{:?}", args.hypothesis).to_lowercase(),
        mu: inst.mu().to_vec(),
        outcome,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&args.out.join("expected.json"), json.as_bytes())?;
    writeln!(out, "wrote {} rows to {}", rows.len(), args.out.join("data.csv").display()).map_err(stdout_err)?;
    Ok(())
}
