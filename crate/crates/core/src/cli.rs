//! The `ggm` command line: gen, sample, learn, eval, sweep, verify, certify.
//!
//! Exit codes: 0 on success, 1 when `verify` finds a failing inequality,
//! 2 on invalid input, 3 on a numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evalbench::{cv_objective, l1_error, min_samples_sweep, structure_error, ws_distance, HyperGrid, SweepSpec};
use crate::generators::{Family, GeneratorSpec};
use crate::json::to_canonical;
use crate::learners::{learn, Algorithm, Data, LearnerConfig, MergeRule, PrecisionEstimate, SplitMode};
use crate::linalg::SymMatrix;
use crate::model::{kappa_of, max_degree_of, parse_model_json, GgmModel, ModelFile};
use crate::oracles::{certify, verify_structural_lemmas};
use crate::sampler::{read_csv, sample, standardize, write_csv, SampleSet};

const VERIFY_TOL: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "ggm", version, about = "Structure learning for Gaussian graphical models")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "GGM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a model file.
    Gen(GenArgs),
    /// Draw samples from a model into a CSV file.
    Sample(SampleArgs),
    /// Learn the graph from samples or from the exact covariance.
    Learn(LearnArgs),
    /// Score a learned estimate.
    Eval(EvalArgs),
    /// Minimal-sample-size sweep over a model family.
    Sweep(SweepArgs),
    /// Check the structural inequalities exhaustively on a small model.
    Verify(VerifyArgs),
    /// Report the model class and its SDD rescaling.
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyName {
    PathCliques,
    GaussianWalk,
    Gff,
    BreakGreedy,
    PossiblyHard,
    Counterexample,
}

#[derive(Args, Debug, Default)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Clique size or degree parameter.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub start_time: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub n_pad: usize,
    #[arg(long)]
    pub tiles: Option<usize>,
    #[arg(long)]
    pub permute_seed: Option<u64>,
    /// Weighted edge `i,j,w` of a free-field graph (repeatable).
    #[arg(long = "edge")]
    pub edges: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub boundary: Vec<usize>,
    /// Counterexample name.
    #[arg(long)]
    pub name: Option<String>,
    /// Counterexample parameter `key=value` (repeatable).
    #[arg(long = "param")]
    pub params: Vec<String>,
    /// Rescale to unit variances.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Generator spec as JSON, instead of the family flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub m: usize,
    #[arg(long, env = "GGM_SEED")]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Split,
    Single,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MergeArg {
    Intersection,
    Union,
}

#[derive(Args, Debug)]
pub struct LearnArgs {
    /// Model file; supplies kappa and d defaults and the exact covariance
    /// for `--population`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Use the model's exact covariance instead of samples.
    #[arg(long)]
    pub population: bool,
    #[arg(long, env = "GGM_ALGORITHM")]
    pub algorithm: String,
    #[arg(long, env = "GGM_SEED")]
    pub seed: u64,
    #[arg(long, env = "GGM_NU")]
    pub nu: Option<f64>,
    #[arg(long, env = "GGM_T_STEPS")]
    pub t_steps: Option<usize>,
    #[arg(long, env = "GGM_KAPPA")]
    pub kappa: Option<f64>,
    #[arg(long, env = "GGM_D")]
    pub d: Option<usize>,
    #[arg(long, env = "GGM_TAU")]
    pub tau: Option<f64>,
    #[arg(long, env = "GGM_GAMMA")]
    pub gamma: Option<f64>,
    #[arg(long, env = "GGM_GAMMA_PRIME")]
    pub gamma_prime: Option<f64>,
    /// Default: single for hybrid, split otherwise.
    #[arg(long, value_enum, env = "GGM_SPLIT_MODE")]
    pub split_mode: Option<SplitArg>,
    #[arg(long, value_enum, env = "GGM_MERGE")]
    pub merge: Option<MergeArg>,
    #[arg(long, env = "GGM_BUDGET")]
    pub budget: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Output of `learn`.
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Holdout samples for the cross-validation objective.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    /// Threshold constant; defaults to kappa of the truth.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Sweep spec as JSON; flags given alongside override it.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<usize>,
    #[arg(long, env = "GGM_ALGORITHM")]
    pub algorithm: Option<String>,
    #[arg(long, env = "GGM_SEED", required_unless_present = "spec")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub granularity: Option<usize>,
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long = "grid-t", value_delimiter = ',')]
    pub grid_t: Vec<usize>,
    #[arg(long = "grid-nu", value_delimiter = ',')]
    pub grid_nu: Vec<f64>,
    #[arg(long = "grid-gamma-prime", value_delimiter = ',')]
    pub grid_gamma_prime: Vec<f64>,
    #[arg(long = "grid-tau", value_delimiter = ',')]
    pub grid_tau: Vec<f64>,
    #[arg(long = "grid-d")]
    pub grid_d: Option<usize>,
    /// Per-trial CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// A failure tagged with the operation that raised it.
#[derive(Debug)]
pub struct Failure {
    pub op: &'static str,
    pub error: Error,
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        if self.error.is_numerical() {
            3
        } else {
            2
        }
    }
}

trait Context<T> {
    fn during(self, op: &'static str) -> std::result::Result<T, Failure>;
}

impl<T> Context<T> for Result<T> {
    fn during(self, op: &'static str) -> std::result::Result<T, Failure> {
        self.map_err(|error| Failure { op, error })
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(t) = cli.threads {
        // Fails only if the pool already exists, e.g. on a second in-process run.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("ggm: {} failed: {}", f.op, f.error);
            f.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Outcome<i32> {
    match cmd {
        Command::Gen(a) => cmd_gen(a).map(|_| 0),
        Command::Sample(a) => cmd_sample(a).map(|_| 0),
        Command::Learn(a) => cmd_learn(a).map(|_| 0),
        Command::Eval(a) => cmd_eval(a).map(|_| 0),
        Command::Sweep(a) => cmd_sweep(a).map(|_| 0),
        Command::Verify(a) => cmd_verify(a),
        Command::Certify(a) => cmd_certify(a).map(|_| 0),
    }
}

macro_rules! outln {
    ($out:expr, $($arg:tt)*) => {{
        use std::fmt::Write as _;
        writeln!($out, $($arg)*).expect("writing to a String");
    }};
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn to_stdout(bytes: &[u8]) -> std::io::Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(bytes).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => to_stdout(text.as_bytes())?,
    }
    Ok(())
}

fn read_model(path: &Path) -> Result<GgmModel> {
    parse_model_json(&fs::read_to_string(path)?)
}

fn read_samples(path: &Path) -> Result<SampleSet> {
    read_csv(fs::File::open(path)?)
}

fn need<T>(v: Option<T>, flag: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| Error::BadParams(format!("--{flag} is required for family {family}")))
}

fn parse_edge(s: &str) -> Result<(usize, usize, f64)> {
    let bad = || Error::BadParams(format!("edge `{s}` is not of the form i,j,w"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok((
        parts[0].parse().map_err(|_| bad())?,
        parts[1].parse().map_err(|_| bad())?,
        parts[2].parse().map_err(|_| bad())?,
    ))
}

fn parse_param(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::BadParams(format!("parameter `{s}` is not key=value")))?;
    let v = v
        .trim()
        .parse()
        .map_err(|_| Error::BadParams(format!("parameter `{s}` has a non-numeric value")))?;
    Ok((k.trim().to_string(), v))
}

impl FamilyArgs {
    fn to_spec(&self, n_override: Option<usize>) -> Result<GeneratorSpec> {
        let fam = self
            .family
            .ok_or_else(|| Error::BadParams("--family is required".into()))?;
        let n = n_override.or(self.n);
        let family = match fam {
            FamilyName::PathCliques => Family::PathCliques {
                n: need(n, "n", "path-cliques")?,
                d: need(self.d, "d", "path-cliques")?,
                rho: need(self.rho, "rho", "path-cliques")?,
            },
            FamilyName::GaussianWalk => {
                let n = need(n, "n", "gaussian-walk")?;
                Family::GaussianWalk {
                    n,
                    start_time: self.start_time.unwrap_or(n),
                }
            }
            FamilyName::Gff => Family::Gff {
                n: need(n, "n", "gff")?,
                edges: self.edges.iter().map(|e| parse_edge(e)).collect::<Result<_>>()?,
                boundary: self.boundary.clone(),
            },
            FamilyName::BreakGreedy => Family::BreakGreedy {
                d: need(self.d, "d", "break-greedy")?,
                delta: need(self.delta, "delta", "break-greedy")?,
                n_pad: self.n_pad,
            },
            FamilyName::PossiblyHard => Family::PossiblyHard {
                d: need(self.d, "d", "possibly-hard")?,
                delta: need(self.delta, "delta", "possibly-hard")?,
                tiles: need(self.tiles, "tiles", "possibly-hard")?,
                permute_seed: self.permute_seed,
            },
            FamilyName::Counterexample => Family::NamedCounterexample {
                name: need(self.name.clone(), "name", "counterexample")?,
                params: self
                    .params
                    .iter()
                    .map(|p| parse_param(p))
                    .collect::<Result<BTreeMap<_, _>>>()?,
            },
        };
        Ok(GeneratorSpec {
            family,
            standardize: self.standardize,
        })
    }
}

fn cmd_gen(a: GenArgs) -> Outcome<()> {
    let spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(Error::from).during("read spec")?;
            serde_json::from_str::<GeneratorSpec>(&text)
                .map_err(Error::from)
                .during("parse spec")?
        }
        None => a.family.to_spec(None).during("gen")?,
    };
    let model = spec.build().during("gen")?;
    let config = serde_json::to_value(&spec).map_err(Error::from).during("gen")?;
    let text = to_canonical(&ModelFile::from_model(&model, Some(config))).during("write model")?;
    emit(a.out.as_deref(), &text).during("write model")
}

fn cmd_sample(a: SampleArgs) -> Outcome<()> {
    let model = read_model(&a.model).during("read model")?;
    let set = sample(&model, a.m, a.seed).during("sample")?;
    let mut buf = Vec::new();
    write_csv(&set, &mut buf).during("write samples")?;
    match &a.out {
        Some(p) => fs::write(p, buf).map_err(Error::from),
        None => to_stdout(&buf).map_err(Error::from),
    }
    .during("write samples")
}

#[derive(Serialize)]
struct LearnRecord<'a> {
    algorithm: &'a str,
    config: Value,
    theta_hat: Vec<Vec<f64>>,
    edges: &'a [(usize, usize)],
    per_node: &'a [Value],
}

fn cmd_learn(a: LearnArgs) -> Outcome<()> {
    let algorithm: Algorithm = a.algorithm.parse().during("parse algorithm")?;
    let model = a.model.as_deref().map(read_model).transpose().during("read model")?;
    let samples = match (&a.samples, a.population) {
        (Some(p), false) => Some(read_samples(p).during("read samples")?),
        (None, false) => return Err(Error::BadParams("need --samples or --population".into())).during("learn"),
        (Some(_), true) => {
            return Err(Error::BadParams("--samples and --population are exclusive".into())).during("learn")
        }
        (None, true) => None,
    };
    let data = match (&samples, &model) {
        (Some(s), _) => Data::Samples(s),
        (None, Some(m)) => Data::Population(m.sigma()),
        (None, None) => return Err(Error::BadParams("--population needs --model".into())).during("learn"),
    };
    if let Some(m) = &model {
        if m.dim() != data.n() {
            return Err(Error::DimensionMismatch(format!(
                "model has n = {}, samples have n = {}",
                m.dim(),
                data.n()
            )))
            .during("learn");
        }
    }
    let split_mode = match a.split_mode {
        Some(SplitArg::Split) => SplitMode::Split,
        Some(SplitArg::Single) => SplitMode::Single,
        None if algorithm == Algorithm::Hybrid => SplitMode::Single,
        None => SplitMode::Split,
    };
    let cfg = LearnerConfig {
        nu: a.nu,
        t_steps: a.t_steps,
        kappa: a.kappa.or_else(|| model.as_ref().and_then(kappa_of)),
        d: a.d.or_else(|| model.as_ref().map(max_degree_of)),
        tau: a.tau,
        gamma: a.gamma,
        gamma_prime: a.gamma_prime,
        split_mode,
        merge_rule: match a.merge {
            Some(MergeArg::Union) => MergeRule::Union,
            _ => MergeRule::Intersection,
        },
        budget: a.budget.map_or(crate::learners::ENUMERATION_BUDGET, u128::from),
    };
    let out = learn(&data, algorithm, &cfg).during("learn")?;
    let mut config = serde_json::to_value(&cfg).map_err(Error::from).during("learn")?;
    config["seed"] = json!(a.seed);
    config["population"] = json!(a.population);
    config["n"] = json!(data.n());
    if let Some(s) = &samples {
        config["m"] = json!(s.m());
    }
    if let Some(m) = &model {
        config["model_hash"] = json!(m.digest());
    }
    let record = LearnRecord {
        algorithm: algorithm.name(),
        config,
        theta_hat: out.estimate.theta_hat.to_rows(),
        edges: &out.estimate.edges,
        per_node: &out.per_node,
    };
    let text = to_canonical(&record).during("write result")?;
    emit(a.out.as_deref(), &text).during("write result")
}

/// Reads the estimate back from a `learn` result file.
pub fn parse_result_json(text: &str) -> Result<PrecisionEstimate> {
    let v: Value = serde_json::from_str(text)?;
    let rows: Vec<Vec<f64>> = serde_json::from_value(v["theta_hat"].clone())?;
    let edges: Vec<(usize, usize)> = serde_json::from_value(v["edges"].clone())?;
    Ok(PrecisionEstimate {
        theta_hat: SymMatrix::from_rows(&rows)?,
        edges,
    })
}

fn cmd_eval(a: EvalArgs) -> Outcome<()> {
    let text = fs::read_to_string(&a.result).map_err(Error::from).during("read result")?;
    let est = parse_result_json(&text).during("read result")?;
    let truth = a.truth.as_deref().map(read_model).transpose().during("read truth")?;
    let mut metrics = BTreeMap::new();
    if let Some(t) = &truth {
        let kappa = match a.kappa.or_else(|| kappa_of(t)) {
            Some(k) => k,
            None => return Err(Error::BadParams("truth has no edges; pass --kappa".into())).during("eval"),
        };
        metrics.insert("kappa", json!(kappa));
        metrics.insert("structure_error", json!(structure_error(&est, t, kappa).during("structure_error")?));
        metrics.insert("l1_error", json!(l1_error(&est.theta_hat, t.theta()).during("l1_error")?));
    }
    if let Some(p) = &a.holdout {
        let hold = read_samples(p).during("read holdout")?;
        let (hold, _) = standardize(&hold).during("standardize holdout")?;
        let cv = cv_objective(&est.theta_hat, hold.data().view()).during("cv_objective")?;
        metrics.insert("cv_objective", json!(cv));
    }
    let wsd = ws_distance(&est.theta_hat, 1e-10, 20_000).during("ws_distance")?;
    metrics.insert("ws_distance", json!(wsd));
    metrics.insert("edges", json!(est.edges.len()));
    let text = to_canonical(&metrics).during("write metrics")?;
    emit(a.out.as_deref(), &text).during("write metrics")
}

fn cmd_sweep(a: SweepArgs) -> Outcome<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(Error::from).during("read spec")?;
            Some(
                serde_json::from_str::<SweepSpec>(&text)
                    .map_err(Error::from)
                    .during("parse spec")?,
            )
        }
        None => None,
    };
    let algorithm = match (&a.algorithm, &spec) {
        (Some(s), _) => s.parse::<Algorithm>().during("parse algorithm")?,
        (None, Some(s)) => s.algorithm,
        (None, None) => return Err(Error::BadParams("--algorithm is required".into())).during("sweep"),
    };
    let ns = if !a.ns.is_empty() {
        a.ns.clone()
    } else if let Some(s) = &spec {
        s.ns.clone()
    } else {
        a.family.n.into_iter().collect()
    };
    if ns.is_empty() {
        return Err(Error::BadParams("--ns is required".into())).during("sweep");
    }
    let generator = match (&a.family.family, &spec) {
        (Some(_), _) => a.family.to_spec(Some(ns[0])).during("sweep")?,
        (None, Some(s)) => s.generator.clone(),
        (None, None) => return Err(Error::BadParams("--family is required".into())).during("sweep"),
    };
    let flag_grid = HyperGrid {
        t_steps: a.grid_t.clone(),
        nu: a.grid_nu.clone(),
        gamma_prime: a.grid_gamma_prime.clone(),
        tau: a.grid_tau.clone(),
        d: a.grid_d,
    };
    let grid = if flag_grid != HyperGrid::default() {
        flag_grid
    } else if let Some(s) = spec.as_ref().filter(|s| s.algorithm == algorithm) {
        s.grid.clone()
    } else {
        HyperGrid::default_for(algorithm)
    };
    let base = spec.take();
    let spec = SweepSpec {
        generator,
        ns,
        algorithm,
        grid,
        error_threshold: a.threshold.or(base.as_ref().map(|s| s.error_threshold)).unwrap_or(1.0),
        trials: a.trials.or(base.as_ref().map(|s| s.trials)).unwrap_or(8),
        seed: a.seed.or(base.as_ref().map(|s| s.seed)).expect("required by clap unless spec"),
        granularity: a.granularity.or(base.as_ref().map(|s| s.granularity)).unwrap_or(25),
        m_max: a.m_max.or(base.as_ref().map(|s| s.m_max)).unwrap_or(25_600),
    };
    let result = min_samples_sweep(&spec).during("min_samples_sweep")?;
    let mut buf = Vec::new();
    result.write_csv(&mut buf).during("write sweep")?;
    match &a.out {
        Some(p) => fs::write(p, buf).map_err(Error::from).during("write sweep")?,
        None => to_stdout(&buf).map_err(Error::from).during("write sweep")?,
    }
    if let Some(p) = &a.summary {
        let summary = json!({
            "spec": spec,
            "configs": result.configs,
            "cells": result.cells,
            "min_samples": result.min_samples,
        });
        let text = to_canonical(&summary).during("write summary")?;
        fs::write(p, text).map_err(Error::from).during("write summary")?;
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Outcome<i32> {
    let model = read_model(&a.model).during("read model")?;
    let report = verify_structural_lemmas(&model).during("verify_structural_lemmas")?;
    let mut out = String::new();
    outln!(out, "model {}  n = {}", report.model_hash, model.dim());
    outln!(
        out,
        "{:<30} {:>10} {:>8} {:>10} {:>14}  result",
        "inequality", "applicable", "rescaled", "checked", "worst slack"
    );
    for c in &report.checks {
        let verdict = match (c.applicable, c.passed(VERIFY_TOL)) {
            (false, _) => "n/a",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        outln!(
            out,
            "{:<30} {:>10} {:>8} {:>10} {:>14.6e}  {verdict}",
            c.lemma, c.applicable, c.via_rescaling, c.checked, c.worst_slack
        );
    }
    to_stdout(out.as_bytes()).map_err(Error::from).during("write report")?;
    if let Some(p) = &a.json {
        let text = to_canonical(&report).during("write report")?;
        fs::write(p, text).map_err(Error::from).during("write report")?;
    }
    Ok(if report.all_passed(VERIFY_TOL) { 0 } else { 1 })
}

fn cmd_certify(a: CertifyArgs) -> Outcome<()> {
    let model = read_model(&a.model).during("read model")?;
    let cert = certify(&model).during("certify")?;
    let mut out = String::new();
    outln!(out, "{}", cert.summary());
    outln!(out, "n = {}  max degree = {}", cert.n, cert.max_degree);
    match cert.kappa {
        Some(k) => outln!(out, "kappa = {k:.6e}"),
        None => outln!(out, "kappa undefined (no edges)"),
    }
    outln!(out, "SDD slack = {:.6e}", cert.sdd_slack);
    outln!(out, "walk-summable margin = {:.6e}", cert.walk_summable_margin);
    if let (Some(d), Some(m)) = (&cert.rescaling, &cert.rescaled_precision) {
        let fmt = |row: &[f64]| row.iter().map(|v| format!("{v:>10.6}")).collect::<Vec<_>>().join(" ");
        outln!(out, "rescaling d = [{}]", fmt(d));
        outln!(out, "diag(d) Theta diag(d) =");
        for row in m {
            outln!(out, "  {}", fmt(row));
        }
    }
    to_stdout(out.as_bytes()).map_err(Error::from).during("write certificate")?;
    if let Some(p) = &a.json {
        let text = to_canonical(&cert).during("write certificate")?;
        fs::write(p, text).map_err(Error::from).during("write certificate")?;
    }
    Ok(())
}
