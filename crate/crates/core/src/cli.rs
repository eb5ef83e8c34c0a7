//! Command-line front end: `solve`, `prove`, `oracle` and `roundtest`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{CutReport, SimInstance, DEFAULT_BRUTE_FORCE_CAP};
use crate::pipeline::{self, FixingStatus, HEnumeration, InstanceMoments, PipelineConfig, PostProcess, SCHEMA_VERSION};
use crate::preprocess::{DEFAULT_MAX_S_STAR, DEFAULT_MAX_T};
use crate::prover::{self, ProverConfig};
use crate::rounding::{marginal_check, MarginalCheck, RoundingPoly, DEFAULT_NUM_SAMPLES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_PROVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "simcut", version, about = "Simultaneous weighted Max-Cut and a certified rounding-ratio prover")]
pub struct Cli {
    /// Worker threads; falls back to SIMCUT_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline on an instance file.
    Solve(SolveArgs),
    /// Certify `p ≥ α·q` over all valid edge configurations.
    Prove(ProveArgs),
    /// Exact max-min optimum by enumeration.
    Oracle(OracleArgs),
    /// Rounding marginals and, with an instance, cut-value concentration.
    Roundtest(RoundtestArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write JSON here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub r_base: usize,
    #[arg(long)]
    pub cond_edges_cap: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_NUM_SAMPLES)]
    pub num_samples: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_T)]
    pub max_t: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_S_STAR)]
    pub max_s_star: usize,
    /// `exhaustive`, `planted`, or `sampled:M`.
    #[arg(long, default_value = "exhaustive")]
    pub h_enumeration: String,
    #[arg(long, value_enum, default_value_t = PostArg::ExhaustiveH)]
    pub postprocess: PostArg,
    /// Independence threshold; defaults to epsilon squared.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub enumerate_branches: bool,
    /// `default`, `identity`, or odd coefficients `c1,c3,c5,...`.
    #[arg(long, default_value = "default")]
    pub f_r: String,
    #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_CAP)]
    pub brute_force_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PostArg {
    ExhaustiveH,
    PerturbOnly,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ProveArgs {
    #[arg(long, default_value_t = 0.878)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub q_floor: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_boxes: usize,
    #[arg(long, default_value_t = 60)]
    pub max_depth: usize,
    /// `default`, `identity`, or odd coefficients `c1,c3,c5,...`.
    #[arg(long, default_value = "default")]
    pub f_r: String,
    #[arg(long, default_value_t = 8)]
    pub max_counterexamples: usize,
    /// Include every discharged leaf in the certificate.
    #[arg(long)]
    pub record_leaves: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_CAP)]
    pub brute_force_cap: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RoundtestArgs {
    /// Biases to test; drawn from the seed when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub num_mu: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Half-width of the binomial band in standard deviations.
    #[arg(long, default_value_t = 4.0)]
    pub z: f64,
    /// Also run the pipeline on this instance and report cut-value moments.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub n: usize,
    pub k: usize,
    pub assignment: Vec<u8>,
    pub report: CutReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixingMoments {
    pub h: Vec<(usize, u8)>,
    pub low_concentration: Vec<(usize, f64)>,
    pub moments: Vec<InstanceMoments>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtestReport {
    pub schema_version: u32,
    pub seed: u64,
    pub samples: usize,
    pub z: f64,
    pub rounding: RoundingPoly,
    pub marginals: Vec<MarginalCheck>,
    pub failures: usize,
    pub concentration: Option<Vec<FixingMoments>>,
}

/// Parses `default`, `identity`, `custom:c1,c3,...` or `c1,c3,...`.
pub fn parse_rounding(s: &str) -> Result<RoundingPoly> {
    match s {
        "default" => Ok(RoundingPoly::standard()),
        "identity" => Ok(RoundingPoly::identity()),
        other => {
            let list = other.strip_prefix("custom:").unwrap_or(other);
            let coefs = list
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| Error::InvalidParams(format!("coefficient {c:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            RoundingPoly::from_odd_coefficients(&coefs)
        }
    }
}

fn parse_enumeration(s: &str, inst: &SimInstance, cap: usize) -> Result<HEnumeration> {
    match s {
        "exhaustive" => Ok(HEnumeration::Exhaustive),
        "planted" => Ok(HEnumeration::Planted(inst.brute_force_opt(cap)?.0 .0)),
        other => match other.strip_prefix("sampled:").map(str::parse::<usize>) {
            Some(Ok(m)) if m > 0 => Ok(HEnumeration::Sampled(m)),
            _ => Err(Error::InvalidParams(format!("h-enumeration {other:?}: use exhaustive, planted or sampled:M"))),
        },
    }
}

impl PipelineArgs {
    fn config(&self, inst: &SimInstance) -> Result<PipelineConfig> {
        let cfg = PipelineConfig {
            epsilon: self.epsilon,
            r_base: self.r_base,
            cond_edges_cap: self.cond_edges_cap,
            num_samples: self.num_samples,
            seed: self.seed,
            max_t: self.max_t,
            max_s_star: self.max_s_star,
            h_enumeration: parse_enumeration(&self.h_enumeration, inst, self.brute_force_cap)?,
            postprocess: match self.postprocess {
                PostArg::ExhaustiveH => PostProcess::ExhaustiveH,
                PostArg::PerturbOnly => PostProcess::PerturbOnly,
            },
            delta: self.delta,
            enumerate_branches: self.enumerate_branches,
            rounding: parse_rounding(&self.f_r)?,
            brute_force_cap: self.brute_force_cap,
            ..PipelineConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit<T: Serialize>(value: &T, out: &OutputArgs) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match &out.output {
        Some(p) => fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load(path: &Path) -> Result<SimInstance> {
    SimInstance::load(path)
}

fn solve(a: &SolveArgs) -> Result<i32> {
    let inst = load(&a.instance)?;
    let cfg = a.pipeline.config(&inst)?;
    let report = pipeline::run_full(&inst, &cfg)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    emit(&report, &a.out)?;
    if report.chosen.is_none() {
        warn!("{}", Error::AllFixingsInfeasible);
        return Ok(EXIT_INFEASIBLE);
    }
    info!("min_ratio {:?}", report.min_ratio);
    Ok(EXIT_OK)
}

fn prove(a: &ProveArgs) -> Result<i32> {
    let cfg = ProverConfig {
        alpha: a.alpha,
        q_floor: a.q_floor,
        max_boxes: a.max_boxes,
        max_depth: a.max_depth,
        rounding: parse_rounding(&a.f_r)?,
        record_leaves: a.record_leaves,
        max_counterexamples: a.max_counterexamples,
    };
    let cert = prover::certify(&cfg)?;
    emit(&cert, &a.out)?;
    info!("verdict {:?} after {} boxes", cert.verdict, cert.stats.boxes);
    match cert.ensure_proved() {
        Ok(()) => Ok(EXIT_OK),
        Err(e) => {
            warn!("{e}");
            Ok(EXIT_PROVER)
        }
    }
}

fn oracle(a: &OracleArgs) -> Result<i32> {
    let inst = load(&a.instance)?;
    let (f, report) = inst.brute_force_opt(a.brute_force_cap)?;
    emit(&OracleReport { schema_version: SCHEMA_VERSION, n: inst.n(), k: inst.k(), assignment: f.0, report }, &a.out)?;
    Ok(EXIT_OK)
}

fn roundtest(a: &RoundtestArgs) -> Result<i32> {
    let rounding = parse_rounding(&a.pipeline.f_r)?;
    if a.samples == 0 {
        return Err(Error::InvalidParams("samples must be positive".into()));
    }
    let mus: Vec<f64> = if a.mu.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(a.pipeline.seed);
        (0..a.num_mu).map(|_| rng.random_range(-1.0..=1.0)).collect()
    } else {
        a.mu.clone()
    };
    if let Some(m) = mus.iter().find(|m| !(-1.0..=1.0).contains(*m)) {
        return Err(Error::InvalidParams(format!("bias {m} outside [-1, 1]")));
    }
    let marginals: Vec<MarginalCheck> = mus
        .iter()
        .enumerate()
        .map(|(i, &mu)| marginal_check(&rounding, mu, a.samples, a.z, a.pipeline.seed.wrapping_add(i as u64 + 1)))
        .collect();
    let failures = marginals.iter().filter(|m| !m.within).count();
    let concentration = match &a.instance {
        Some(p) => {
            let inst = load(p)?;
            let cfg = a.pipeline.config(&inst)?;
            let run = pipeline::run_full(&inst, &cfg)?;
            Some(
                run.fixings
                    .into_iter()
                    .filter(|f| !matches!(f.status, FixingStatus::Infeasible { .. } | FixingStatus::Failed { .. }))
                    .map(|f| FixingMoments { h: f.h, low_concentration: f.low_concentration, moments: f.moments })
                    .collect(),
            )
        }
        None => None,
    };
    let report = RoundtestReport {
        schema_version: SCHEMA_VERSION,
        seed: a.pipeline.seed,
        samples: a.samples,
        z: a.z,
        rounding,
        marginals,
        failures,
        concentration,
    };
    emit(&report, &a.out)?;
    Ok(EXIT_OK)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("SIMCUT_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|e| Error::InvalidParams(format!("SIMCUT_THREADS={v:?}: {e}"))),
        Err(_) => Ok(None),
    }
}

fn init_logging(level: LogLevel) {
    let filter = match level {
        LogLevel::Error => log::LevelFilter::Error,
        LogLevel::Warn => log::LevelFilter::Warn,
        LogLevel::Info => log::LevelFilter::Info,
        LogLevel::Debug => log::LevelFilter::Debug,
    };
    // A second initialization (repeated calls in one process) is harmless.
    let _ = env_logger::Builder::new().filter_level(filter).format_timestamp(None).try_init();
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let threads = thread_count(cli.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidParams("threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Prove(a) => prove(a),
        Command::Oracle(a) => oracle(a),
        Command::Roundtest(a) => roundtest(a),
    })
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.log_level);
    match dispatch(&cli) {
        Ok(code) => code,
        Err(Error::AllFixingsInfeasible) => {
            eprintln!("error: {}", Error::AllFixingsInfeasible);
            EXIT_INFEASIBLE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
