//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bench::{derive_seed, run_benchmark, BenchConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{extended_proxy_estimate, standard_proxy_estimate, EffectEstimate};
use crate::fixtures::Fixture;
use crate::io::{load_csv, write_dataset_csv, write_report};
use crate::scm::CoefficientSampler;
use crate::hsic::HsicConfig;
use crate::selection::{proxy_gin_config, proxy_rank};

#[derive(Debug, Parser)]
#[command(name = "proxysel", version, about = "Proxy selection and causal effect estimation under latent confounding")]
pub struct Cli {
    /// Report errors on stderr as JSON objects.
    #[arg(long, global = true)]
    pub json_errors: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a dataset from a synthetic fixture.
    Simulate(SimulateArgs),
    /// Search for proxies and estimate every treatment's effect.
    Select(SelectArgs),
    /// Estimate one effect from user-chosen proxies.
    Estimate(EstimateArgs),
    /// Run a benchmark configuration.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// gaussian, nongaussian, mixture or appendixA(q)
    #[arg(long)]
    pub fixture: Fixture,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the drawn model as JSON.
    #[arg(long)]
    pub scm_out: Option<PathBuf>,
    /// Draw coefficients from the full Uniform[-1, 1] range.
    #[arg(long)]
    pub allow_small: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SearchMethod {
    Rank,
    Gin,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Outcome column name; defaults to the last column.
    #[arg(long)]
    pub outcome: Option<String>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of latent confounders.
    #[arg(long)]
    pub q: usize,
    #[arg(long, value_enum, default_value_t = SearchMethod::Rank)]
    pub method: SearchMethod,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Use a permutation null with this many draws in the HSIC tests (gin only).
    #[arg(long, value_name = "N")]
    pub permutation: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorChoice {
    Extended,
    Standard,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Column name or 1-based index.
    #[arg(long)]
    pub treatment: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub nce: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub nco: Vec<String>,
    #[arg(long, value_enum, default_value_t = EstimatorChoice::Extended)]
    pub estimator: EstimatorChoice,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Summary CSV path; overrides the config's output_path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct EstimateOutput<'a> {
    treatment: &'a str,
    nce: Vec<&'a str>,
    nco: Vec<&'a str>,
    estimate: EffectEstimate,
}

#[derive(Debug, Serialize)]
struct ErrorOutput<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let json_errors = argv.iter().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            if json_errors {
                report_error(true, "usage", e.to_string().trim().to_string(), 2);
            } else {
                let _ = e.print();
            }
            return 2;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            report_error(cli.json_errors, "usage", msg, 2);
            2
        }
        Err(Failure::Runtime(e)) => {
            report_error(cli.json_errors, e.kind(), e.to_string(), 1);
            1
        }
    }
}

fn report_error(json: bool, kind: &str, message: String, exit_code: i32) {
    let mut err = std::io::stderr().lock();
    if json {
        let out = ErrorOutput {
            error: kind,
            message,
            exit_code,
        };
        let _ = writeln!(err, "{}", serde_json::to_string(&out).expect("error serializes"));
    } else {
        let _ = writeln!(err, "error: {message}");
    }
}

fn dispatch(cmd: &Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Select(a) => select(a),
        Command::Estimate(a) => estimate(a),
        Command::Bench(a) => bench(a),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_report(value, path),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
            Ok(())
        }
    }
}

fn load(args: &DataArgs) -> Result<Dataset> {
    load_csv(&args.data, args.outcome.as_deref())
}

fn simulate(a: &SimulateArgs) -> std::result::Result<(), Failure> {
    if a.n < 2 {
        return Err(Failure::Usage(format!("--n must be ≥ 2, got {}", a.n)));
    }
    let sampler = if a.allow_small {
        CoefficientSampler::unrestricted()
    } else {
        CoefficientSampler::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(a.seed, 1, 0));
    let model = a.fixture.draw(&sampler, &mut rng)?;
    let data = model.sample(a.n, derive_seed(a.seed, 2, 0))?;
    write_dataset_csv(&data, &a.out)?;
    if let Some(path) = &a.scm_out {
        std::fs::write(path, model.to_json()? + "\n").map_err(Error::from)?;
    }
    Ok(())
}

fn select(a: &SelectArgs) -> std::result::Result<(), Failure> {
    if a.q == 0 {
        return Err(Failure::Usage("--q must be ≥ 1".into()));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Failure::Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    if a.permutation == Some(0) {
        return Err(Failure::Usage("--permutation must be ≥ 1".into()));
    }
    let data = load(&a.data)?;
    let report = match a.method {
        SearchMethod::Rank => proxy_rank(&data, a.q, a.alpha)?,
        SearchMethod::Gin => {
            let cfg = HsicConfig {
                permutations: a.permutation,
                ..HsicConfig::default()
            };
            proxy_gin_config(&data, a.q, a.alpha, cfg)?
        }
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    emit(&report, a.out.as_deref())?;
    Ok(())
}

/// Resolves a column token by name first, then as a 1-based index.
fn resolve(data: &Dataset, token: &str) -> std::result::Result<usize, Failure> {
    let token = token.trim();
    if let Some(i) = data.index_of(token) {
        return Ok(i);
    }
    match token.parse::<usize>() {
        Ok(i) if (1..=data.p() + 1).contains(&i) => Ok(i - 1),
        _ => Err(Failure::Usage(format!("unknown column {token:?}"))),
    }
}

fn estimate(a: &EstimateArgs) -> std::result::Result<(), Failure> {
    let data = load(&a.data)?;
    let k = resolve(&data, &a.treatment)?;
    let nce = a.nce.iter().map(|t| resolve(&data, t)).collect::<std::result::Result<Vec<_>, _>>()?;
    let nco = a.nco.iter().map(|t| resolve(&data, t)).collect::<std::result::Result<Vec<_>, _>>()?;
    let est = match a.estimator {
        EstimatorChoice::Extended => extended_proxy_estimate(&data, k, &nce, &nco)?,
        EstimatorChoice::Standard => {
            if nce.len() != 1 || nco.len() != 1 {
                return Err(Failure::Usage(
                    "--estimator standard takes exactly one NCE and one NCO".into(),
                ));
            }
            standard_proxy_estimate(&data, k, nce[0], nco[0])?
        }
    };
    let names = data.names();
    let out = EstimateOutput {
        treatment: &names[k],
        nce: nce.iter().map(|&i| names[i].as_str()).collect(),
        nco: nco.iter().map(|&i| names[i].as_str()).collect(),
        estimate: est,
    };
    emit(&out, a.out.as_deref())?;
    Ok(())
}

fn bench(a: &BenchArgs) -> std::result::Result<(), Failure> {
    let config = BenchConfig::load(&a.config)?;
    let out = a
        .out
        .clone()
        .or_else(|| config.output_path.clone())
        .ok_or_else(|| Failure::Usage("no output path: pass --out or set output_path".into()))?;
    let result = run_benchmark(&config)?;
    result.write(&out)?;
    Ok(())
}
