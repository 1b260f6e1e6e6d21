use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use qubofit::basis::BasisSet;
use qubofit::data::{self, DatasetMeta, GeneratorKind, GeneratorSpec, DEFAULT_SIGMA};
use qubofit::encoding::{build_qubo, FixedPointFormat, QuboJson, QuboProblem};
use qubofit::harness::{self, DpMethod, Experiment, ExperimentSpec, Scenario, DEFAULT_SEED};
use qubofit::leastsq::{assemble, Dataset, FitResult};
use qubofit::solvers::{self, Backend, ExternalSampler};
use qubofit::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qubofit",
    version,
    about = "Least-squares fitting via QUBO, binary solvers, and fitted value iteration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed for data generation and heuristic solvers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendName>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenario JSON for `dp` and the control experiments.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Program used by the `external` backend; receives the QUBO JSON path.
    #[arg(long, global = true)]
    sampler: Option<PathBuf>,
    /// Extra argument passed to the sampler before the request path.
    #[arg(long = "sampler-arg", global = true, allow_hyphen_values = true)]
    sampler_args: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendName {
    Classical,
    Brute,
    Tabu,
    Anneal,
    External,
}

impl BackendName {
    fn as_str(self) -> &'static str {
        match self {
            BackendName::Classical => "classical",
            BackendName::Brute => "brute",
            BackendName::Tabu => "tabu",
            BackendName::Anneal => "anneal",
            BackendName::External => "external",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisName {
    Triangular,
    Chebyshev,
}

#[derive(Subcommand)]
enum Command {
    /// Write a noisy sample dataset as `<stem>.csv` plus `<stem>.meta.json`.
    Generate {
        #[arg(long, default_value = "linear")]
        kind: String,
        /// Custom polynomial coefficients in ascending order; overrides --kind.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coefficients: Option<Vec<f64>>,
        #[arg(short, long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        /// Min-max normalize the ordinates and record the range.
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value = "data")]
        stem: String,
    },
    /// Fit a dataset and report coefficients.
    Fit(FitArgs),
    /// Build the QUBO of a fit and write it as JSON.
    Qubo(FitArgs),
    /// Minimize a QUBO read from JSON.
    Solve {
        #[arg(long)]
        qubo: PathBuf,
    },
    /// Solve the arrival control problem of a scenario.
    Dp {
        #[arg(long, value_enum, default_value = "fitted")]
        method: MethodName,
    },
    /// Run a named experiment and write its CSV tables and manifest.
    Experiment {
        name: String,
        /// Override a parameter, e.g. `--set d=9` or `--set ms=[4,8]`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodName {
    Analytic,
    Grid,
    Fitted,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV with header `x,y`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "triangular")]
    basis: BasisName,
    #[arg(short, long, default_value_t = 2)]
    m: usize,
    #[arg(short, long, default_value_t = 10)]
    d: u32,
    /// Defaults to d − 2.
    #[arg(short, long)]
    p: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate {
            kind,
            coefficients,
            n,
            sigma,
            normalize,
            stem,
        } => {
            let kind = match coefficients {
                Some(c) => GeneratorKind::CustomPolynomial(c.clone()),
                None => GeneratorKind::parse(kind)?,
            };
            let spec = GeneratorSpec {
                kind,
                n: *n,
                noise_sigma: *sigma,
                seed: cli.seed.unwrap_or(DEFAULT_SEED),
            };
            let mut dataset = data::generate(&spec)?;
            if *normalize {
                dataset = data::minmax_normalize(&dataset)?;
            }
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            data::write_dataset(&dir, stem, &dataset, &DatasetMeta::new(&spec, &dataset))?;
            eprintln!("wrote {}", dir.join(format!("{stem}.csv")).display());
            Ok(())
        }
        Command::Fit(args) => {
            let (dataset, basis, fmt) = fit_setup(args)?;
            let backend = backend(cli, BackendName::Classical)?;
            let sys = assemble(&dataset, &basis);
            let params = harness::default_params(&backend, cli.seed.unwrap_or(DEFAULT_SEED));
            let (fit, solved) = solvers::solve_fit_detailed(&sys, fmt, &backend, &params)?;
            let report = FitReport {
                backend: backend.label(),
                rmse: data::rmse(&fit, &dataset),
                energy: solved.as_ref().map(|s| s.energy),
                bits: solved.map(|s| s.bits),
                fit,
            };
            emit(cli.out.as_deref(), &report)
        }
        Command::Qubo(args) => {
            let (dataset, basis, fmt) = fit_setup(args)?;
            let q = build_qubo(&assemble(&dataset, &basis), fmt);
            emit(cli.out.as_deref(), &q.to_json())
        }
        Command::Solve { qubo } => {
            let text = fs::read_to_string(qubo).map_err(|e| Error::io(qubo, e))?;
            let json: QuboJson = serde_json::from_str(&text)?;
            let q = QuboProblem::from_json(&json)?;
            let backend = backend(cli, BackendName::Tabu)?;
            let params = harness::default_params(&backend, cli.seed.unwrap_or(DEFAULT_SEED));
            let solved = solvers::solve_qubo(&q, &backend, &params)?;
            let coefficients = match q.layout() {
                Some(_) => Some(q.decode(&solved.bits)?),
                None => None,
            };
            emit(
                cli.out.as_deref(),
                &SolveReport {
                    result: solved,
                    coefficients,
                },
            )
        }
        Command::Dp { method } => {
            let mut scenario = match &cli.config {
                Some(path) => Scenario::load(path)?,
                None => Scenario::default(),
            };
            if let Some(seed) = cli.seed {
                scenario.seed = seed;
            }
            if let Some(b) = cli.backend {
                scenario.backend = b.as_str().to_string();
            }
            let backend = Backend::parse(&scenario.backend, sampler(cli))?;
            let method = match method {
                MethodName::Analytic => DpMethod::Analytic,
                MethodName::Grid => DpMethod::Grid,
                MethodName::Fitted => DpMethod::Fitted,
            };
            let outcome = harness::run_dp(&scenario, method, backend)?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("dp"));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_json(
                &dir.join("policy.json"),
                &PolicyReport {
                    strategy: &outcome.strategy,
                    scenario: &scenario,
                    actions: &outcome.policy.actions,
                    states: &outcome.policy.states,
                    total_cost: outcome.policy.total_cost,
                },
            )?;
            let values = dir.join("values.csv");
            fs::write(&values, outcome.values.to_csv()).map_err(|e| Error::io(&values, e))?;
            if let Some(fitted) = &outcome.fitted {
                write_json(&dir.join("fits.json"), fitted)?;
            }
            println!(
                "{} policy {:?} total cost {}",
                outcome.strategy, outcome.policy.actions, outcome.policy.total_cost
            );
            Ok(())
        }
        Command::Experiment { name, overrides } => {
            let experiment: Experiment = name.parse()?;
            let mut spec = ExperimentSpec::new(
                experiment,
                cli.seed.unwrap_or(DEFAULT_SEED),
                cli.out.clone().unwrap_or_else(|| PathBuf::from("results")),
            );
            for item in overrides {
                let (key, value) = item
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("override '{item}' is not KEY=VALUE")))?;
                let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
                spec.overrides.insert(key.trim().to_string(), value);
            }
            if let Some(path) = &cli.config {
                spec.scenario = Some(Scenario::load(path)?);
            }
            match cli.backend {
                None | Some(BackendName::Anneal) => {}
                Some(BackendName::External) => {
                    spec.sampler = Some(sampler(cli).ok_or_else(|| {
                        Error::InvalidArgument("external backend needs --sampler".into())
                    })?)
                }
                Some(other) => {
                    return Err(Error::InvalidArgument(format!(
                        "experiments always run classical and tabu; --backend selects the annealer column (anneal or external), got {}",
                        other.as_str()
                    )))
                }
            }
            let manifest = harness::run_experiment(&spec)?;
            for file in &manifest.files {
                println!("{}", spec.output_dir.join(file).display());
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct FitReport {
    backend: &'static str,
    #[serde(flatten)]
    fit: FitResult,
    rmse: f64,
    energy: Option<f64>,
    bits: Option<Vec<u8>>,
}

#[derive(Serialize)]
struct SolveReport {
    #[serde(flatten)]
    result: solvers::SolveResult,
    coefficients: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct PolicyReport<'a> {
    strategy: &'a str,
    scenario: &'a Scenario,
    actions: &'a [f64],
    states: &'a [f64],
    total_cost: f64,
}

fn sampler(cli: &Cli) -> Option<ExternalSampler> {
    cli.sampler.as_ref().map(|program| ExternalSampler {
        program: program.clone(),
        args: cli.sampler_args.clone(),
    })
}

fn backend(cli: &Cli, default: BackendName) -> Result<Backend> {
    Backend::parse(cli.backend.unwrap_or(default).as_str(), sampler(cli))
}

/// Dataset in normalized units, basis over its abscissa range, and format.
fn fit_setup(args: &FitArgs) -> Result<(Dataset, BasisSet, FixedPointFormat)> {
    let raw = data::read_dataset(&args.data)?;
    let dataset = match raw.norm() {
        Some(_) => raw,
        None => data::minmax_normalize(&raw)?,
    };
    let (lo, hi) = dataset.x_range();
    let basis = match args.basis {
        BasisName::Triangular => BasisSet::triangular_uniform(lo, hi, args.m)?,
        BasisName::Chebyshev => BasisSet::chebyshev(args.m)?,
    };
    let p = args.p.unwrap_or(args.d.saturating_sub(2));
    Ok((dataset, basis, FixedPointFormat::new(args.d, p)?))
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}
