//! Reproducible experiment runs.
//!
//! Every experiment produces one or more [`Table`]s that are written as CSV
//! files next to a JSON [`Manifest`]. All randomness derives from the
//! experiment seed, so reruns give byte-identical CSV output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::basis::BasisSet;
use crate::data::{
    ape, generate, minmax_normalize, rmse, GeneratorKind, GeneratorSpec, DEFAULT_DELTA, DEFAULT_SIGMA,
};
use crate::dynprog::{
    analytic_jit_policy, equidistant, extract_policy, fitted_value_iteration, make_jit_mdp,
    value_function_error, value_iteration_grid, AnalyticJitValue, FittedConfig, FittedValue, JitParams,
    MdpSpec, Policy, Slice, TerminalMode, ValueFunction, ValueSource,
};
use crate::encoding::{build_qubo, density, upper_triangularize, FixedPointFormat};
use crate::error::{Error, Result};
use crate::leastsq::{assemble, Dataset, FitResult};
use crate::solvers::{solve_fit, Backend, ExternalSampler, SolverParams};

/// Default experiment seed.
pub const DEFAULT_SEED: u64 = 2024;

/// Points per slice in value-curve tables.
pub const CURVE_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Table1,
    Table2,
    Table3,
    FigDSweep,
    FigMSweep,
    ChebyshevTable,
    ChebyshevDSweep,
    QuboHeatmap,
    Table4,
    FigValueMse,
    FigMError,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Table1,
        Experiment::Table2,
        Experiment::Table3,
        Experiment::FigDSweep,
        Experiment::FigMSweep,
        Experiment::ChebyshevTable,
        Experiment::ChebyshevDSweep,
        Experiment::QuboHeatmap,
        Experiment::Table4,
        Experiment::FigValueMse,
        Experiment::FigMError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Table1 => "table1",
            Experiment::Table2 => "table2",
            Experiment::Table3 => "table3",
            Experiment::FigDSweep => "fig_d_sweep",
            Experiment::FigMSweep => "fig_m_sweep",
            Experiment::ChebyshevTable => "chebyshev_table",
            Experiment::ChebyshevDSweep => "chebyshev_d_sweep",
            Experiment::QuboHeatmap => "qubo_heatmap",
            Experiment::Table4 => "table4",
            Experiment::FigValueMse => "fig_value_mse",
            Experiment::FigMError => "fig_m_error",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment '{s}'")))
    }
}

/// Parameters of the just-in-time arrival control problem and its solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub ell: f64,
    pub v_max: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub alpha: f64,
    pub x0: f64,
    /// States of the grid-based value iteration.
    pub n_states: usize,
    /// Action grid of fitted value iteration and its policy extraction.
    pub n_actions: usize,
    /// Sample states of fitted value iteration.
    pub n_samples: usize,
    pub m: usize,
    pub d: u32,
    pub p: u32,
    pub backend: String,
    pub seed: u64,
    /// Action grid of the grid-based value iteration.
    pub grid_actions: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            ell: 100.0,
            v_max: 50.0,
            horizon: 4,
            alpha: 100.0,
            x0: 0.0,
            n_states: 100,
            n_actions: 2001,
            n_samples: 50,
            m: 9,
            d: 9,
            p: 8,
            backend: "tabu".into(),
            seed: DEFAULT_SEED,
            grid_actions: 50,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.mdp()?;
        self.format()?;
        if self.m == 0 || self.n_samples < self.m {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= m <= n_samples, got m = {}, n_samples = {}",
                self.m, self.n_samples
            )));
        }
        if self.n_states < 2 || self.n_actions < 2 || self.grid_actions < 2 {
            return Err(Error::InvalidArgument(
                "state and action grids need at least 2 points".into(),
            ));
        }
        if !(self.x0 >= 0.0 && self.x0 <= self.ell) {
            return Err(Error::InvalidArgument(format!(
                "x0 = {} outside [0, {}]",
                self.x0, self.ell
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> JitParams {
        JitParams::still_water(self.ell, self.v_max, self.alpha)
    }

    pub fn mdp(&self) -> Result<MdpSpec> {
        make_jit_mdp(&self.params(), self.horizon)
    }

    pub fn format(&self) -> Result<FixedPointFormat> {
        FixedPointFormat::new(self.d, self.p)
    }

    pub fn basis(&self) -> Result<BasisSet> {
        BasisSet::triangular_uniform(0.0, self.ell, self.m)
    }

    pub fn fitted_config(&self, backend: Backend, params: SolverParams) -> Result<FittedConfig> {
        Ok(FittedConfig {
            basis: self.basis()?,
            fmt: self.format()?,
            backend,
            params,
            n_samples: self.n_samples,
            n_actions: self.n_actions,
            terminal: TerminalMode::Exact,
        })
    }
}

/// Recognized override keys. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    data: Option<String>,
    coefficients: Option<Vec<f64>>,
    n: Option<usize>,
    sigma: Option<f64>,
    m: Option<usize>,
    chebyshev_m: Option<usize>,
    d: Option<u32>,
    p: Option<u32>,
    ns: Option<Vec<usize>>,
    ms: Option<Vec<usize>>,
    ds: Option<Vec<u32>>,
    alphas: Option<Vec<f64>>,
    restarts: Option<usize>,
    iterations: Option<usize>,
    tenure: Option<usize>,
    anneal_restarts: Option<usize>,
    anneal_sweeps: Option<usize>,
    ell: Option<f64>,
    v_max: Option<f64>,
    #[serde(rename = "T")]
    horizon: Option<usize>,
    alpha: Option<f64>,
    x0: Option<f64>,
    n_states: Option<usize>,
    n_actions: Option<usize>,
    n_samples: Option<usize>,
    grid_actions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: Experiment,
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Base scenario of the control experiments; defaults apply when absent.
    #[serde(default)]
    pub scenario: Option<Scenario>,
    /// Populates the annealer columns; simulated annealing otherwise.
    #[serde(default)]
    pub sampler: Option<ExternalSampler>,
}

impl ExperimentSpec {
    pub fn new(name: Experiment, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            name,
            overrides: BTreeMap::new(),
            seed,
            output_dir: output_dir.into(),
            scenario: None,
            sampler: None,
        }
    }

    pub fn with_override(mut self, key: &str, value: Value) -> Self {
        self.overrides.insert(key.to_string(), value);
        self
    }
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Text(s) => f.write_str(s),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Num(x) => write!(f, "{x:?}"),
            Cell::Empty => Ok(()),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u32> for Cell {
    fn from(i: u32) -> Self {
        Cell::Int(i as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric value at `row` in column `name`.
    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        match self.rows.get(row)?.get(self.column(name)?)? {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    /// First row whose column `name` holds the text or integer `key`.
    pub fn find(&self, name: &str, key: &str) -> Option<usize> {
        let col = self.column(name)?;
        self.rows.iter().position(|r| r[col].to_string() == key)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
    }
}

/// Tables plus experiment-specific details recorded in the manifest.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ExperimentSpec,
    pub version: String,
    pub wall_time_s: f64,
    pub annealer: String,
    pub files: Vec<String>,
    pub details: Value,
}

/// `v<crate version>`, optionally replaced at build time by `QUBOFIT_VERSION`.
pub fn version() -> String {
    option_env!("QUBOFIT_VERSION")
        .map(str::to_string)
        .unwrap_or_else(|| format!("v{}", env!("CARGO_PKG_VERSION")))
}

/// Compute an experiment without touching the file system.
pub fn compute(spec: &ExperimentSpec) -> Result<Outcome> {
    let run = Run::new(spec)?;
    let tables = match spec.name {
        Experiment::Table1 => vec![run.coefficient_table(
            "table1",
            &run.dataset(GeneratorKind::Linear, 64)?,
            |_| BasisSet::triangular_uniform(0.0, 1.0, 2),
            run.format(10, 8)?,
        )?],
        Experiment::Table2 => vec![run.coefficient_table(
            "table2",
            &run.dataset(GeneratorKind::CustomPolynomial(vec![1.0 / 3.0, -0.25]), 64)?,
            |_| BasisSet::triangular_uniform(0.0, 1.0, 2),
            run.format(10, 8)?,
        )?],
        Experiment::ChebyshevTable => vec![run.coefficient_table(
            "chebyshev_table",
            &run.dataset(GeneratorKind::Quadratic, 64)?,
            BasisSet::chebyshev,
            run.format(8, 7)?,
        )?],
        Experiment::Table3 => vec![run.table3()?],
        Experiment::FigDSweep => {
            vec![run.d_sweep("fig_d_sweep", |m| BasisSet::triangular_uniform(0.0, 1.0, m))?]
        }
        Experiment::ChebyshevDSweep => {
            vec![run.d_sweep("chebyshev_d_sweep", BasisSet::chebyshev)?]
        }
        Experiment::FigMSweep => vec![run.m_sweep()?],
        Experiment::QuboHeatmap => return run.qubo_heatmap(),
        Experiment::Table4 => run.table4()?,
        Experiment::FigValueMse => run.fig_value_mse()?,
        Experiment::FigMError => vec![run.fig_m_error()?],
    };
    Ok(Outcome {
        tables,
        details: json!({}),
    })
}

/// Run an experiment and write `<table>.csv` files plus
/// `<experiment>.manifest.json` into the output directory.
///
/// Files are staged in a scratch directory and only moved into place once
/// everything succeeded.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Manifest> {
    let started = Instant::now();
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".partial-")
        .tempdir_in(dir)
        .map_err(|e| Error::io(dir, e))?;

    let outcome = compute(spec)?;
    let mut files = Vec::new();
    for table in &outcome.tables {
        let name = format!("{}.csv", table.name);
        let path = staging.path().join(&name);
        fs::write(&path, table.to_csv()).map_err(|e| Error::io(&path, e))?;
        files.push(name);
    }
    let manifest_name = format!("{}.manifest.json", spec.name);
    let manifest = Manifest {
        spec: spec.clone(),
        version: version(),
        wall_time_s: started.elapsed().as_secs_f64(),
        annealer: annealer_label(spec).to_string(),
        files: files.clone(),
        details: outcome.details,
    };
    let path = staging.path().join(&manifest_name);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    files.push(manifest_name);

    for name in &files {
        let from = staging.path().join(name);
        let to = dir.join(name);
        fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
    }
    Ok(manifest)
}

fn annealer_label(spec: &ExperimentSpec) -> &'static str {
    if spec.sampler.is_some() {
        "external"
    } else {
        "simulated_annealing"
    }
}

/// Output of [`run_dp`].
#[derive(Debug, Clone)]
pub struct DpOutcome {
    pub strategy: String,
    pub policy: Policy,
    /// `t, x, value` on an equidistant grid per slice.
    pub values: Table,
    pub fitted: Option<FittedValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DpMethod {
    Analytic,
    Grid,
    Fitted,
}

impl FromStr for DpMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(DpMethod::Analytic),
            "grid" => Ok(DpMethod::Grid),
            "fitted" => Ok(DpMethod::Fitted),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Solver parameters used by the command line for `backend` and `seed`.
pub fn default_params(backend: &Backend, seed: u64) -> SolverParams {
    match backend {
        Backend::Annealing => SolverParams::annealing(seed),
        _ => SolverParams::tabu(seed),
    }
}

/// Solve the scenario's control problem with one method.
pub fn run_dp(scenario: &Scenario, method: DpMethod, backend: Backend) -> Result<DpOutcome> {
    scenario.validate()?;
    let mdp = scenario.mdp()?;
    let (strategy, policy, values, fitted) = match method {
        DpMethod::Analytic => {
            let reference = AnalyticJitValue::new(scenario.params(), scenario.horizon)?;
            let policy = analytic_jit_policy(&scenario.params(), scenario.horizon, scenario.x0)?;
            (
                "analytic".to_string(),
                policy,
                curve_table(scenario, &[&reference], &["value"])?,
                None,
            )
        }
        DpMethod::Grid => {
            let table = value_iteration_grid(&mdp, scenario.n_states, scenario.grid_actions)?;
            let policy = extract_policy(
                &mdp,
                ValueSource::Grid(&table),
                scenario.x0,
                scenario.grid_actions,
            )?;
            (
                "grid".to_string(),
                policy,
                curve_table(scenario, &[&table], &["value"])?,
                None,
            )
        }
        DpMethod::Fitted => {
            let params = default_params(&backend, scenario.seed);
            let label = backend.label().to_string();
            let cfg = scenario.fitted_config(backend, params)?;
            let fitted = fitted_value_iteration(&mdp, &cfg)?;
            let policy = extract_policy(
                &mdp,
                ValueSource::Fitted(&fitted),
                scenario.x0,
                scenario.n_actions,
            )?;
            let values = curve_table(scenario, &[&fitted], &["value"])?;
            (label, policy, values, Some(fitted))
        }
    };
    Ok(DpOutcome {
        strategy,
        policy,
        values: Table {
            name: "values".into(),
            ..values
        },
        fitted,
    })
}

/// `t, x, <name>...` on [`CURVE_POINTS`] equidistant states per slice.
fn curve_table(scenario: &Scenario, sources: &[&dyn ValueFunction], names: &[&str]) -> Result<Table> {
    let mut columns = vec!["t", "x"];
    columns.extend_from_slice(names);
    let mut table = Table::new("curves", &columns);
    let xs = equidistant(0.0, scenario.ell, CURVE_POINTS)?;
    for t in 0..=scenario.horizon {
        for &x in &xs {
            let mut row = vec![Cell::from(t), Cell::from(x)];
            row.extend(sources.iter().map(|s| Cell::from(s.value(t, x))));
            table.push(row);
        }
    }
    Ok(table)
}

struct Run<'a> {
    spec: &'a ExperimentSpec,
    settings: Settings,
}

impl<'a> Run<'a> {
    fn new(spec: &'a ExperimentSpec) -> Result<Self> {
        let map = spec.overrides.clone().into_iter().collect();
        let settings: Settings = serde_json::from_value(Value::Object(map))
            .map_err(|e| Error::InvalidArgument(format!("override: {e}")))?;
        Ok(Run { spec, settings })
    }

    fn data_kind(&self, default: GeneratorKind) -> Result<GeneratorKind> {
        if let Some(c) = &self.settings.coefficients {
            return Ok(GeneratorKind::CustomPolynomial(c.clone()));
        }
        match &self.settings.data {
            Some(name) => GeneratorKind::parse(name),
            None => Ok(default),
        }
    }

    fn dataset_of(&self, kind: GeneratorKind, n: usize) -> Result<Dataset> {
        let spec = GeneratorSpec {
            kind,
            n,
            noise_sigma: self.settings.sigma.unwrap_or(DEFAULT_SIGMA),
            seed: self.spec.seed,
        };
        minmax_normalize(&generate(&spec)?)
    }

    fn dataset(&self, default: GeneratorKind, n: usize) -> Result<Dataset> {
        self.dataset_of(self.data_kind(default)?, self.settings.n.unwrap_or(n))
    }

    fn format(&self, d: u32, p: u32) -> Result<FixedPointFormat> {
        let d_set = self.settings.d.unwrap_or(d);
        let p_set = self.settings.p.unwrap_or(if self.settings.d.is_some() {
            d_set.saturating_sub(d - p)
        } else {
            p
        });
        FixedPointFormat::new(d_set, p_set)
    }

    fn tabu_params(&self) -> SolverParams {
        let base = SolverParams::tabu(self.spec.seed);
        SolverParams {
            restarts: self.settings.restarts.unwrap_or(base.restarts),
            iterations_per_restart: self.settings.iterations.unwrap_or(base.iterations_per_restart),
            tabu_tenure: self.settings.tenure,
            ..base
        }
    }

    fn anneal_params(&self) -> SolverParams {
        let base = SolverParams::annealing(self.spec.seed);
        SolverParams {
            restarts: self.settings.anneal_restarts.unwrap_or(base.restarts),
            iterations_per_restart: self.settings.anneal_sweeps.unwrap_or(base.iterations_per_restart),
            ..base
        }
    }

    fn annealer(&self) -> Backend {
        match &self.spec.sampler {
            Some(s) => Backend::External(s.clone()),
            None => Backend::Annealing,
        }
    }

    fn solver_labels(&self) -> [&'static str; 3] {
        ["classical", "tabu", annealer_label(self.spec)]
    }

    /// Classical, tabu, and annealer fits of one system.
    fn fits(&self, data: &Dataset, basis: &BasisSet, fmt: FixedPointFormat) -> Result<[FitResult; 3]> {
        let sys = assemble(data, basis);
        Ok([
            solve_fit(&sys, fmt, &Backend::Classical, &self.tabu_params())?,
            solve_fit(&sys, fmt, &Backend::Tabu, &self.tabu_params())?,
            solve_fit(&sys, fmt, &self.annealer(), &self.anneal_params())?,
        ])
    }

    fn coefficient_table(
        &self,
        name: &str,
        data: &Dataset,
        basis: impl Fn(usize) -> Result<BasisSet>,
        fmt: FixedPointFormat,
    ) -> Result<Table> {
        let default_m = match name {
            "chebyshev_table" => 3,
            _ => 2,
        };
        let basis = basis(self.settings.m.unwrap_or(default_m))?;
        let m = basis.len();
        let mut columns = vec!["solver".to_string()];
        columns.extend((0..m).map(|j| format!("c{j}")));
        columns.extend((0..m).map(|j| format!("ape_c{j}")));
        columns.push("rmse".into());
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut table = Table::new(name, &columns);

        let fits = self.fits(data, &basis, fmt)?;
        let classical = &fits[0].coefficients;
        for (i, (label, fit)) in self.solver_labels().into_iter().zip(&fits).enumerate() {
            let mut row = vec![Cell::from(label)];
            row.extend(fit.coefficients.iter().map(|&c| Cell::from(c)));
            row.extend(fit.coefficients.iter().zip(classical).map(|(&c, &reference)| {
                if i == 0 {
                    Cell::Empty
                } else {
                    Cell::from(ape(reference, c, DEFAULT_DELTA))
                }
            }));
            row.push(Cell::from(rmse(fit, data)));
            table.push(row);
        }
        Ok(table)
    }

    fn table3(&self) -> Result<Table> {
        let ns = self
            .settings
            .ns
            .clone()
            .unwrap_or_else(|| vec![64, 128, 256, 512, 1024]);
        let kind = self.data_kind(GeneratorKind::Linear)?;
        let basis = BasisSet::triangular_uniform(0.0, 1.0, self.settings.m.unwrap_or(2))?;
        let fmt = self.format(10, 8)?;
        let mut table = Table::new(
            "table3",
            &[
                "n",
                "rmse_classical",
                "rmse_tabu",
                "rmse_anneal",
                "ape_tabu",
                "ape_anneal",
            ],
        );
        for n in ns {
            let data = self.dataset_of(kind.clone(), n)?;
            let r = self.fits(&data, &basis, fmt)?.map(|f| rmse(&f, &data));
            table.push(vec![
                n.into(),
                r[0].into(),
                r[1].into(),
                r[2].into(),
                ape(r[0], r[1], DEFAULT_DELTA).into(),
                ape(r[0], r[2], DEFAULT_DELTA).into(),
            ]);
        }
        Ok(table)
    }

    fn d_sweep(&self, name: &str, basis: impl Fn(usize) -> Result<BasisSet>) -> Result<Table> {
        let data = self.dataset(GeneratorKind::Cubic, 64)?;
        let basis = basis(self.settings.m.unwrap_or(4))?;
        let ds = self.settings.ds.clone().unwrap_or_else(|| (4..=12).collect());
        let mut table = Table::new(name, &["d", "p", "rmse_classical", "rmse_tabu", "rmse_anneal"]);
        for d in ds {
            let p = d.saturating_sub(1);
            let fmt = FixedPointFormat::new(d, p)?;
            let r = self.fits(&data, &basis, fmt)?.map(|f| rmse(&f, &data));
            table.push(vec![d.into(), p.into(), r[0].into(), r[1].into(), r[2].into()]);
        }
        Ok(table)
    }

    fn m_sweep(&self) -> Result<Table> {
        let kinds = match (&self.settings.data, &self.settings.coefficients) {
            (None, None) => vec![GeneratorKind::Trigonometric, GeneratorKind::Quadratic],
            _ => vec![self.data_kind(GeneratorKind::Trigonometric)?],
        };
        let ms = self.settings.ms.clone().unwrap_or_else(|| (2..=12).collect());
        let fmt = self.format(8, 7)?;
        let mut table = Table::new(
            "fig_m_sweep",
            &["data", "m", "rmse_classical", "rmse_tabu", "rmse_anneal"],
        );
        for kind in kinds {
            let data = self.dataset_of(kind.clone(), self.settings.n.unwrap_or(64))?;
            for &m in &ms {
                let basis = BasisSet::triangular_uniform(0.0, 1.0, m)?;
                let r = self.fits(&data, &basis, fmt)?.map(|f| rmse(&f, &data));
                table.push(vec![
                    kind.name().into(),
                    m.into(),
                    r[0].into(),
                    r[1].into(),
                    r[2].into(),
                ]);
            }
        }
        Ok(table)
    }

    fn qubo_heatmap(&self) -> Result<Outcome> {
        let data = self.dataset(GeneratorKind::Quadratic, 64)?;
        let fmt = self.format(8, 7)?;
        let cases = [
            (
                "triangular",
                BasisSet::triangular_uniform(0.0, 1.0, self.settings.m.unwrap_or(8))?,
            ),
            (
                "chebyshev",
                BasisSet::chebyshev(self.settings.chebyshev_m.unwrap_or(4))?,
            ),
        ];
        let mut tables = Vec::new();
        let mut details = serde_json::Map::new();
        for (label, basis) in cases {
            let q = upper_triangularize(&build_qubo(&assemble(&data, &basis), fmt));
            let n = q.dim();
            let mut table = Table::new(&format!("qubo_heatmap_{label}"), &["row", "col", "value"]);
            for i in 0..n {
                for j in i..n {
                    table.push(vec![i.into(), j.into(), q.get(i, j).into()]);
                }
            }
            tables.push(table);
            details.insert(
                label.to_string(),
                json!({
                    "n": n,
                    "m": basis.len(),
                    "d": fmt.digits(),
                    "p": fmt.point(),
                    "density": density(&q),
                    "block_bandwidth": q.block_bandwidth(),
                }),
            );
        }
        Ok(Outcome {
            tables,
            details: Value::Object(details),
        })
    }

    fn scenario(&self) -> Scenario {
        let s = &self.settings;
        let base = self.spec.scenario.clone().unwrap_or_default();
        Scenario {
            ell: s.ell.unwrap_or(base.ell),
            v_max: s.v_max.unwrap_or(base.v_max),
            horizon: s.horizon.unwrap_or(base.horizon),
            alpha: s.alpha.unwrap_or(base.alpha),
            x0: s.x0.unwrap_or(base.x0),
            n_states: s.n_states.unwrap_or(base.n_states),
            n_actions: s.n_actions.unwrap_or(base.n_actions),
            n_samples: s.n_samples.unwrap_or(base.n_samples),
            m: s.m.unwrap_or(base.m),
            d: s.d.unwrap_or(base.d),
            p: s.p.unwrap_or(base.p),
            seed: self.spec.seed,
            grid_actions: s.grid_actions.unwrap_or(base.grid_actions),
            ..base
        }
    }

    fn fitted(&self, scenario: &Scenario, mdp: &MdpSpec, backend: Backend) -> Result<FittedValue> {
        let params = match backend {
            Backend::Annealing => self.anneal_params(),
            _ => self.tabu_params(),
        };
        fitted_value_iteration(mdp, &scenario.fitted_config(backend, params)?)
    }

    fn table4(&self) -> Result<Vec<Table>> {
        let scenario = self.scenario();
        scenario.validate()?;
        let mdp = scenario.mdp()?;
        let reference = AnalyticJitValue::new(scenario.params(), scenario.horizon)?;
        let grid = value_iteration_grid(&mdp, scenario.n_states, scenario.grid_actions)?;
        let inverse = self.fitted(&scenario, &mdp, Backend::Classical)?;
        let tabu = self.fitted(&scenario, &mdp, Backend::Tabu)?;
        let anneal = self.fitted(&scenario, &mdp, self.annealer())?;

        let policies = [
            (
                "analytic",
                analytic_jit_policy(&scenario.params(), scenario.horizon, scenario.x0)?,
            ),
            (
                "grid",
                extract_policy(&mdp, ValueSource::Grid(&grid), scenario.x0, scenario.grid_actions)?,
            ),
            (
                "inverse",
                extract_policy(
                    &mdp,
                    ValueSource::Fitted(&inverse),
                    scenario.x0,
                    scenario.n_actions,
                )?,
            ),
            (
                "tabu",
                extract_policy(&mdp, ValueSource::Fitted(&tabu), scenario.x0, scenario.n_actions)?,
            ),
            (
                annealer_label(self.spec),
                extract_policy(
                    &mdp,
                    ValueSource::Fitted(&anneal),
                    scenario.x0,
                    scenario.n_actions,
                )?,
            ),
        ];
        let mut columns = vec!["strategy".to_string()];
        columns.extend((0..scenario.horizon).map(|t| format!("u{t}")));
        columns.push("V0".into());
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut table = Table::new("table4", &columns);
        for (label, policy) in &policies {
            let mut row = vec![Cell::from(*label)];
            row.extend(policy.actions.iter().map(|&u| Cell::from(u)));
            row.push(policy.total_cost.into());
            table.push(row);
        }

        let labels = ["analytic", "grid", "inverse", "tabu", annealer_label(self.spec)];
        let sources: [&dyn ValueFunction; 5] = [&reference, &grid, &inverse, &tabu, &anneal];
        let mut values = curve_table(&scenario, &sources, &labels)?;
        values.name = "table4_values".into();

        let mut errors = Table::new("table4_mse", &["strategy", "t", "mse"]);
        for (label, source) in labels.iter().zip(sources).skip(1) {
            for t in 0..=scenario.horizon {
                let e = value_function_error(
                    source,
                    &reference,
                    mdp.state_bounds,
                    scenario.horizon,
                    Slice::At(t),
                )?;
                errors.push(vec![Cell::from(*label), t.into(), e.into()]);
            }
        }
        Ok(vec![table, values, errors])
    }

    fn fig_value_mse(&self) -> Result<Vec<Table>> {
        let base = self.scenario();
        let alphas = self
            .settings
            .alphas
            .clone()
            .unwrap_or_else(|| vec![10.0, 100.0, 1000.0]);
        let ns = self
            .settings
            .ns
            .clone()
            .unwrap_or_else(|| vec![10, 20, 50, 100, 200, 500, 1000]);
        let ms = self
            .settings
            .ms
            .clone()
            .unwrap_or_else(|| vec![4, 6, 8, 12, 16, 24, 32]);
        let mut by_n = Table::new("fig_value_mse_n", &["alpha", "n", "mse_fitted", "mse_grid"]);
        let mut by_m = Table::new("fig_value_mse_m", &["alpha", "m", "mse_fitted", "mse_grid"]);
        for &alpha in &alphas {
            let errors = |scenario: &Scenario| -> Result<(f64, f64)> {
                scenario.validate()?;
                let mdp = scenario.mdp()?;
                let reference = AnalyticJitValue::new(scenario.params(), scenario.horizon)?;
                let fitted = self.fitted(scenario, &mdp, Backend::Classical)?;
                let grid = value_iteration_grid(&mdp, scenario.n_samples, scenario.n_actions)?;
                let err = |v: &dyn ValueFunction| {
                    value_function_error(v, &reference, mdp.state_bounds, scenario.horizon, Slice::All)
                };
                Ok((err(&fitted)?, err(&grid)?))
            };
            for &n in &ns {
                let (f, g) = errors(&Scenario {
                    alpha,
                    n_samples: n,
                    ..base.clone()
                })?;
                by_n.push(vec![alpha.into(), n.into(), f.into(), g.into()]);
            }
            for &m in &ms {
                let (f, g) = errors(&Scenario {
                    alpha,
                    m,
                    ..base.clone()
                })?;
                by_m.push(vec![alpha.into(), m.into(), f.into(), g.into()]);
            }
        }
        Ok(vec![by_n, by_m])
    }

    fn fig_m_error(&self) -> Result<Table> {
        let base = self.scenario();
        let ds = self.settings.ds.clone().unwrap_or_else(|| vec![7, 9]);
        let ms = self.settings.ms.clone().unwrap_or_else(|| vec![3, 5, 7, 9, 11]);
        let mut table = Table::new("fig_m_error", &["d", "m", "solver", "mse_t0", "mse_all"]);
        for &d in &ds {
            for &m in &ms {
                let scenario = Scenario {
                    d,
                    p: d.saturating_sub(1),
                    m,
                    ..base.clone()
                };
                scenario.validate()?;
                let mdp = scenario.mdp()?;
                let reference = AnalyticJitValue::new(scenario.params(), scenario.horizon)?;
                let backends = [Backend::Classical, Backend::Tabu, self.annealer()];
                for (label, backend) in self.solver_labels().into_iter().zip(backends) {
                    let fitted = self.fitted(&scenario, &mdp, backend)?;
                    let err = |slice| {
                        value_function_error(&fitted, &reference, mdp.state_bounds, scenario.horizon, slice)
                    };
                    table.push(vec![
                        d.into(),
                        m.into(),
                        label.into(),
                        err(Slice::At(0))?.into(),
                        err(Slice::All)?.into(),
                    ]);
                }
            }
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            assert_eq!(serde_json::to_value(e).unwrap(), json!(e.name()));
        }
        assert!("table9".parse::<Experiment>().is_err());
    }

    #[test]
    fn scenario_defaults_and_validation() {
        let s = Scenario::from_json(r#"{"alpha": 10, "T": 3}"#).unwrap();
        assert_eq!((s.alpha, s.horizon, s.m), (10.0, 3, 9));
        assert!(Scenario::from_json(r#"{"unknown": 1}"#).is_err());
        assert!(Scenario::from_json(r#"{"m": 60}"#).is_err());
        assert!(Scenario::from_json(r#"{"d": 4, "p": 4}"#).is_err());
        assert!(Scenario::from_json(r#"{"x0": 101}"#).is_err());
    }

    #[test]
    fn unknown_override_is_rejected() {
        let spec = ExperimentSpec::new(Experiment::Table1, 1, "unused").with_override("bogus", json!(1));
        assert!(matches!(compute(&spec), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn table_csv_and_lookup() {
        let mut t = Table::new("t", &["name", "value"]);
        t.push(vec!["a".into(), 0.1.into()]);
        t.push(vec!["b".into(), Cell::Empty]);
        assert_eq!(t.to_csv(), "name,value\na,0.1\nb,\n");
        assert_eq!(t.find("name", "b"), Some(1));
        assert_eq!(t.value(0, "value"), Some(0.1));
        assert_eq!(t.value(1, "value"), None);
    }

    #[test]
    fn heatmap_single_cell() {
        let spec = ExperimentSpec::new(Experiment::QuboHeatmap, 3, "unused")
            .with_override("m", json!(2))
            .with_override("chebyshev_m", json!(1))
            .with_override("d", json!(1))
            .with_override("p", json!(0));
        let out = compute(&spec).unwrap();
        let sizes: Vec<usize> = out.tables.iter().map(|t| t.rows.len()).collect();
        assert_eq!(sizes, [3, 1]);
        assert_eq!(out.details["chebyshev"]["n"], json!(1));
    }
}
