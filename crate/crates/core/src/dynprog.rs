//! Finite-horizon deterministic dynamic programming: grid-based and fitted
//! value iteration, forward policy extraction, and the just-in-time-arrival
//! problem with its closed-form solution.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{uniform_knots, BasisSet};
use crate::data::minmax_normalize;
use crate::encoding::FixedPointFormat;
use crate::error::{Error, Result};
use crate::leastsq::{assemble, predict, Dataset, FitResult, Normalization};
use crate::solvers::{solve_fit, Backend, SolverParams};

pub type StepFn = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;
pub type TerminalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Points of the dense grid used by [`value_function_error`].
pub const ERROR_GRID_POINTS: usize = 1000;

// admissible overshoot of a successor past the state bounds
const BOUNDS_SLACK: f64 = 1e-9;

#[derive(Clone)]
pub struct MdpSpec {
    pub horizon: usize,
    pub state_bounds: (f64, f64),
    pub action_bounds: (f64, f64),
    /// `C_t(x, u)`
    pub cost: StepFn,
    /// `F_t(x, u)`
    pub transition: StepFn,
    /// `D(x_T)`
    pub terminal: TerminalFn,
}

impl fmt::Debug for MdpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MdpSpec")
            .field("horizon", &self.horizon)
            .field("state_bounds", &self.state_bounds)
            .field("action_bounds", &self.action_bounds)
            .finish_non_exhaustive()
    }
}

impl MdpSpec {
    pub fn new(
        horizon: usize,
        state_bounds: (f64, f64),
        action_bounds: (f64, f64),
        cost: StepFn,
        transition: StepFn,
        terminal: TerminalFn,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        for (name, (lo, hi)) in [("state", state_bounds), ("action", action_bounds)] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "empty {name} bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(MdpSpec {
            horizon,
            state_bounds,
            action_bounds,
            cost,
            transition,
            terminal,
        })
    }

    fn clamp_state(&self, x: f64) -> f64 {
        x.clamp(self.state_bounds.0, self.state_bounds.1)
    }

    fn in_bounds(&self, x: f64) -> bool {
        x >= self.state_bounds.0 - BOUNDS_SLACK && x <= self.state_bounds.1 + BOUNDS_SLACK
    }
}

/// Equidistant grid including both ends; a single point sits at `lo`.
pub fn equidistant(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("grid needs at least one point".into()));
    }
    if n == 1 || lo == hi {
        return Ok(vec![lo; n]);
    }
    uniform_knots(lo, hi, n)
}

/// Projected current `w(x)` along the trajectory.
#[derive(Clone, Default)]
pub enum Current {
    #[default]
    Still,
    Field(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Current {
    pub fn at(&self, x: f64) -> f64 {
        match self {
            Current::Still => 0.0,
            Current::Field(w) => w(x),
        }
    }
}

impl fmt::Debug for Current {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Current::Still => f.write_str("Still"),
            Current::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JitParams {
    /// Trajectory length `ℓ`.
    pub ell: f64,
    pub v_max: f64,
    /// Terminal-cost weight `α`.
    pub alpha: f64,
    pub current: Current,
}

impl JitParams {
    pub fn still_water(ell: f64, v_max: f64, alpha: f64) -> Self {
        JitParams {
            ell,
            v_max,
            alpha,
            current: Current::Still,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.ell > 0.0 && self.v_max > 0.0 && self.alpha > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "ell, v_max and alpha must be positive (got {}, {}, {})",
                self.ell, self.v_max, self.alpha
            )))
        }
    }
}

/// Running cost `((u − w(x))/v_max)²`, transition `x + u − w(x)`, terminal
/// cost `α(1 − x/ℓ)² + 1`, states in `[0, ℓ]`, actions in `[0, v_max]`.
pub fn make_jit_mdp(p: &JitParams, horizon: usize) -> Result<MdpSpec> {
    p.validate()?;
    let (v_max, ell, alpha) = (p.v_max, p.ell, p.alpha);
    let w_cost = p.current.clone();
    let w_next = p.current.clone();
    MdpSpec::new(
        horizon,
        (0.0, ell),
        (0.0, v_max),
        Arc::new(move |_, x, u| ((u - w_cost.at(x)) / v_max).powi(2)),
        Arc::new(move |_, x, u| x + u - w_next.at(x)),
        Arc::new(move |x| alpha * (1.0 - x / ell).powi(2) + 1.0),
    )
}

/// Anything that assigns a cost-to-go to `(t, x)`.
pub trait ValueFunction {
    fn value(&self, t: usize, x: f64) -> f64;
}

/// Optimal values on an equidistant state grid, one row per `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    states: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn values(&self, t: usize) -> &[f64] {
        &self.values[t]
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// Nearest grid index; exact midpoints go to the lower state.
    pub fn snap_index(&self, x: f64) -> usize {
        let n = self.states.len();
        let (lo, hi) = (self.states[0], self.states[n - 1]);
        if n == 1 || x <= lo {
            return 0;
        }
        if x >= hi {
            return n - 1;
        }
        let pos = (x - lo) / (hi - lo) * (n - 1) as f64;
        let base = (pos.floor() as usize).min(n - 2);
        let (a, b) = (self.states[base], self.states[base + 1]);
        if x - a > b - x {
            base + 1
        } else {
            base
        }
    }

    pub fn snapped(&self, t: usize, x: f64) -> f64 {
        self.values[t][self.snap_index(x)]
    }
}

/// Linear interpolation between grid states.
impl ValueFunction for ValueTable {
    fn value(&self, t: usize, x: f64) -> f64 {
        let n = self.states.len();
        let row = &self.values[t];
        if n == 1 || x <= self.states[0] {
            return row[0];
        }
        if x >= self.states[n - 1] {
            return row[n - 1];
        }
        let i = self.states.partition_point(|&s| s <= x) - 1;
        let w = (x - self.states[i]) / (self.states[i + 1] - self.states[i]);
        (1.0 - w) * row[i] + w * row[i + 1]
    }
}

fn best_action(actions: &[f64], mut score: impl FnMut(f64) -> Option<f64>) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &u in actions {
        if let Some(q) = score(u) {
            if best.is_none_or(|(_, bq)| q < bq) {
                best = Some((u, q));
            }
        }
    }
    best
}

/// Backward value iteration on equidistant state and action grids.
///
/// Successors are clamped to the state bounds and snapped to the nearest
/// grid state.
pub fn value_iteration_grid(mdp: &MdpSpec, n_states: usize, n_actions: usize) -> Result<ValueTable> {
    if n_states < 2 || n_actions < 2 {
        return Err(Error::InvalidArgument(
            "grid value iteration needs at least 2 states and 2 actions".into(),
        ));
    }
    let states = equidistant(mdp.state_bounds.0, mdp.state_bounds.1, n_states)?;
    let actions = equidistant(mdp.action_bounds.0, mdp.action_bounds.1, n_actions)?;
    let horizon = mdp.horizon;
    let mut table = ValueTable {
        values: vec![Vec::new(); horizon + 1],
        states,
    };
    table.values[horizon] = table.states.iter().map(|&x| (mdp.terminal)(x)).collect();
    for t in (0..horizon).rev() {
        let row: Vec<f64> = table
            .states
            .par_iter()
            .map(|&x| {
                best_action(&actions, |u| {
                    let next = mdp.clamp_state((mdp.transition)(t, x, u));
                    Some((mdp.cost)(t, x, u) + table.snapped(t + 1, next))
                })
                .map(|(_, q)| q)
                .expect("action grid is nonempty")
            })
            .collect();
        table.values[t] = row;
    }
    Ok(table)
}

/// How the final slice enters the backward recursion and policy extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalMode {
    /// `V̂_T` is fitted like every other slice and used as such.
    Fitted,
    /// `V̂_T` is still fitted and stored, but backups into `T` use the exact
    /// terminal cost.
    #[default]
    Exact,
}

/// One fitted value function per time step `t = 0..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedValue {
    pub fits: Vec<FitResult>,
    pub terminal: TerminalMode,
}

impl FittedValue {
    pub fn horizon(&self) -> usize {
        self.fits.len() - 1
    }

    /// Successor value used by backups and policy extraction.
    fn backup_value(&self, mdp: &MdpSpec, t: usize, x: f64) -> f64 {
        if t == mdp.horizon && self.terminal == TerminalMode::Exact {
            (mdp.terminal)(x)
        } else {
            predict(&self.fits[t], x)
        }
    }
}

impl ValueFunction for FittedValue {
    fn value(&self, t: usize, x: f64) -> f64 {
        predict(&self.fits[t], x)
    }
}

#[derive(Debug, Clone)]
pub struct FittedConfig {
    pub basis: BasisSet,
    pub fmt: FixedPointFormat,
    pub backend: Backend,
    pub params: SolverParams,
    pub n_samples: usize,
    pub n_actions: usize,
    pub terminal: TerminalMode,
}

/// Constant fit: zero coefficients under a degenerate normalization record.
fn constant_fit(basis: &BasisSet, value: f64) -> FitResult {
    FitResult {
        coefficients: vec![0.0; basis.len()],
        basis: basis.clone(),
        norm: Some(Normalization {
            y_min: value,
            y_max: value,
        }),
    }
}

fn fit_slice(
    states: &[f64],
    targets: Vec<f64>,
    cfg: &FittedConfig,
    params: &SolverParams,
) -> Result<FitResult> {
    let raw = Dataset::new(states.to_vec(), targets)?;
    let normalized = match minmax_normalize(&raw) {
        Ok(d) => d,
        Err(Error::DegenerateRange(v)) => return Ok(constant_fit(&cfg.basis, v)),
        Err(e) => return Err(e),
    };
    let sys = assemble(&normalized, &cfg.basis);
    solve_fit(&sys, cfg.fmt, &cfg.backend, params)
}

/// Fitted value iteration over equidistant sample states.
///
/// Targets at each step are min-max normalized before fitting; the stored
/// fits carry the record and denormalize on evaluation.
pub fn fitted_value_iteration(mdp: &MdpSpec, cfg: &FittedConfig) -> Result<FittedValue> {
    if cfg.n_samples < cfg.basis.len() {
        return Err(Error::InvalidArgument(format!(
            "need at least m = {} sample states, got {}",
            cfg.basis.len(),
            cfg.n_samples
        )));
    }
    if cfg.n_actions == 0 {
        return Err(Error::InvalidArgument("action grid is empty".into()));
    }
    let states = equidistant(mdp.state_bounds.0, mdp.state_bounds.1, cfg.n_samples)?;
    let actions = equidistant(mdp.action_bounds.0, mdp.action_bounds.1, cfg.n_actions)?;
    let horizon = mdp.horizon;
    let slice_params = |t: usize| SolverParams {
        seed: crate::solvers::restart_seed(cfg.params.seed, t as u64),
        ..cfg.params.clone()
    };

    let terminal_targets = states.iter().map(|&x| (mdp.terminal)(x)).collect();
    let mut reversed = vec![fit_slice(&states, terminal_targets, cfg, &slice_params(horizon))?];
    for t in (0..horizon).rev() {
        let next_fit = reversed.last().expect("terminal slice fitted");
        let exact_next = t + 1 == horizon && cfg.terminal == TerminalMode::Exact;
        let targets: Vec<f64> = states
            .par_iter()
            .map(|&x| {
                best_action(&actions, |u| {
                    let next = mdp.clamp_state((mdp.transition)(t, x, u));
                    let future = if exact_next {
                        (mdp.terminal)(next)
                    } else {
                        predict(next_fit, next)
                    };
                    Some((mdp.cost)(t, x, u) + future)
                })
                .map(|(_, q)| q)
                .expect("action grid is nonempty")
            })
            .collect();
        reversed.push(fit_slice(&states, targets, cfg, &slice_params(t))?);
    }
    reversed.reverse();
    Ok(FittedValue {
        fits: reversed,
        terminal: cfg.terminal,
    })
}

/// Value source for [`extract_policy`].
#[derive(Debug, Clone, Copy)]
pub enum ValueSource<'a> {
    /// Successors are snapped to the nearest grid state.
    Grid(&'a ValueTable),
    /// Successors are evaluated exactly.
    Fitted(&'a FittedValue),
}

impl ValueSource<'_> {
    fn successor_value(&self, mdp: &MdpSpec, t: usize, x: f64) -> f64 {
        match self {
            ValueSource::Grid(table) => table.snapped(t, x),
            ValueSource::Fitted(fitted) => fitted.backup_value(mdp, t, x),
        }
    }

    fn horizon(&self) -> usize {
        match self {
            ValueSource::Grid(table) => table.horizon(),
            ValueSource::Fitted(fitted) => fitted.horizon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub actions: Vec<f64>,
    pub states: Vec<f64>,
    pub total_cost: f64,
}

impl Policy {
    /// Roll `actions` forward from `x0`, accumulating running and terminal cost.
    pub fn rollout(mdp: &MdpSpec, x0: f64, actions: Vec<f64>) -> Self {
        let mut states = vec![x0];
        let mut total = 0.0;
        for (t, &u) in actions.iter().enumerate() {
            let x = states[t];
            total += (mdp.cost)(t, x, u);
            states.push((mdp.transition)(t, x, u));
        }
        total += (mdp.terminal)(states[actions.len()]);
        Policy {
            actions,
            states,
            total_cost: total,
        }
    }
}

/// Forward argmin over the equidistant action grid.
///
/// Actions whose successor leaves the state bounds are skipped while any
/// in-bounds action exists; ties go to the smallest action.
pub fn extract_policy(mdp: &MdpSpec, value: ValueSource<'_>, x0: f64, n_actions: usize) -> Result<Policy> {
    if !mdp.in_bounds(x0) {
        return Err(Error::InvalidArgument(format!(
            "initial state {x0} outside [{}, {}]",
            mdp.state_bounds.0, mdp.state_bounds.1
        )));
    }
    if value.horizon() != mdp.horizon {
        return Err(Error::DimensionMismatch {
            expected: mdp.horizon,
            got: value.horizon(),
        });
    }
    let actions = equidistant(mdp.action_bounds.0, mdp.action_bounds.1, n_actions)?;
    let mut chosen = Vec::with_capacity(mdp.horizon);
    let mut x = x0;
    for t in 0..mdp.horizon {
        let score = |u: f64, require_in_bounds: bool| {
            let next = (mdp.transition)(t, x, u);
            if require_in_bounds && !mdp.in_bounds(next) {
                return None;
            }
            Some((mdp.cost)(t, x, u) + value.successor_value(mdp, t + 1, mdp.clamp_state(next)))
        };
        let (u, _) = best_action(&actions, |u| score(u, true))
            .or_else(|| best_action(&actions, |u| score(u, false)))
            .expect("action grid is nonempty");
        chosen.push(u);
        x = (mdp.transition)(t, x, u);
    }
    Ok(Policy::rollout(mdp, x0, chosen))
}

fn require_still_water(p: &JitParams) -> Result<()> {
    p.validate()?;
    match p.current {
        Current::Still => Ok(()),
        Current::Field(_) => Err(Error::InvalidArgument(
            "closed-form solution requires still water".into(),
        )),
    }
}

/// Optimal constant action with `k` steps left from `x`, clipped to
/// `[0, v_max]`: `u* = α v_max² (ℓ − x) / (ℓ² + α k v_max²)`.
fn jit_constant_action(p: &JitParams, steps: usize, x: f64) -> f64 {
    let v2 = p.v_max * p.v_max;
    let u = p.alpha * v2 * (p.ell - x) / (p.ell * p.ell + p.alpha * steps as f64 * v2);
    u.clamp(0.0, p.v_max)
}

/// Closed-form optimal policy of the still-water problem.
pub fn analytic_jit_policy(p: &JitParams, horizon: usize, x0: f64) -> Result<Policy> {
    require_still_water(p)?;
    let mdp = make_jit_mdp(p, horizon)?;
    let u = jit_constant_action(p, horizon, x0);
    Ok(Policy::rollout(&mdp, x0, vec![u; horizon]))
}

/// Closed-form optimal cost-to-go of the still-water problem.
#[derive(Debug, Clone)]
pub struct AnalyticJitValue {
    params: JitParams,
    horizon: usize,
}

impl AnalyticJitValue {
    pub fn new(params: JitParams, horizon: usize) -> Result<Self> {
        require_still_water(&params)?;
        Ok(AnalyticJitValue { params, horizon })
    }
}

impl ValueFunction for AnalyticJitValue {
    fn value(&self, t: usize, x: f64) -> f64 {
        let p = &self.params;
        let steps = self.horizon - t;
        let u = jit_constant_action(p, steps, x);
        let end = x + steps as f64 * u;
        steps as f64 * (u / p.v_max).powi(2) + p.alpha * (1.0 - end / p.ell).powi(2) + 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slice {
    At(usize),
    All,
}

/// Mean squared error of `fitted` against `reference` on a dense
/// equidistant grid over `bounds`; [`Slice::All`] averages over `t = 0..=T`.
pub fn value_function_error(
    fitted: &dyn ValueFunction,
    reference: &dyn ValueFunction,
    bounds: (f64, f64),
    horizon: usize,
    slice: Slice,
) -> Result<f64> {
    let grid = equidistant(bounds.0, bounds.1, ERROR_GRID_POINTS)?;
    let slice_mse = |t: usize| {
        grid.iter()
            .map(|&x| (fitted.value(t, x) - reference.value(t, x)).powi(2))
            .sum::<f64>()
            / grid.len() as f64
    };
    match slice {
        Slice::At(t) if t <= horizon => Ok(slice_mse(t)),
        Slice::At(t) => Err(Error::IndexOutOfRange {
            index: t,
            len: horizon + 1,
        }),
        Slice::All => Ok((0..=horizon).map(slice_mse).sum::<f64>() / (horizon + 1) as f64),
    }
}
