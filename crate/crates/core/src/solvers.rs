//! Minimizers of `ψᵀQψ` over binary vectors.
//!
//! Heuristic solvers run independent restarts, possibly on several threads.
//! Each restart draws from its own generator seeded by
//! [`restart_seed`]`(seed, index)`, and the restart results are merged in
//! index order, so the outcome does not depend on the thread count.

use std::cmp::Ordering;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{build_qubo, FixedPointFormat, QuboProblem};
use crate::error::{Error, Result};
use crate::leastsq::{solve_classical, FitResult, NormalSystem};

/// Largest dimension accepted by [`brute_force`].
pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Allowed deviation between a reported and a recomputed energy.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub samples_evaluated: u64,
    pub solver: String,
    pub seed: u64,
}

/// Geometric cooling from `t_start` down to `t_end` over the sweeps of a
/// restart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t_start: f64,
    pub t_end: f64,
}

impl AnnealSchedule {
    /// Scale-aware default: `T_start = max|Q|`, `T_end = 1e−3·T_start`.
    pub fn for_problem(q: &QuboProblem) -> Self {
        let t_start = match q.max_abs() {
            m if m > 0.0 => m,
            _ => 1.0,
        };
        AnnealSchedule {
            t_start,
            t_end: 1e-3 * t_start,
        }
    }

    /// Per-sweep multiplicative decay for `sweeps` sweeps.
    pub fn ratio(&self, sweeps: usize) -> f64 {
        if sweeps <= 1 {
            1.0
        } else {
            (self.t_end / self.t_start).powf(1.0 / (sweeps - 1) as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub seed: u64,
    pub restarts: usize,
    pub iterations_per_restart: usize,
    /// Tabu only; defaults to [`default_tenure`].
    pub tabu_tenure: Option<usize>,
    /// Annealing only; defaults to [`AnnealSchedule::for_problem`].
    pub schedule: Option<AnnealSchedule>,
}

impl SolverParams {
    pub fn tabu(seed: u64) -> Self {
        SolverParams {
            seed,
            restarts: 200,
            iterations_per_restart: 2000,
            tabu_tenure: None,
            schedule: None,
        }
    }

    pub fn annealing(seed: u64) -> Self {
        SolverParams {
            seed,
            restarts: 100,
            iterations_per_restart: 2000,
            tabu_tenure: None,
            schedule: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.iterations_per_restart == 0 {
            return Err(Error::InvalidArgument(
                "restarts and iterations must be at least 1".into(),
            ));
        }
        if self.tabu_tenure == Some(0) {
            return Err(Error::InvalidArgument("tabu tenure must be at least 1".into()));
        }
        if let Some(s) = self.schedule {
            if !(s.t_start >= s.t_end && s.t_end > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "temperature schedule needs T_start >= T_end > 0, got {} -> {}",
                    s.t_start, s.t_end
                )));
            }
        }
        Ok(())
    }
}

/// Seed of restart `index` under master seed `seed` (SplitMix64 mixing).
pub fn restart_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(seed) ^ index)
}

/// Lower energy wins; near-equal energies go to the lexicographically
/// smaller bit string.
fn better(a_energy: f64, a_bits: &[u8], b_energy: f64, b_bits: &[u8]) -> bool {
    let tol = 1e-12 * a_energy.abs().max(b_energy.abs()).max(1.0);
    if (a_energy - b_energy).abs() <= tol {
        a_bits.cmp(b_bits) == Ordering::Less
    } else {
        a_energy < b_energy
    }
}

/// Incremental single-flip bookkeeping over the symmetric part of `Q`.
struct FlipState<'a> {
    n: usize,
    sym: &'a [f64],
    bits: Vec<u8>,
    // Σ_{j≠i} S_ij x_j
    field: Vec<f64>,
    energy: f64,
}

impl<'a> FlipState<'a> {
    fn new(n: usize, sym: &'a [f64], bits: Vec<u8>) -> Self {
        let mut field = vec![0.0; n];
        let mut energy = 0.0;
        for i in 0..n {
            let row = &sym[i * n..(i + 1) * n];
            field[i] = (0..n).filter(|&j| j != i && bits[j] != 0).map(|j| row[j]).sum();
            if bits[i] != 0 {
                energy += row[i] + field[i];
            }
        }
        FlipState {
            n,
            sym,
            bits,
            field,
            energy,
        }
    }

    #[inline]
    fn delta(&self, i: usize) -> f64 {
        let d = self.sym[i * self.n + i] + 2.0 * self.field[i];
        if self.bits[i] == 0 {
            d
        } else {
            -d
        }
    }

    fn flip(&mut self, i: usize, delta: f64) {
        let step = if self.bits[i] == 0 { 1.0 } else { -1.0 };
        self.bits[i] ^= 1;
        self.energy += delta;
        let row = &self.sym[i * self.n..(i + 1) * self.n];
        for (j, f) in self.field.iter_mut().enumerate() {
            if j != i {
                *f += step * row[j];
            }
        }
    }
}

/// Exhaustive minimization for `N ≤ 24`.
pub fn brute_force(q: &QuboProblem) -> Result<SolveResult> {
    let n = q.dim();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_LIMIT,
        });
    }
    let sym = q.symmetric_part();
    // high bits fixed per chunk, Gray-code walk over the low bits
    let high = n.min(6);
    let low = n - high;
    let chunks: Vec<(f64, Vec<u8>)> = (0u64..1 << high)
        .into_par_iter()
        .map(|prefix| {
            let mut bits = vec![0u8; n];
            for h in 0..high {
                bits[low + h] = ((prefix >> h) & 1) as u8;
            }
            let mut state = FlipState::new(n, &sym, bits);
            let mut best = (state.energy, state.bits.clone());
            for step in 1u64..1 << low {
                let i = step.trailing_zeros() as usize;
                let delta = state.delta(i);
                state.flip(i, delta);
                if better(state.energy, &state.bits, best.0, &best.1) {
                    best = (state.energy, state.bits.clone());
                }
            }
            best
        })
        .collect();
    let (_, bits) = merge(chunks);
    Ok(SolveResult {
        energy: q.energy(&bits),
        bits,
        samples_evaluated: 1u64 << n,
        solver: "brute".into(),
        seed: 0,
    })
}

fn merge(results: Vec<(f64, Vec<u8>)>) -> (f64, Vec<u8>) {
    results
        .into_iter()
        .reduce(|best, cand| {
            if better(cand.0, &cand.1, best.0, &best.1) {
                cand
            } else {
                best
            }
        })
        .expect("at least one restart")
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Multi-restart single-flip Metropolis annealing with geometric cooling.
pub fn simulated_annealing(q: &QuboProblem, params: &SolverParams) -> Result<SolveResult> {
    params.validate()?;
    let n = q.dim();
    let sym = q.symmetric_part();
    let schedule = params.schedule.unwrap_or_else(|| AnnealSchedule::for_problem(q));
    let sweeps = params.iterations_per_restart;
    let ratio = schedule.ratio(sweeps);

    let results: Vec<(f64, Vec<u8>)> = (0..params.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(params.seed, r));
            let init = random_bits(&mut rng, n);
            let mut state = FlipState::new(n, &sym, init);
            let mut best = (state.energy, state.bits.clone());
            let mut temp = schedule.t_start;
            for _ in 0..sweeps {
                for i in 0..n {
                    let delta = state.delta(i);
                    if delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp() {
                        state.flip(i, delta);
                        if state.energy < best.0 {
                            best = (state.energy, state.bits.clone());
                        }
                    }
                }
                temp *= ratio;
            }
            (q.energy(&best.1), best.1)
        })
        .collect();
    let (energy, bits) = merge(results);
    Ok(SolveResult {
        bits,
        energy,
        samples_evaluated: (params.restarts * sweeps * n) as u64,
        solver: "anneal".into(),
        seed: params.seed,
    })
}

/// Default tenure `max(7, N/2)`, capped so that at least one move stays
/// admissible. Each flip adds a random extra of up to half the tenure.
pub fn default_tenure(n: usize) -> usize {
    (n / 2).max(7).min(n.saturating_sub(1)).max(1)
}

/// Restarts per round of [`tabu_search`]. Fixed so that results do not
/// depend on the number of worker threads.
pub const TABU_ROUND: usize = 8;

fn tabu_run(
    state: &mut FlipState<'_>,
    rng: &mut ChaCha8Rng,
    iterations: usize,
    tenure: usize,
) -> (f64, Vec<u8>) {
    let n = state.n;
    let mut best = (state.energy, state.bits.clone());
    if n == 0 {
        return best;
    }
    let mut tabu_until = vec![0usize; n];
    for it in 0..iterations {
        let aspiration = best.0 - 1e-12 * best.0.abs().max(1.0);
        let mut chosen: Option<(usize, f64)> = None;
        let mut fallback: Option<(usize, f64)> = None;
        for i in 0..n {
            let delta = state.delta(i);
            if fallback.is_none_or(|(_, d)| delta < d) {
                fallback = Some((i, delta));
            }
            let admissible = tabu_until[i] <= it || state.energy + delta < aspiration;
            if admissible && chosen.is_none_or(|(_, d)| delta < d) {
                chosen = Some((i, delta));
            }
        }
        let (i, delta) = chosen.or(fallback).expect("n > 0");
        state.flip(i, delta);
        tabu_until[i] = it + 1 + tenure + rng.random_range(0..=tenure / 2);
        if state.energy < best.0 {
            best = (state.energy, state.bits.clone());
        }
    }
    best
}

/// Multi-start one-flip tabu search with aspiration.
///
/// Restarts run in rounds of [`TABU_ROUND`]. The first round starts from
/// uniformly random bit vectors; later rounds start from the best solution
/// so far with a random subset of bits flipped, which lets the search cross
/// the carry barriers of the fixed-point encoding.
pub fn tabu_search(q: &QuboProblem, params: &SolverParams) -> Result<SolveResult> {
    params.validate()?;
    let n = q.dim();
    let sym = q.symmetric_part();
    let tenure = params.tabu_tenure.unwrap_or_else(|| default_tenure(n));
    let iterations = params.iterations_per_restart;

    let mut elite: Option<(f64, Vec<u8>)> = None;
    let mut next = 0;
    while next < params.restarts {
        let round: Vec<u64> = (next..params.restarts.min(next + TABU_ROUND))
            .map(|r| r as u64)
            .collect();
        let results: Vec<(f64, Vec<u8>)> = round
            .par_iter()
            .map(|&r| {
                let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(params.seed, r));
                let init = match &elite {
                    None => random_bits(&mut rng, n),
                    Some((_, bits)) => perturb(&mut rng, bits),
                };
                let mut state = FlipState::new(n, &sym, init);
                let best = tabu_run(&mut state, &mut rng, iterations, tenure);
                (q.energy(&best.1), best.1)
            })
            .collect();
        let merged = merge(elite.into_iter().chain(results).collect());
        elite = Some(merged);
        next += round.len();
    }
    let (energy, bits) = elite.expect("at least one restart");
    Ok(SolveResult {
        bits,
        energy,
        samples_evaluated: (params.restarts * iterations * n) as u64,
        solver: "tabu".into(),
        seed: params.seed,
    })
}

/// Copy of `bits` with between one and `max(1, N/3)` random positions flipped.
fn perturb(rng: &mut ChaCha8Rng, bits: &[u8]) -> Vec<u8> {
    let n = bits.len();
    let mut out = bits.to_vec();
    if n == 0 {
        return out;
    }
    let count = rng.random_range(1..=(n / 3).max(1));
    for _ in 0..count {
        let i = rng.random_range(0..n);
        out[i] ^= 1;
    }
    out
}

/// External program invoked as `program args... <qubo.json>`; it must print
/// a JSON array of `{"bits": [...], "energy": e}` on standard output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSampler {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct ExternalSample {
    bits: Vec<u8>,
    energy: f64,
}

pub fn external_sample(q: &QuboProblem, sampler: &ExternalSampler) -> Result<SolveResult> {
    let mut request = tempfile::Builder::new()
        .prefix("qubo-")
        .suffix(".json")
        .tempfile()
        .map_err(|e| Error::ExternalFailure(format!("cannot create request file: {e}")))?;
    serde_json::to_writer(&mut request, &q.to_json())?;
    request
        .flush()
        .map_err(|e| Error::ExternalFailure(format!("cannot write request file: {e}")))?;

    let output = Command::new(&sampler.program)
        .args(&sampler.args)
        .arg(request.path())
        .output()
        .map_err(|e| Error::ExternalFailure(format!("cannot run {}: {e}", sampler.program.display())))?;
    if !output.status.success() {
        return Err(Error::ExternalFailure(format!(
            "{} exited with {}: {}",
            sampler.program.display(),
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let samples: Vec<ExternalSample> = serde_json::from_slice(&output.stdout)
        .map_err(|e| Error::ExternalFailure(format!("malformed sampler reply: {e}")))?;
    if samples.is_empty() {
        return Err(Error::ExternalFailure("sampler returned no samples".into()));
    }

    let n = q.dim();
    let mut verified = Vec::with_capacity(samples.len());
    for sample in samples {
        if sample.bits.len() != n || sample.bits.iter().any(|&b| b > 1) {
            return Err(Error::ExternalFailure(format!(
                "sample must be {n} binary values, got {:?}",
                sample.bits
            )));
        }
        let energy = q.energy(&sample.bits);
        if (energy - sample.energy).abs() > ENERGY_TOLERANCE * energy.abs().max(1.0) {
            return Err(Error::EnergyMismatch {
                reported: sample.energy,
                recomputed: energy,
            });
        }
        verified.push((energy, sample.bits));
    }
    let count = verified.len() as u64;
    let (energy, bits) = merge(verified);
    Ok(SolveResult {
        bits,
        energy,
        samples_evaluated: count,
        solver: "external".into(),
        seed: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Classical,
    #[serde(rename = "brute")]
    BruteForce,
    Tabu,
    #[serde(rename = "anneal")]
    Annealing,
    External(ExternalSampler),
}

impl Backend {
    pub fn label(&self) -> &'static str {
        match self {
            Backend::Classical => "classical",
            Backend::BruteForce => "brute",
            Backend::Tabu => "tabu",
            Backend::Annealing => "anneal",
            Backend::External(_) => "external",
        }
    }

    /// Backend by CLI name; `external` needs a sampler.
    pub fn parse(name: &str, sampler: Option<ExternalSampler>) -> Result<Self> {
        match name {
            "classical" => Ok(Backend::Classical),
            "brute" => Ok(Backend::BruteForce),
            "tabu" => Ok(Backend::Tabu),
            "anneal" => Ok(Backend::Annealing),
            "external" => sampler
                .map(Backend::External)
                .ok_or_else(|| Error::InvalidArgument("external backend needs a sampler command".into())),
            other => Err(Error::InvalidArgument(format!("unknown backend '{other}'"))),
        }
    }

    pub fn is_qubo(&self) -> bool {
        !matches!(self, Backend::Classical)
    }
}

/// Solve `q` with a QUBO backend. Classical is rejected here.
pub fn solve_qubo(q: &QuboProblem, backend: &Backend, params: &SolverParams) -> Result<SolveResult> {
    match backend {
        Backend::Classical => Err(Error::InvalidArgument(
            "classical backend does not solve QUBOs".into(),
        )),
        Backend::BruteForce => brute_force(q),
        Backend::Tabu => tabu_search(q, params),
        Backend::Annealing => simulated_annealing(q, params),
        Backend::External(sampler) => external_sample(q, sampler),
    }
}

/// Fit coefficients with `backend`, returning the QUBO solve when one ran.
pub fn solve_fit_detailed(
    sys: &NormalSystem,
    fmt: FixedPointFormat,
    backend: &Backend,
    params: &SolverParams,
) -> Result<(FitResult, Option<SolveResult>)> {
    if !backend.is_qubo() {
        return Ok((solve_classical(sys)?, None));
    }
    let q = build_qubo(sys, fmt);
    let solved = solve_qubo(&q, backend, params)?;
    let fit = FitResult {
        coefficients: q.decode(&solved.bits)?,
        basis: sys.basis.clone(),
        norm: sys.norm,
    };
    Ok((fit, Some(solved)))
}

pub fn solve_fit(
    sys: &NormalSystem,
    fmt: FixedPointFormat,
    backend: &Backend,
    params: &SolverParams,
) -> Result<FitResult> {
    solve_fit_detailed(sys, fmt, backend, params).map(|(fit, _)| fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSet;
    use nalgebra::{DMatrix, DVector};

    fn diag(values: &[f64]) -> QuboProblem {
        let n = values.len();
        let mut q = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            q[i * n + i] = *v;
        }
        QuboProblem::from_dense(n, q).unwrap()
    }

    fn random_qubo(seed: u64, n: usize) -> QuboProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        QuboProblem::from_dense(n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    // plain enumeration in index order, independent of the Gray-code walk
    fn reference_minimum(q: &QuboProblem) -> (f64, Vec<u8>) {
        let n = q.dim();
        let mut best: Option<(f64, Vec<u8>)> = None;
        for code in 0u64..1 << n {
            let bits: Vec<u8> = (0..n).map(|i| ((code >> i) & 1) as u8).collect();
            let e = q.energy(&bits);
            if best.as_ref().is_none_or(|(be, _)| e < *be) {
                best = Some((e, bits));
            }
        }
        best.unwrap()
    }

    #[test]
    fn brute_force_trivial() {
        let r = brute_force(&diag(&[-1.0])).unwrap();
        assert_eq!((r.bits, r.energy), (vec![1], -1.0));
        let r = brute_force(&diag(&[1.0])).unwrap();
        assert_eq!((r.bits, r.energy), (vec![0], 0.0));
    }

    #[test]
    fn brute_force_matches_reference() {
        for seed in 0..3 {
            let q = random_qubo(seed, 12);
            let r = brute_force(&q).unwrap();
            let (e, bits) = reference_minimum(&q);
            assert_eq!(r.bits, bits);
            assert!((r.energy - e).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_tie_break_and_limit() {
        let r = brute_force(&QuboProblem::from_dense(4, vec![0.0; 16]).unwrap()).unwrap();
        assert_eq!(r.bits, vec![0; 4]);
        // two optima 10 and 01 with equal energy; 01 is smaller
        let q = QuboProblem::from_rows(&[vec![-1.0, 2.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(brute_force(&q).unwrap().bits, vec![0, 1]);
        let big = QuboProblem::from_dense(25, vec![0.0; 625]).unwrap();
        assert!(matches!(
            brute_force(&big),
            Err(Error::TooLarge { n: 25, max: 24 })
        ));
    }

    #[test]
    fn separable_problems() {
        let q = diag(&[-1.0, 2.0, -3.0]);
        let sa = simulated_annealing(&q, &SolverParams::annealing(1)).unwrap();
        assert_eq!((sa.bits.clone(), sa.energy), (vec![1, 0, 1], -4.0));
        let tabu = tabu_search(&q, &SolverParams::tabu(1)).unwrap();
        assert_eq!(tabu.energy, -4.0);

        let zero = QuboProblem::from_dense(5, vec![0.0; 25]).unwrap();
        assert_eq!(
            simulated_annealing(&zero, &SolverParams::annealing(2))
                .unwrap()
                .energy,
            0.0
        );
        assert_eq!(tabu_search(&zero, &SolverParams::tabu(2)).unwrap().energy, 0.0);
    }

    #[test]
    fn heuristics_find_random_optima() {
        let mut sa_hits = 0;
        let mut tabu_hits = 0;
        for seed in 0..20u64 {
            let q = random_qubo(100 + seed, 12);
            let exact = brute_force(&q).unwrap().energy;
            let sa = simulated_annealing(&q, &SolverParams::annealing(seed)).unwrap();
            let tabu = tabu_search(&q, &SolverParams::tabu(seed)).unwrap();
            assert!(sa.energy >= exact - 1e-9 && tabu.energy >= exact - 1e-9);
            sa_hits += usize::from((sa.energy - exact).abs() <= 1e-9);
            tabu_hits += usize::from((tabu.energy - exact).abs() <= 1e-9);
        }
        assert!(sa_hits >= 19, "annealing hit {sa_hits}/20");
        assert!(tabu_hits >= 19, "tabu hit {tabu_hits}/20");
    }

    #[test]
    fn deterministic_and_monotone_in_restarts() {
        let q = random_qubo(5, 30);
        let mut params = SolverParams::tabu(77);
        params.iterations_per_restart = 50;
        let a = tabu_search(&q, &params).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| tabu_search(&q, &params).unwrap());
        assert_eq!(a, b);

        let mut last = f64::INFINITY;
        for restarts in 1..=6 {
            params.restarts = restarts;
            let e = tabu_search(&q, &params).unwrap().energy;
            assert!(e <= last);
            last = e;
        }

        let mut anneal = SolverParams::annealing(3);
        anneal.restarts = 4;
        anneal.iterations_per_restart = 100;
        assert_eq!(
            simulated_annealing(&q, &anneal).unwrap(),
            simulated_annealing(&q, &anneal).unwrap()
        );
    }

    #[test]
    fn reported_energy_matches_bits() {
        let q = random_qubo(9, 20);
        for r in [
            tabu_search(&q, &SolverParams::tabu(4)).unwrap(),
            simulated_annealing(&q, &SolverParams::annealing(4)).unwrap(),
            brute_force(&q).unwrap(),
        ] {
            assert!((q.energy(&r.bits) - r.energy).abs() <= 1e-9 * r.energy.abs().max(1.0));
        }
    }

    #[test]
    fn params_validation() {
        let q = diag(&[1.0]);
        let mut p = SolverParams::tabu(0);
        p.restarts = 0;
        assert!(tabu_search(&q, &p).is_err());
        let mut p = SolverParams::annealing(0);
        p.schedule = Some(AnnealSchedule {
            t_start: 1.0,
            t_end: 2.0,
        });
        assert!(simulated_annealing(&q, &p).is_err());
        assert_eq!(default_tenure(100), 50);
        assert_eq!(default_tenure(12), 7);
        assert_eq!(default_tenure(3), 2);
    }

    #[test]
    fn restart_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| restart_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn brute_force_decodes_representable_identity_system() {
        let fmt = FixedPointFormat::new(4, 2).unwrap();
        let sys = NormalSystem::from_parts(
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[0.75, -1.25]),
            BasisSet::chebyshev(2).unwrap(),
        )
        .unwrap();
        let fit = solve_fit(&sys, fmt, &Backend::BruteForce, &SolverParams::tabu(0)).unwrap();
        assert_eq!(fit.coefficients, vec![0.75, -1.25]);
        let classical = solve_fit(&sys, fmt, &Backend::Classical, &SolverParams::tabu(0)).unwrap();
        assert_eq!(classical.coefficients, vec![0.75, -1.25]);
    }

    #[test]
    fn backend_names() {
        assert_eq!(Backend::parse("tabu", None).unwrap(), Backend::Tabu);
        assert!(Backend::parse("external", None).is_err());
        assert!(Backend::parse("quantum", None).is_err());
        assert!(solve_qubo(&diag(&[1.0]), &Backend::Classical, &SolverParams::tabu(0)).is_err());
    }
}
