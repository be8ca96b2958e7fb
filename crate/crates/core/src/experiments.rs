//! Quantitative experiments: fill-time tails, mixing profiles, Green-function
//! identities, the divisible sandpile and exploratory probes. Every Monte
//! Carlo routine takes a master seed; trial `i` draws from the lanes of index
//! `i`, so results do not depend on the number of workers.

use std::collections::BTreeMap;

use faer::Mat;
use rand::{Rng, RngExt};
use serde::Serialize;
use thiserror::Error;

use crate::chains::{build_ball, BaseChain, ChainError, VertexId};
use crate::config::{Configuration, SiteState};
use crate::engine::{execute, stabilize, verify_abelian, EngineError, FiringPolicy};
use crate::linalg::{self, LinalgError};
use crate::par_map;
use crate::process::{
    exact_sample, run_idla, CoupledProcess, DrivingSpec, FillTarget, ProcessError, TraceSeeds,
};
use crate::rates::{Rate, SleepRates};
use crate::seeds::{self, Lane};
use crate::stats::{self, clopper_pearson, tv_radius, EmpiricalLaw};
use crate::tape::InstructionTape;

/// Constant of the one-dimensional fill-time tail bound.
pub const C1: f64 = 1.0 / 41.0;
/// Constant of the fill-time tail bound in dimension two and higher.
pub const C2: f64 = 1.0 / 5.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ExperimentError> {
    Err(ExperimentError::Invalid(msg.into()))
}

/// Tail estimate `P(T_full > threshold)` with an exact 99% interval.
#[derive(Clone, Debug, Serialize)]
pub struct TailEstimate {
    pub chain: String,
    pub driving: String,
    pub num_vertices: usize,
    pub exponent: f64,
    pub coefficient: f64,
    pub threshold: f64,
    pub trials: u64,
    pub exceedances: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Smallest fill time observed (`None` if no trial filled).
    pub min_t_full: Option<u64>,
}

/// Fill times of `trials` independent IDLA runs, capped at `t_max`.
pub fn fill_times(
    chain: &BaseChain,
    driving: &DrivingSpec,
    target: FillTarget,
    t_max: u64,
    trials: u64,
    seed: u64,
) -> Result<Vec<Option<u64>>, ExperimentError> {
    let runs = par_map(trials, |i| run_idla(chain, driving, t_max, TraceSeeds::derive(seed, i), target));
    let mut out = Vec::with_capacity(trials as usize);
    for r in runs {
        let r = r?;
        if let Some(t) = r.t_full {
            // one particle per step can fill at most one new site
            assert!(target != FillTarget::All || t >= chain.num_vertices() as u64, "fill before #V steps");
        }
        out.push(r.t_full);
    }
    Ok(out)
}

/// Estimates `P(T_full > N + coefficient N^exponent)` with `N = #V`.
pub fn fill_tail(
    chain: &BaseChain,
    driving: &DrivingSpec,
    exponent: f64,
    coefficient: f64,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate, ExperimentError> {
    if trials == 0 {
        return invalid("fill_tail needs at least one trial");
    }
    let n = chain.num_vertices() as f64;
    let threshold = n + coefficient * n.powf(exponent);
    // only the event {T_full > threshold} matters, so stop one step past it
    let t_max = threshold.floor() as u64 + 1;
    let times = fill_times(chain, driving, FillTarget::All, t_max, trials, seed)?;
    let exceedances = times.iter().filter(|t| t.is_none_or(|t| t as f64 > threshold)).count() as u64;
    let (ci_low, ci_high) = clopper_pearson(exceedances, trials, 0.99);
    Ok(TailEstimate {
        chain: chain.label().to_string(),
        driving: driving.to_string(),
        num_vertices: chain.num_vertices(),
        exponent,
        coefficient,
        threshold,
        trials,
        exceedances,
        estimate: exceedances as f64 / trials as f64,
        ci_low,
        ci_high,
        seed,
        min_t_full: times.iter().flatten().min().copied(),
    })
}

/// The tail bound `exp(-c_1 r^{alpha - 1/2})` for `d = 1` and
/// `exp(-c_2 r^{1/4})` for `d >= 2`.
pub fn fill_tail_bound(d: usize, r: f64, alpha: f64) -> f64 {
    if d == 1 {
        (-C1 * r.powf(alpha - 0.5)).exp()
    } else {
        (-C2 * r.powf(0.25)).exp()
    }
}

/// Exponent `max(1/2, 1 - 1/d)` of the fill-time lower bound.
pub fn lower_bound_exponent(d: usize) -> f64 {
    0.5f64.max(1.0 - 1.0 / d as f64)
}

/// The same tail at the lower-bound exponent `beta` with coefficient `b`.
pub fn fill_lower_bound_probe(
    chain: &BaseChain,
    driving: &DrivingSpec,
    beta: f64,
    b: f64,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate, ExperimentError> {
    fill_tail(chain, driving, beta, b, trials, seed)
}

/// Median of `T_full / N` over `trials` runs (unfilled runs count as infinite).
pub fn median_fill_ratio(chain: &BaseChain, driving: &DrivingSpec, trials: u64, seed: u64) -> Result<f64, ExperimentError> {
    let n = chain.num_vertices() as f64;
    let t_max = (20.0 * n * n.ln().max(1.0)) as u64;
    let times = fill_times(chain, driving, FillTarget::All, t_max, trials, seed)?;
    let ratios: Vec<f64> = times.iter().map(|t| t.map_or(f64::INFINITY, |t| t as f64 / n)).collect();
    Ok(stats::quantile(&ratios, 0.5))
}

/// Distribution of `T'_full / (#V ln #V)` on the wired tree, where `T'_full`
/// is the first time every neighbour of the sink is occupied.
#[derive(Clone, Debug, Serialize)]
pub struct TreeFill {
    pub depth: u32,
    pub num_vertices: usize,
    pub trials: u64,
    pub ratios: Vec<f64>,
    pub p05: f64,
    pub median: f64,
    pub p95: f64,
    pub min_t: u64,
}

pub fn wired_tree_fill(chain: &BaseChain, driving: &DrivingSpec, trials: u64, seed: u64) -> Result<TreeFill, ExperimentError> {
    if chain.marked().is_empty() {
        return invalid("chain has no marked vertices");
    }
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let n = chain.num_vertices() as f64;
    let scale = n * n.ln().max(f64::MIN_POSITIVE);
    let t_max = (200.0 * scale).ceil() as u64 + 10;
    let times = fill_times(chain, driving, FillTarget::Marked, t_max, trials, seed)?;
    let mut ratios: Vec<f64> = times.iter().map(|t| t.map_or(f64::INFINITY, |t| t as f64 / scale)).collect();
    ratios.sort_by(f64::total_cmp);
    Ok(TreeFill {
        depth: (chain.marked().len() as f64).log2() as u32,
        num_vertices: chain.num_vertices(),
        trials,
        p05: stats::quantile_sorted(&ratios, 0.05),
        median: stats::quantile_sorted(&ratios, 0.5),
        p95: stats::quantile_sorted(&ratios, 0.95),
        min_t: times.iter().map(|t| t.unwrap_or(u64::MAX)).min().unwrap_or(0),
        ratios,
    })
}

/// `ceil(N ln N + N ln(1/eps))`.
pub fn coupon_bound(n: u64, eps: f64) -> Result<u64, ExperimentError> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("epsilon must be in (0, 1), got {eps}"));
    }
    let n = n as f64;
    Ok((n * n.ln() + n * (1.0 / eps).ln()).ceil() as u64)
}

/// `ceil(N + sqrt(d) N^{1 - 1/(3d)})` with `N = n^d`.
pub fn torus_mixing_budget(d: usize, n: u64) -> u64 {
    let big_n = (n as f64).powi(d as i32);
    (big_n + (d as f64).sqrt() * big_n.powf(1.0 - 1.0 / (3.0 * d as f64))).ceil() as u64
}

/// State statistic used for mixing estimates: the full sleep mask on small
/// chains, the number of sleeping particles when the chain is too large.
pub const MAX_EXACT_STATE_VERTICES: usize = 12;

fn state_key(c: &Configuration, projected: bool) -> u64 {
    if projected {
        c.sleeping_particles()
    } else {
        c.sleep_mask()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingRow {
    pub initial: String,
    pub t: u64,
    pub tv: f64,
    pub radius: f64,
    /// Fraction of this initial state's traces with `T_full > t`.
    pub tail: f64,
    pub tail_ci_high: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingProfile {
    pub samples: u64,
    /// Distances are between laws of the sleeping-particle count rather than
    /// full configurations.
    pub projected: bool,
    pub rows: Vec<MixingRow>,
}

/// For every initial state and every `t` in the grid, the distance between
/// the empirical law of `sigma_t` and that of exact samples, next to the
/// empirical `P(T_full > t)` from the same traces.
pub fn mixing_profile(
    chain: &BaseChain,
    rates: &SleepRates,
    driving: &DrivingSpec,
    initial: &[Configuration],
    t_grid: &[u64],
    samples: u64,
    seed: u64,
) -> Result<MixingProfile, ExperimentError> {
    if samples == 0 || t_grid.is_empty() || initial.is_empty() {
        return invalid("mixing profile needs samples, a time grid and initial states");
    }
    let projected = chain.num_vertices() > MAX_EXACT_STATE_VERTICES;
    let mut grid = t_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let horizon = *grid.last().unwrap();

    let reference: EmpiricalLaw = par_map(samples, |i| {
        exact_sample(chain, rates, seeds::derive(seed, i, Lane::Stationary)).map(|c| state_key(&c, projected))
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (j, sigma0) in initial.iter().enumerate() {
        let master = seeds::derive(seed, j as u64, Lane::Auxiliary);
        let traces = par_map(samples, |i| -> Result<Vec<(u64, bool)>, ProcessError> {
            let seeds = TraceSeeds::derive(master, i);
            let mut driver = driving.driver(chain, seeds.driving)?;
            let mut p = CoupledProcess::new(chain, rates, sigma0.clone(), seeds.instructions)?;
            let mut out = Vec::with_capacity(grid.len());
            let mut next = grid.iter().peekable();
            while let Some(&&t) = next.peek() {
                if p.t() == t {
                    out.push((state_key(p.sigma(), projected), p.t_full().is_some()));
                    next.next();
                } else {
                    p.step(driver.next().expect("infinite driving"))?;
                }
            }
            debug_assert_eq!(p.t(), horizon);
            Ok(out)
        });
        let traces: Vec<Vec<(u64, bool)>> = traces.into_iter().collect::<Result<_, _>>()?;
        for (k, &t) in grid.iter().enumerate() {
            let law: EmpiricalLaw = traces.iter().map(|tr| tr[k].0).collect();
            let unfilled = traces.iter().filter(|tr| !tr[k].1).count() as u64;
            rows.push(MixingRow {
                initial: sigma0.to_string(),
                t,
                tv: law.tv(&reference),
                radius: tv_radius(&law, &reference, 0.99),
                tail: unfilled as f64 / samples as f64,
                tail_ci_high: clopper_pearson(unfilled, samples, 0.99).1,
            });
        }
    }
    Ok(MixingProfile { samples, projected, rows })
}

/// All `2^#V` sleeping configurations on tiny chains; otherwise the empty
/// and all-sleeping extremes plus `extra` random sleeping states.
pub fn initial_sweep(n: usize, extra: usize, seed: u64) -> Vec<Configuration> {
    if n <= 6 {
        return (0..1u64 << n).map(|m| Configuration::from_sleep_mask(n, m)).collect();
    }
    let mut out = vec![Configuration::empty(n), Configuration::all_sleeping(n)];
    let mut rng = seeds::rng(seed);
    for _ in 0..extra {
        out.push(Configuration::from_sites(
            (0..n).map(|_| if rng.random_bool(0.5) { SiteState::Sleeping } else { SiteState::Empty }).collect(),
        ));
    }
    out
}

/// Green function, hitting probabilities and exit times of a chain.
pub struct HarmonicTable {
    /// `green[(y, z)]`: expected visits to `z` before absorption, from `y`.
    pub green: Mat<f64>,
    /// `hitting[(y, z)] = P_y(tau_z < tau_sink)`, with value 1 at `y = z`,
    /// from `G(z,z) P_y(tau_z < tau_sink) = G(y,z)`.
    pub hitting: Mat<f64>,
    /// `E_z tau_sink`, from a separate solve.
    pub exit_times: Vec<f64>,
    /// Largest residual of the two solves.
    pub residual: f64,
}

pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

pub fn harmonic_table(chain: &BaseChain) -> Result<HarmonicTable, ExperimentError> {
    let (green, r1) = linalg::green_matrix(chain)?;
    let (exit_times, r2) = linalg::absorption_times(chain)?;
    let residual = r1.max(r2);
    if residual > RESIDUAL_TOLERANCE {
        return invalid(format!("linear solve residual {residual:e} exceeds {RESIDUAL_TOLERANCE:e}"));
    }
    let n = chain.num_vertices();
    let hitting = Mat::from_fn(n, n, |y, z| green[(y, z)] / green[(z, z)]);
    Ok(HarmonicTable { green, hitting, exit_times, residual })
}

impl HarmonicTable {
    pub fn len(&self) -> usize {
        self.exit_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit_times.is_empty()
    }

    /// `max |G(y,z) - G(z,y)|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for y in 0..n {
            for z in 0..y {
                worst = worst.max((self.green[(y, z)] - self.green[(z, y)]).abs());
            }
        }
        worst
    }

    /// `sum_y G(y, z)`.
    pub fn column_sum(&self, z: usize) -> f64 {
        (0..self.len()).map(|y| self.green[(y, z)]).sum()
    }

    /// `sum_y P_y(tau_z < tau_sink)`.
    pub fn hitting_sum(&self, z: usize) -> f64 {
        (0..self.len()).map(|y| self.hitting[(y, z)]).sum()
    }
}

/// Monte Carlo frequency of `{tau_z < tau_sink}` for walks started at `y`.
pub fn simulate_hitting(chain: &BaseChain, y: VertexId, z: VertexId, walks: u64, seed: u64) -> Result<u64, ExperimentError> {
    let hits = par_map(walks, |i| {
        let mut rng = seeds::rng(seeds::derive(seed, i, Lane::Auxiliary));
        let mut v = y;
        while v != z {
            v = chain.step_target(v, rng.random::<f64>());
            if v.is_sink() {
                return false;
            }
        }
        true
    });
    Ok(hits.into_iter().filter(|&h| h).count() as u64)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExitSumRow {
    pub d: usize,
    pub r: f64,
    pub num_vertices: usize,
    /// `min_z [sum_y P_y(tau_z < tau_r)] ln r / r`.
    pub min_hitting_ratio: f64,
    /// `max_z G(z,z) / ln r`.
    pub max_green_ratio: f64,
    /// `E_0 tau_r` at the center.
    pub center_exit_time: f64,
}

pub fn exit_sum_check(d: usize, radii: &[f64]) -> Result<Vec<ExitSumRow>, ExperimentError> {
    radii
        .iter()
        .map(|&r| {
            let chain = build_ball(d, r)?;
            let table = harmonic_table(&chain)?;
            let n = table.len();
            let ln_r = r.ln();
            let min_hit = (0..n).map(|z| table.hitting_sum(z)).fold(f64::INFINITY, f64::min);
            let max_green = (0..n).map(|z| table.green[(z, z)]).fold(0.0, f64::max);
            let center = chain.center().expect("balls have a center");
            Ok(ExitSumRow {
                d,
                r,
                num_vertices: n,
                min_hitting_ratio: min_hit * ln_r / r,
                max_green_ratio: max_green / ln_r,
                center_exit_time: table.exit_times[center.index()],
            })
        })
        .collect()
}

/// Divisible sandpile relaxation on a box.
#[derive(Clone, Debug, Serialize)]
pub struct SandpileRelaxation {
    pub half_width: i32,
    pub initial_mass: f64,
    pub sweeps: u64,
    pub converged: bool,
    /// Mass toppled in the last sweep.
    pub last_change: f64,
    pub mass_in_box: f64,
    pub mass_lost: f64,
    pub min_odometer: f64,
    /// Final mass per box site, row-major over `[-w, w]^d`.
    pub mass: Vec<f64>,
}

pub const SANDPILE_TOLERANCE: f64 = 1e-12;

/// Parallel (Jacobi) toppling of `mass0 delta_0` on `[-w, w]^d`: every site
/// with mass above 1 keeps 1 and splits the excess equally among its `2d`
/// neighbours; mass pushed off the box is counted as lost.
pub fn relax_divisible_sandpile(d: usize, half_width: i32, mass0: f64, max_sweeps: u64) -> SandpileRelaxation {
    let side = (2 * half_width + 1) as usize;
    let size = side.pow(d as u32);
    let strides: Vec<usize> = (0..d).map(|k| side.pow((d - 1 - k) as u32)).collect();
    let mut mass = vec![0.0; size];
    let mut odometer = vec![0.0; size];
    let origin: usize = strides.iter().map(|s| s * half_width as usize).sum();
    mass[origin] = mass0;
    let mut lost = 0.0;
    let mut sweeps = 0;
    let mut last_change = f64::INFINITY;
    let share = 1.0 / (2 * d) as f64;
    let mut incoming = vec![0.0; size];
    while sweeps < max_sweeps {
        sweeps += 1;
        incoming.iter_mut().for_each(|x| *x = 0.0);
        let mut change = 0.0;
        for i in 0..size {
            let excess = mass[i] - 1.0;
            if excess <= 0.0 {
                continue;
            }
            change += excess;
            mass[i] = 1.0;
            odometer[i] += excess;
            let part = excess * share;
            for &s in &strides {
                let coord = (i / s) % side;
                if coord > 0 {
                    incoming[i - s] += part;
                } else {
                    lost += part;
                }
                if coord + 1 < side {
                    incoming[i + s] += part;
                } else {
                    lost += part;
                }
            }
        }
        for (m, x) in mass.iter_mut().zip(&incoming) {
            *m += x;
        }
        last_change = change;
        if change < SANDPILE_TOLERANCE {
            break;
        }
    }
    SandpileRelaxation {
        half_width,
        initial_mass: mass0,
        sweeps,
        converged: last_change < SANDPILE_TOLERANCE,
        last_change,
        mass_in_box: mass.iter().sum(),
        mass_lost: lost,
        min_odometer: odometer.iter().copied().fold(f64::INFINITY, f64::min),
        mass,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SandpileReport {
    pub d: usize,
    pub r: f64,
    pub num_vertices: usize,
    pub alpha: f64,
    /// `N + N^alpha / 2`.
    pub budget: f64,
    pub relaxation: SandpileRelaxation,
    /// Every site of the ball ends with mass 1 (to 1e-9).
    pub fills_ball: bool,
    /// `kappa(z) = sum_y G(y,z) / G(0,z)`, maximised over the ball.
    pub max_kappa: f64,
    pub argmax_kappa: Vec<i32>,
    pub kappa_center: f64,
    pub inequality_holds: bool,
}

/// Relaxes `mass0 delta_0` (default `N + N^alpha / 2`) and checks
/// `budget G(0,z) >= sum_y G(y,z)` for every `z` in the ball.
pub fn divisible_sandpile_check(d: usize, r: f64, alpha: f64, mass0: Option<f64>) -> Result<SandpileReport, ExperimentError> {
    let chain = build_ball(d, r)?;
    let n = chain.num_vertices();
    let budget = n as f64 + 0.5 * (n as f64).powf(alpha);
    let w = r.ceil() as i32 + 4;
    let relaxation = relax_divisible_sandpile(d, w, mass0.unwrap_or(budget), 10_000_000);
    let side = (2 * w + 1) as usize;
    let fills_ball = chain.vertices().all(|v| {
        let idx = chain.coords(v).unwrap().iter().fold(0usize, |acc, &c| acc * side + (c + w) as usize);
        relaxation.mass[idx] >= 1.0 - 1e-9
    });
    let table = harmonic_table(&chain)?;
    let o = chain.center().expect("balls have a center").index();
    let mut max_kappa = f64::NEG_INFINITY;
    let mut arg = 0;
    for z in 0..n {
        let k = table.column_sum(z) / table.green[(o, z)];
        if k > max_kappa {
            max_kappa = k;
            arg = z;
        }
    }
    Ok(SandpileReport {
        d,
        r,
        num_vertices: n,
        alpha,
        budget,
        fills_ball,
        max_kappa,
        argmax_kappa: chain.coords(VertexId(arg as u32)).unwrap().to_vec(),
        kappa_center: table.column_sum(o) / table.green[(o, o)],
        inequality_holds: max_kappa <= budget,
        relaxation,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityRow {
    pub r: f64,
    pub num_vertices: usize,
    pub trials: u64,
    pub mean: f64,
    pub stderr: f64,
}

/// Fraction of particles left by `S[1_{B_r}]`, for each radius.
pub fn density_probe(d: usize, radii: &[f64], rate: Rate, trials: u64, seed: u64) -> Result<Vec<DensityRow>, ExperimentError> {
    radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let chain = build_ball(d, r)?;
            let n = chain.num_vertices();
            let rates = SleepRates::constant(n, rate);
            let master = seeds::derive(seed, k as u64, Lane::Auxiliary);
            let densities: Vec<f64> = par_map(trials, |i| {
                exact_sample(&chain, &rates, seeds::derive(master, i, Lane::Stationary))
                    .map(|c| c.total_particles() as f64 / n as f64)
            })
            .into_iter()
            .collect::<Result<_, _>>()?;
            let (mean, stderr) = stats::mean_stderr(&densities);
            Ok(DensityRow { r, num_vertices: n, trials, mean, stderr })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceRow {
    pub length: u32,
    pub trials: u64,
    pub mean: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HyperuniformityReport {
    pub rows: Vec<VarianceRow>,
    /// Least-squares slope of ln(variance) against ln(L), with its standard error.
    pub slope: f64,
    pub slope_stderr: f64,
}

/// Variance of the number of particles left by `S[1_V]` on the path
/// `{0, ..., L}` with sink `L`, with 95% bootstrap intervals.
pub fn hyperuniformity_probe(lengths: &[u32], rate: Rate, trials: u64, seed: u64) -> Result<HyperuniformityReport, ExperimentError> {
    if trials < 2 {
        return invalid("variance needs at least two trials");
    }
    let mut rows = Vec::new();
    for (k, &len) in lengths.iter().enumerate() {
        let chain = crate::chains::build_path(len)?;
        let rates = SleepRates::constant(chain.num_vertices(), rate);
        let master = seeds::derive(seed, k as u64, Lane::Auxiliary);
        let counts: Vec<f64> = par_map(trials, |i| {
            exact_sample(&chain, &rates, seeds::derive(master, i, Lane::Stationary)).map(|c| c.total_particles() as f64)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
        let variance = stats::sample_variance(&counts);
        let (ci_low, ci_high) =
            stats::bootstrap_ci(&counts, stats::sample_variance, 1000, seeds::derive(master, 0, Lane::Auxiliary), 0.95);
        rows.push(VarianceRow { length: len, trials, mean: stats::mean_stderr(&counts).0, variance, ci_low, ci_high });
    }
    let usable: Vec<&VarianceRow> = rows.iter().filter(|r| r.variance > 0.0).collect();
    let (slope, slope_stderr) = if usable.len() >= 2 {
        let x: Vec<f64> = usable.iter().map(|r| (r.length as f64).ln()).collect();
        let y: Vec<f64> = usable.iter().map(|r| r.variance.ln()).collect();
        stats::ols_slope(&x, &y)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(HyperuniformityReport { rows, slope, slope_stderr })
}

/// A random small instance: a chain on at most `max_vertices` vertices with
/// random integer weights, random rates from {0, 0.3, 1, 3, inf} and a random
/// configuration with at most `2 #V` particles.
pub fn random_instance(max_vertices: usize, seed: u64) -> (BaseChain, SleepRates, Configuration) {
    let mut rng = seeds::rng(seed);
    let n = rng.random_range(1..=max_vertices);
    let chain = random_chain(n, &mut rng);
    let choices = [0.0, 0.3, 1.0, 3.0, f64::INFINITY];
    let rates = SleepRates::new((0..n).map(|_| Rate::new(choices[rng.random_range(0..choices.len())]).unwrap()).collect());
    let particles = rng.random_range(0..=2 * n);
    let mut sites = vec![SiteState::Empty; n];
    for _ in 0..particles {
        let v = rng.random_range(0..n);
        sites[v] = sites[v] + if rng.random_bool(0.2) { SiteState::Sleeping } else { SiteState::active(1) };
    }
    (chain, rates, Configuration::from_sites(sites))
}

/// Random chain on `n` vertices in which vertex 0 reaches the sink directly
/// and every other vertex has an edge to a lower-indexed one.
pub fn random_chain(n: usize, rng: &mut impl Rng) -> BaseChain {
    let rows: Vec<Vec<(VertexId, u32)>> = (0..n)
        .map(|v| {
            let mut row = vec![(if v == 0 { VertexId::SINK } else { VertexId(rng.random_range(0..v) as u32) }, rng.random_range(1..=3))];
            for _ in 0..rng.random_range(0..3) {
                let t = rng.random_range(0..=n);
                row.push((if t == n { VertexId::SINK } else { VertexId(t as u32) }, rng.random_range(1..=3)));
            }
            row
        })
        .collect();
    let dens = rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect();
    BaseChain::from_rows(format!("random:n={n}"), rows, dens).expect("random chains reach the sink")
}

#[derive(Clone, Debug, Serialize)]
pub struct AbelianSummary {
    pub trials: u64,
    pub matches: u64,
    /// Indices of instances where the two policies disagreed.
    pub failures: Vec<u64>,
}

/// Runs two distinct firing policies on the same tape for `trials` random
/// instances and counts exact agreements of configuration and odometer.
pub fn abelian_suite(trials: u64, max_vertices: usize, seed: u64) -> Result<AbelianSummary, ExperimentError> {
    let results = par_map(trials, |i| -> Result<bool, EngineError> {
        let (chain, rates, config) = random_instance(max_vertices, seeds::derive(seed, i, Lane::Initial));
        let mut rng = seeds::rng(seeds::derive(seed, i, Lane::Auxiliary));
        let a = rng.random_range(0..FiringPolicy::ALL.len());
        let b = (a + rng.random_range(1..FiringPolicy::ALL.len())) % FiringPolicy::ALL.len();
        let tape = InstructionTape::new(&chain, &rates, seeds::derive(seed, i, Lane::Instructions));
        verify_abelian(&config, &tape, FiringPolicy::ALL[a], FiringPolicy::ALL[b])
    });
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        if !r? {
            failures.push(i as u64);
        }
    }
    Ok(AbelianSummary { trials, matches: trials - failures.len() as u64, failures })
}

/// Odometer of a random truncation of a legal execution is pointwise below
/// the complete odometer; returns the number of instances where it holds.
pub fn monotonicity_suite(trials: u64, max_vertices: usize, seed: u64) -> Result<u64, ExperimentError> {
    let results = par_map(trials, |i| -> Result<bool, EngineError> {
        let (chain, rates, config) = random_instance(max_vertices, seeds::derive(seed, i, Lane::Initial));
        let tape = InstructionTape::new(&chain, &rates, seeds::derive(seed, i, Lane::Instructions));
        let complete = stabilize(&config, &mut tape.rewound(), FiringPolicy::LowestIndex)?;
        let total = complete.odometer.total();
        let mut rng = seeds::rng(seeds::derive(seed, i, Lane::Auxiliary));
        let cut = if total == 0 { 0 } else { rng.random_range(0..=total) };
        let policy = FiringPolicy::ALL[rng.random_range(0..FiringPolicy::ALL.len())];
        let mut partial = config.clone();
        let mut t = tape.rewound();
        execute(&mut partial, &mut t, policy, cut);
        Ok(t.consumed().le(&complete.odometer))
    });
    results.into_iter().try_fold(0, |acc, r| Ok(acc + r? as u64))
}

/// Counts of sleep masks as an ordered map, for reports.
pub fn law_table(law: &EmpiricalLaw, n: usize) -> BTreeMap<String, u64> {
    law.counts().iter().map(|(&m, &c)| (Configuration::from_sleep_mask(n, m).to_string(), c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::build_interval;

    #[test]
    fn coupon_bound_examples() {
        assert_eq!(coupon_bound(100, 0.01).unwrap(), 922);
        assert_eq!(coupon_bound(1, 0.5).unwrap(), 1);
        assert!(coupon_bound(10, 0.0).is_err() && coupon_bound(10, 1.0).is_err());
        let mut last = u64::MAX;
        for k in 1..100 {
            let b = coupon_bound(50, k as f64 / 100.0).unwrap();
            assert!(b <= last);
            last = b;
        }
    }

    #[test]
    fn torus_budgets() {
        // 100 + sqrt(2) * 100^(5/6) = 165.64...
        assert_eq!(torus_mixing_budget(2, 10), 166);
        // N = 100 in d = 1: 100 + 100^(2/3) = 121.54...
        assert_eq!(torus_mixing_budget(1, 100), 122);
        let mut last = 0;
        for n in 2..60 {
            let b = torus_mixing_budget(2, n);
            assert!(b > last);
            last = b;
        }
    }

    #[test]
    fn tail_bounds() {
        assert!((fill_tail_bound(1, 200.0, 0.75) - (-(200f64.powf(0.25)) / 41.0).exp()).abs() < 1e-15);
        assert!((fill_tail_bound(2, 30.0, 5.0 / 6.0) - (-(30f64.powf(0.25)) / 5.0).exp()).abs() < 1e-15);
        assert_eq!(lower_bound_exponent(1), 0.5);
        assert!((lower_bound_exponent(3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_below_volume_always_exceeded() {
        let chain = build_interval(10).unwrap();
        let est = fill_tail(&chain, &DrivingSpec::Uniform, 0.5, -2.0, 50, 1).unwrap();
        assert!(est.threshold < 19.0);
        assert_eq!(est.exceedances, 50);
        assert!(fill_tail(&chain, &DrivingSpec::Uniform, 0.5, 1.0, 0, 1).is_err());
    }

    #[test]
    fn interval_harmonics() {
        let chain = build_interval(2).unwrap();
        let t = harmonic_table(&chain).unwrap();
        assert!((t.green[(1, 1)] - 2.0).abs() < 1e-12);
        assert!((t.hitting_sum(1) - 2.0).abs() < 1e-12);
        // E_0 tau_r = r^2 in one dimension
        for r in [2u32, 5, 9] {
            let c = build_interval(r).unwrap();
            let (times, _) = linalg::absorption_times(&c).unwrap();
            assert!((times[c.center().unwrap().index()] - (r * r) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn sandpile_conserves_mass() {
        let rep = relax_divisible_sandpile(2, 8, 60.0, 1_000_000);
        assert!(rep.converged);
        assert!((rep.mass_in_box + rep.mass_lost - 60.0).abs() < 1e-9);
        assert!(rep.min_odometer >= 0.0);
        assert!(rep.mass.iter().all(|&m| m <= 1.0 + 1e-12));
        let small = divisible_sandpile_check(2, 3.0, 5.0 / 6.0, None).unwrap();
        let chain = build_ball(2, 3.0).unwrap();
        let t = harmonic_table(&chain).unwrap();
        let o = chain.center().unwrap().index();
        assert!((small.kappa_center - t.exit_times[o] / t.green[(o, o)]).abs() < 1e-9);
        assert!(small.relaxation.converged, "{:?}", (small.relaxation.sweeps, small.relaxation.last_change, small.fills_ball));
    }

    #[test]
    fn probes_with_extreme_rates() {
        let rows = density_probe(1, &[2.0, 4.0], Rate::INFINITE, 5, 1).unwrap();
        assert!(rows.iter().all(|r| r.mean == 1.0));
        let rows = density_probe(1, &[2.0, 4.0], Rate::ZERO, 5, 1).unwrap();
        assert!(rows.iter().all(|r| r.mean == 0.0));
        let rep = hyperuniformity_probe(&[4, 8], Rate::INFINITE, 10, 1).unwrap();
        assert!(rep.rows.iter().all(|r| r.variance == 0.0));
    }

    #[test]
    fn small_suites_pass() {
        let s = abelian_suite(100, 8, 3).unwrap();
        assert_eq!(s.matches, 100, "failures: {:?}", s.failures);
        assert_eq!(monotonicity_suite(100, 8, 4).unwrap(), 100);
    }
}
