//! Driving sequences, the ARW process `sigma_t = S[sigma_{t-1} + delta_{u_t}]`
//! run alongside its coupled IDLA state `eta_t`, the exact stationary sampler
//! and the recurrent class.
//!
//! The process uses one instruction tape with two cursors. The ARW cursor has
//! consumed `F_t` after step `t`; the IDLA cursor has consumed `G_t`, the
//! odometer of `S_inf[sigma_0 + phi_t]`. Resuming ARW stabilization of
//! `eta_t` on the tape forked at `G_t` reproduces `sigma_t` exactly.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::chains::{check_thorough, BaseChain, VertexId};
use crate::config::{ConfigError, Configuration, SiteState};
use crate::engine::{
    stabilize, stabilize_idla_in_place, stabilize_in_place, EngineError, FiringPolicy, DEFAULT_FIRING_CAP,
};
use crate::linalg::{self, LinalgError};
use crate::rates::{Rate, SleepRates};
use crate::seeds::{self, Lane};
use crate::stats::{tv_radius, EmpiricalLaw};
use crate::tape::{Instruction, InstructionTape, Odometer};

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("cannot parse driving sequence {0:?}")]
    DrivingSyntax(String),
    #[error("driving vertex {0} is outside the chain")]
    DrivingVertex(u32),
    #[error("driving sequence is empty")]
    EmptyDriving,
    #[error("chain {0:?} has no distinguished center; name the vertex explicitly")]
    NoCenter(String),
    #[error("permutation must list every vertex exactly once")]
    NotPermutation,
    #[error("initial configuration has {got} sites, the chain has {expected}")]
    Length { expected: usize, got: usize },
}

/// Where particles are added.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DrivingSpec {
    /// Always the same vertex; `None` means the chain's center.
    Central(Option<VertexId>),
    /// Independent uniform vertices of V.
    Uniform,
    /// A permutation of V, repeated; `None` draws one from the driving seed.
    Permutation(Option<Vec<VertexId>>),
    /// A finite list, repeated.
    Custom(Vec<VertexId>),
}

impl DrivingSpec {
    pub fn driver(&self, chain: &BaseChain, seed: u64) -> Result<Driver, ProcessError> {
        let n = chain.num_vertices();
        let check = |v: VertexId| if v.index() < n { Ok(v) } else { Err(ProcessError::DrivingVertex(v.0)) };
        let source = match self {
            DrivingSpec::Central(v) => {
                let v = match v {
                    Some(v) => *v,
                    None => chain.center().ok_or_else(|| ProcessError::NoCenter(chain.label().to_string()))?,
                };
                Source::Fixed(check(v)?)
            }
            DrivingSpec::Uniform => Source::Uniform { rng: seeds::rng(seed), n: n as u32 },
            DrivingSpec::Permutation(order) => {
                let order = match order {
                    Some(order) => {
                        let mut seen = vec![false; n];
                        for &v in order {
                            check(v)?;
                            if std::mem::replace(&mut seen[v.index()], true) {
                                return Err(ProcessError::NotPermutation);
                            }
                        }
                        if order.len() != n {
                            return Err(ProcessError::NotPermutation);
                        }
                        order.clone()
                    }
                    None => {
                        let mut order: Vec<VertexId> = chain.vertices().collect();
                        order.shuffle(&mut seeds::rng(seed));
                        order
                    }
                };
                Source::Cycle { seq: order, pos: 0 }
            }
            DrivingSpec::Custom(list) => {
                if list.is_empty() {
                    return Err(ProcessError::EmptyDriving);
                }
                for &v in list {
                    check(v)?;
                }
                Source::Cycle { seq: list.clone(), pos: 0 }
            }
        };
        Ok(Driver { source })
    }

    /// Vertices that recur infinitely often in the sequence.
    pub fn support(&self, chain: &BaseChain) -> Result<Vec<VertexId>, ProcessError> {
        Ok(match self {
            DrivingSpec::Central(Some(v)) => vec![*v],
            DrivingSpec::Central(None) => {
                vec![chain.center().ok_or_else(|| ProcessError::NoCenter(chain.label().to_string()))?]
            }
            DrivingSpec::Uniform | DrivingSpec::Permutation(_) => chain.vertices().collect(),
            DrivingSpec::Custom(list) => {
                let mut s = list.clone();
                s.sort();
                s.dedup();
                s
            }
        })
    }

    pub fn is_thorough(&self, chain: &BaseChain) -> bool {
        self.support(chain).map(|s| check_thorough(chain, &s)).unwrap_or(false)
    }
}

fn parse_list(text: &str) -> Result<Vec<VertexId>, ProcessError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u32>().map(VertexId).map_err(|_| ProcessError::DrivingSyntax(text.to_string())))
        .collect()
}

fn join(list: &[VertexId]) -> String {
    list.iter().map(|v| v.0.to_string()).collect::<Vec<_>>().join(",")
}

impl FromStr for DrivingSpec {
    type Err = ProcessError;

    /// `central`, `central:V`, `uniform`, `permutation`, `permutation:LIST`,
    /// `custom:LIST` with comma separated vertex indices.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        match (kind, arg) {
            ("central", None) => Ok(DrivingSpec::Central(None)),
            ("central", Some(v)) => {
                Ok(DrivingSpec::Central(Some(VertexId(v.parse().map_err(|_| ProcessError::DrivingSyntax(s.into()))?))))
            }
            ("uniform", None) => Ok(DrivingSpec::Uniform),
            ("permutation", None) => Ok(DrivingSpec::Permutation(None)),
            ("permutation", Some(list)) => Ok(DrivingSpec::Permutation(Some(parse_list(list)?))),
            ("custom", Some(list)) => Ok(DrivingSpec::Custom(parse_list(list)?)),
            _ => Err(ProcessError::DrivingSyntax(s.to_string())),
        }
    }
}

impl fmt::Display for DrivingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DrivingSpec::Central(None) => write!(f, "central"),
            DrivingSpec::Central(Some(v)) => write!(f, "central:{}", v.0),
            DrivingSpec::Uniform => write!(f, "uniform"),
            DrivingSpec::Permutation(None) => write!(f, "permutation"),
            DrivingSpec::Permutation(Some(order)) => write!(f, "permutation:{}", join(order)),
            DrivingSpec::Custom(list) => write!(f, "custom:{}", join(list)),
        }
    }
}

enum Source {
    Fixed(VertexId),
    Uniform { rng: ChaCha8Rng, n: u32 },
    Cycle { seq: Vec<VertexId>, pos: usize },
}

/// An infinite driving sequence `u_1, u_2, ...`.
pub struct Driver {
    source: Source,
}

impl Iterator for Driver {
    type Item = VertexId;

    #[inline]
    fn next(&mut self) -> Option<VertexId> {
        Some(match &mut self.source {
            Source::Fixed(v) => *v,
            Source::Uniform { rng, n } => VertexId(rng.random_range(0..*n)),
            Source::Cycle { seq, pos } => {
                let v = seq[*pos];
                *pos = (*pos + 1) % seq.len();
                v
            }
        })
    }
}

/// Independent seeds of one trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TraceSeeds {
    pub instructions: u64,
    pub driving: u64,
}

impl TraceSeeds {
    pub fn derive(master: u64, index: u64) -> Self {
        TraceSeeds {
            instructions: seeds::derive(master, index, Lane::Instructions),
            driving: seeds::derive(master, index, Lane::Driving),
        }
    }
}

/// One step of the process.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub t: u64,
    pub u: u32,
    /// Instructions used by the ARW stabilization, `|F_t - F_{t-1}|`.
    pub fired: u64,
    /// Instructions used by the IDLA stabilization, `|G_t - G_{t-1}|`.
    pub idla_fired: u64,
    pub absorbed: u64,
    pub full: bool,
}

/// ARW state and coupled IDLA state sharing one tape.
pub struct CoupledProcess<'a> {
    arw: InstructionTape<'a>,
    idla: InstructionTape<'a>,
    sigma: Configuration,
    eta: Configuration,
    t: u64,
    t_full: Option<u64>,
    policy: FiringPolicy,
}

impl<'a> CoupledProcess<'a> {
    pub fn new(
        chain: &'a BaseChain,
        rates: &'a SleepRates,
        sigma0: Configuration,
        seed: u64,
    ) -> Result<Self, ProcessError> {
        if sigma0.len() != chain.num_vertices() {
            return Err(ProcessError::Length { expected: chain.num_vertices(), got: sigma0.len() });
        }
        sigma0.require_sleeping()?;
        let arw = InstructionTape::new(chain, rates, seed);
        let idla = arw.clone();
        let full = sigma0.is_ones().then_some(0);
        Ok(CoupledProcess { arw, idla, eta: sigma0.clone(), sigma: sigma0, t: 0, t_full: full, policy: FiringPolicy::default() })
    }

    pub fn with_policy(mut self, policy: FiringPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Adds a particle at `u`, stabilizes both states.
    pub fn step(&mut self, u: VertexId) -> Result<StepRecord, ProcessError> {
        self.t += 1;
        self.sigma.add_particle(u);
        let before = self.arw.consumed().total();
        let stats = stabilize_in_place(&mut self.sigma, &mut self.arw, self.policy, DEFAULT_FIRING_CAP)?;
        let fired = self.arw.consumed().total() - before;

        self.eta.add_particle(u);
        let idla = stabilize_idla_in_place(&mut self.eta, &mut self.idla, DEFAULT_FIRING_CAP)?;
        if self.t_full.is_none() && self.eta.is_ones() {
            self.t_full = Some(self.t);
        }
        Ok(StepRecord {
            t: self.t,
            u: u.0,
            fired,
            idla_fired: idla.firings,
            absorbed: stats.absorbed,
            full: self.t_full.is_some(),
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn sigma(&self) -> &Configuration {
        &self.sigma
    }

    pub fn eta(&self) -> &Configuration {
        &self.eta
    }

    pub fn t_full(&self) -> Option<u64> {
        self.t_full
    }

    /// `F_t`.
    pub fn arw_odometer(&self) -> Odometer {
        self.arw.consumed()
    }

    /// `G_t`.
    pub fn idla_odometer(&self) -> Odometer {
        self.idla.consumed()
    }

    /// `S^{G_t}[eta_t]`: ARW stabilization of the IDLA state on the tape
    /// forked at the IDLA odometer. Equals `sigma_t`.
    pub fn resumed(&self) -> Result<(Configuration, Odometer), ProcessError> {
        let mut tape = self.arw.fork(&self.idla.consumed());
        let out = stabilize(&self.eta, &mut tape, self.policy)?;
        Ok((out.config, out.odometer))
    }
}

/// Recorded run of the process.
#[derive(Clone, Debug, Serialize)]
pub struct ProcessTrace {
    pub records: Vec<StepRecord>,
    /// `sigma_t` for `t = 0..=t_max` when snapshots were requested.
    pub snapshots: Vec<String>,
    #[serde(serialize_with = "as_string")]
    pub final_config: Configuration,
    pub t_full: Option<u64>,
}

fn as_string<S: serde::Serializer>(c: &Configuration, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(c)
}

/// Runs the single-tape ARW process for `t_max` steps with its IDLA coupling.
pub fn run_arw(
    chain: &BaseChain,
    rates: &SleepRates,
    driving: &DrivingSpec,
    sigma0: Configuration,
    t_max: u64,
    seeds: TraceSeeds,
    snapshots: bool,
) -> Result<ProcessTrace, ProcessError> {
    let mut driver = driving.driver(chain, seeds.driving)?;
    let mut process = CoupledProcess::new(chain, rates, sigma0, seeds.instructions)?;
    let mut trace = ProcessTrace { records: Vec::new(), snapshots: Vec::new(), final_config: Configuration::empty(0), t_full: None };
    if snapshots {
        trace.snapshots.push(process.sigma().to_string());
    }
    for u in driver.by_ref().take(t_max as usize) {
        trace.records.push(process.step(u)?);
        if snapshots {
            trace.snapshots.push(process.sigma().to_string());
        }
    }
    trace.t_full = process.t_full();
    trace.final_config = process.sigma;
    Ok(trace)
}

/// The process with fresh independent instructions at every step: step `t`
/// uses the tape seeded by `derive(seeds.instructions, t)`.
pub fn run_arw_fresh(
    chain: &BaseChain,
    rates: &SleepRates,
    driving: &DrivingSpec,
    sigma0: Configuration,
    t_max: u64,
    seeds: TraceSeeds,
) -> Result<Configuration, ProcessError> {
    sigma0.require_sleeping()?;
    let mut driver = driving.driver(chain, seeds.driving)?;
    let mut sigma = sigma0;
    for t in 1..=t_max {
        let u = driver.next().expect("driving sequences are infinite");
        sigma.add_particle(u);
        let mut tape = InstructionTape::new(chain, rates, seeds::derive(seeds.instructions, t, Lane::Instructions));
        stabilize_in_place(&mut sigma, &mut tape, FiringPolicy::default(), DEFAULT_FIRING_CAP)?;
    }
    Ok(sigma)
}

/// Which vertices must be occupied for the IDLA cluster to count as full.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FillTarget {
    All,
    /// The chain's marked vertices (for the wired tree, the neighbours of the sink).
    Marked,
}

/// Outcome of a pure IDLA run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IdlaRun {
    /// First time the target set is occupied, if within `t_max`.
    pub t_full: Option<u64>,
    pub steps: u64,
    pub absorbed: u64,
    pub walk_steps: u64,
}

/// Moves a particle started at `u` until it reaches an unoccupied vertex
/// (returned) or the sink (`None`). `occupied` is updated.
#[inline]
pub fn settle_particle(occupied: &mut [bool], tape: &mut InstructionTape<'_>, u: VertexId, steps: &mut u64) -> Option<VertexId> {
    let mut v = u;
    while occupied[v.index()] {
        if let Instruction::Step(w) = tape.next(v) {
            *steps += 1;
            if w.is_sink() {
                return None;
            }
            v = w;
        }
    }
    occupied[v.index()] = true;
    Some(v)
}

/// Pure IDLA from the empty configuration until the target set is occupied or
/// `t_max` particles have been added. Walks never sleep, so the tape is read
/// with rate zero everywhere; the cluster law is the same as for `S_inf`.
pub fn run_idla(
    chain: &BaseChain,
    driving: &DrivingSpec,
    t_max: u64,
    seeds: TraceSeeds,
    target: FillTarget,
) -> Result<IdlaRun, ProcessError> {
    let n = chain.num_vertices();
    let rates = SleepRates::constant(n, Rate::ZERO);
    let mut tape = InstructionTape::new(chain, &rates, seeds.instructions);
    let mut driver = driving.driver(chain, seeds.driving)?;
    let mut is_target = vec![target == FillTarget::All; n];
    if target == FillTarget::Marked {
        for v in chain.marked() {
            is_target[v.index()] = true;
        }
    }
    let mut remaining = is_target.iter().filter(|&&b| b).count();
    let mut occupied = vec![false; n];
    let mut run = IdlaRun { t_full: None, steps: 0, absorbed: 0, walk_steps: 0 };
    if remaining == 0 {
        run.t_full = Some(0);
        return Ok(run);
    }
    for t in 1..=t_max {
        let u = driver.next().expect("driving sequences are infinite");
        run.steps = t;
        match settle_particle(&mut occupied, &mut tape, u, &mut run.walk_steps) {
            Some(v) if is_target[v.index()] => {
                remaining -= 1;
                if remaining == 0 {
                    run.t_full = Some(t);
                    break;
                }
            }
            Some(_) => {}
            None => run.absorbed += 1,
        }
    }
    Ok(run)
}

/// `S[1_V]` on a fresh tape: a sample from the stationary distribution.
pub fn exact_sample(chain: &BaseChain, rates: &SleepRates, seed: u64) -> Result<Configuration, ProcessError> {
    let mut tape = InstructionTape::new(chain, rates, seed);
    Ok(stabilize(&Configuration::ones(chain.num_vertices()), &mut tape, FiringPolicy::default())?.config)
}

/// Sum over vertices of the expected time for a walk to reach the sink, a
/// planning estimate for the cost of [`exact_sample`].
pub fn sampling_cost(chain: &BaseChain) -> Result<f64, ProcessError> {
    Ok(linalg::absorption_times(chain)?.0.iter().sum())
}

/// Membership in the recurrent class: empty wherever the rate is zero and
/// sleeping wherever it is infinite.
pub fn is_recurrent(config: &Configuration, rates: &SleepRates) -> Result<bool, ProcessError> {
    config.require_sleeping()?;
    Ok(config.sites().iter().enumerate().all(|(v, s)| {
        let r = rates.rate(v);
        !(r == Rate::ZERO && *s != SiteState::Empty || r.is_infinite() && *s != SiteState::Sleeping)
    }))
}

/// How a trace's `sigma_0` is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Fixed(Configuration),
    /// An independent exact sample.
    Stationary,
}

impl InitialState {
    pub fn resolve(&self, chain: &BaseChain, rates: &SleepRates, seed: u64) -> Result<Configuration, ProcessError> {
        match self {
            InitialState::Fixed(c) => Ok(c.clone()),
            InitialState::Stationary => exact_sample(chain, rates, seed),
        }
    }
}

/// Fewer conditioning events than this makes a check inconclusive.
pub const MIN_CONDITIONED: u64 = 100;

#[derive(Clone, Debug, Serialize)]
pub struct StationarityReport {
    pub t: u64,
    pub samples: u64,
    /// Traces with `T_full <= t`.
    pub conditioned: u64,
    pub tv: f64,
    pub radius: f64,
    pub inconclusive: bool,
    pub conditional: EmpiricalLaw,
    pub reference: EmpiricalLaw,
}

/// Empirical law of `n` exact samples; sample `i` uses the stationary lane of
/// trial `i` under `seed`.
pub fn exact_sample_law(chain: &BaseChain, rates: &SleepRates, n: u64, seed: u64) -> Result<EmpiricalLaw, ProcessError> {
    let masks = crate::par_map(n, |i| {
        exact_sample(chain, rates, seeds::derive(seed, i, Lane::Stationary)).map(|c| c.sleep_mask())
    });
    let mut law = EmpiricalLaw::new();
    for m in masks {
        law.add(m?);
    }
    Ok(law)
}

/// Law of `sigma_t` given `T_full <= t` (by rejection) against the law of
/// [`exact_sample`], from `samples` coupled traces and as many exact samples.
pub fn strong_stationarity_check(
    chain: &BaseChain,
    rates: &SleepRates,
    driving: &DrivingSpec,
    initial: &InitialState,
    t: u64,
    samples: u64,
    seed: u64,
) -> Result<StationarityReport, ProcessError> {
    let outcomes = crate::par_map(samples, |i| -> Result<Option<u64>, ProcessError> {
        let sigma0 = initial.resolve(chain, rates, seeds::derive(seed, i, Lane::Initial))?;
        let seeds = TraceSeeds::derive(seed, i);
        let mut driver = driving.driver(chain, seeds.driving)?;
        let mut process = CoupledProcess::new(chain, rates, sigma0, seeds.instructions)?;
        for u in driver.by_ref().take(t as usize) {
            process.step(u)?;
        }
        Ok(process.t_full().is_some().then(|| process.sigma().sleep_mask()))
    });
    let mut conditional = EmpiricalLaw::new();
    for o in outcomes {
        if let Some(mask) = o? {
            conditional.add(mask);
        }
    }
    let reference = exact_sample_law(chain, rates, samples, seed)?;
    let conditioned = conditional.total();
    let inconclusive = conditioned < MIN_CONDITIONED;
    let (tv, radius) =
        if conditioned == 0 { (f64::NAN, f64::NAN) } else { (conditional.tv(&reference), tv_radius(&conditional, &reference, 0.99)) };
    Ok(StationarityReport { t, samples, conditioned, tv, radius, inconclusive, conditional, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{build_interval, build_wired_tree};

    #[test]
    fn driving_specs_parse_and_print() {
        for s in ["central", "central:3", "uniform", "permutation", "permutation:2,0,1", "custom:0,0,1"] {
            let d: DrivingSpec = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("sideways".parse::<DrivingSpec>().is_err());
        assert!("custom:a".parse::<DrivingSpec>().is_err());
    }

    #[test]
    fn drivers() {
        let chain = build_interval(3).unwrap();
        let central: Vec<_> = DrivingSpec::Central(None).driver(&chain, 0).unwrap().take(3).collect();
        assert_eq!(central, vec![VertexId(2); 3]);
        let mut first: Vec<_> = DrivingSpec::Permutation(None).driver(&chain, 9).unwrap().take(5).collect();
        first.sort();
        assert_eq!(first, chain.vertices().collect::<Vec<_>>());
        let again: Vec<_> = DrivingSpec::Permutation(None).driver(&chain, 9).unwrap().take(10).collect();
        assert_eq!(again[..5], again[5..]);
        assert!(DrivingSpec::Permutation(Some(vec![VertexId(0); 5])).driver(&chain, 0).is_err());
        assert!(DrivingSpec::Custom(vec![VertexId(7)]).driver(&chain, 0).is_err());
        let uniform: Vec<_> = DrivingSpec::Uniform.driver(&chain, 4).unwrap().take(1000).collect();
        assert!(uniform.iter().all(|v| v.0 < 5));
        assert!(DrivingSpec::Central(Some(VertexId(0))).is_thorough(&chain));
    }

    #[test]
    fn single_vertex_exact_sample() {
        let chain = build_interval(1).unwrap();
        let rates = SleepRates::constant(1, Rate::new(1.0).unwrap());
        let sleeping = (0..4000).filter(|&s| exact_sample(&chain, &rates, s).unwrap().get(VertexId(0)) == SiteState::Sleeping).count();
        assert!((sleeping as f64 / 4000.0 - 0.5).abs() < 0.04);
        let zero = SleepRates::constant(1, Rate::ZERO);
        assert_eq!(exact_sample(&chain, &zero, 1).unwrap().to_string(), ".");
        let inf = SleepRates::constant(1, Rate::INFINITE);
        assert_eq!(exact_sample(&chain, &inf, 1).unwrap().to_string(), "s");
    }

    #[test]
    fn extreme_rates_sample_the_recurrent_extremes() {
        let chain = build_interval(4).unwrap();
        let zero = SleepRates::constant(7, Rate::ZERO);
        let inf = SleepRates::constant(7, Rate::INFINITE);
        for seed in 0..20 {
            assert_eq!(exact_sample(&chain, &zero, seed).unwrap(), Configuration::empty(7));
            assert_eq!(exact_sample(&chain, &inf, seed).unwrap(), Configuration::all_sleeping(7));
        }
    }

    #[test]
    fn sampling_cost_examples() {
        let single = build_interval(1).unwrap();
        assert!((sampling_cost(&single).unwrap() - 1.0).abs() < 1e-12);
        let two = build_interval(2).unwrap();
        assert!((sampling_cost(&two).unwrap() - 10.0).abs() < 1e-12);
        let doubled = two.disjoint_union(&two);
        assert!((sampling_cost(&doubled).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn recurrent_class() {
        let rates = SleepRates::from_values(&[0.0, 1.0, f64::INFINITY]).unwrap();
        assert!(is_recurrent(&"..s".parse().unwrap(), &rates).unwrap());
        assert!(is_recurrent(&".ss".parse().unwrap(), &rates).unwrap());
        assert!(!is_recurrent(&"s.s".parse().unwrap(), &rates).unwrap());
        assert!(!is_recurrent(&"...".parse().unwrap(), &rates).unwrap());
        assert!(is_recurrent(&"1..".parse().unwrap(), &rates).is_err());
        let ones = SleepRates::constant(3, Rate::new(1.0).unwrap());
        for mask in 0..8 {
            assert!(is_recurrent(&Configuration::from_sleep_mask(3, mask), &ones).unwrap());
        }
    }

    #[test]
    fn idla_trivial_fills() {
        let single = build_interval(1).unwrap();
        let run = run_idla(&single, &DrivingSpec::Central(None), 10, TraceSeeds::derive(1, 0), FillTarget::All).unwrap();
        assert_eq!(run.t_full, Some(1));
        let chain = build_interval(5).unwrap();
        for i in 0..50 {
            let run = run_idla(&chain, &DrivingSpec::Uniform, 10_000, TraceSeeds::derive(2, i), FillTarget::All).unwrap();
            assert!(run.t_full.unwrap() >= 9);
        }
        let tree = build_wired_tree(1).unwrap();
        for i in 0..50 {
            let run = run_idla(&tree, &DrivingSpec::Central(None), 10_000, TraceSeeds::derive(3, i), FillTarget::Marked).unwrap();
            assert!(run.t_full.unwrap() >= 2);
        }
    }

    #[test]
    fn trace_records_and_coupling() {
        let chain = build_interval(3).unwrap();
        let rates = SleepRates::constant(5, Rate::new(1.0).unwrap());
        let seeds = TraceSeeds::derive(11, 0);
        let trace = run_arw(&chain, &rates, &DrivingSpec::Uniform, Configuration::empty(5), 30, seeds, true).unwrap();
        assert_eq!(trace.records.len(), 30);
        assert_eq!(trace.snapshots.len(), 31);
        let mut driver = DrivingSpec::Uniform.driver(&chain, seeds.driving).unwrap();
        let mut p = CoupledProcess::new(&chain, &rates, Configuration::empty(5), seeds.instructions).unwrap();
        for t in 1..=30 {
            p.step(driver.next().unwrap()).unwrap();
            assert_eq!(p.sigma().to_string(), trace.snapshots[t]);
            let (resumed, h) = p.resumed().unwrap();
            assert_eq!(&resumed, p.sigma());
            assert_eq!(&p.idla_odometer() + &h, p.arw_odometer());
        }
        let full = trace.records.iter().position(|r| r.full);
        assert_eq!(full.map(|i| i as u64 + 1), trace.t_full);
    }

    #[test]
    fn sst_single_vertex_is_fair_coin() {
        let chain = build_interval(1).unwrap();
        let rates = SleepRates::constant(1, Rate::new(1.0).unwrap());
        let report = strong_stationarity_check(
            &chain,
            &rates,
            &DrivingSpec::Central(None),
            &InitialState::Fixed(Configuration::empty(1)),
            2,
            4000,
            5,
        )
        .unwrap();
        assert_eq!(report.conditioned, 4000);
        assert!((report.conditional.frequency(1) - 0.5).abs() < 0.04);
        assert!(report.tv <= 3.0 * report.radius);
        let none = strong_stationarity_check(&chain, &rates, &DrivingSpec::Central(None), &InitialState::Stationary, 0, 200, 5)
            .unwrap();
        assert!(none.inconclusive && none.conditioned == 0);
    }
}
