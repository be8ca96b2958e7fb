//! Firing, legal executions and the stabilization operators.
//!
//! Every firing consumes exactly one instruction of the fired vertex. A Sleep
//! instruction puts a lone active particle to sleep and is a no-op on a site
//! holding two or more, since `(k - 1) + s = k`. Because of that convention
//! an IDLA execution (fire only sites with at least two particles) is a legal
//! ARW execution on the same tape, and its odometer can be used as a tape
//! offset for completing the ARW stabilization.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::chains::VertexId;
use crate::config::Configuration;
use crate::tape::{Instruction, InstructionTape, Odometer};

pub const DEFAULT_FIRING_CAP: u64 = 10_000_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("illegal firing: vertex {0} holds no active particle")]
    IllegalFiring(VertexId),
    #[error("stabilization aborted after {cap} firings with {active} active particles left")]
    FiringCap { cap: u64, active: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FireOutcome {
    /// The lone particle fell asleep.
    Slept,
    /// Sleep instruction on a site with at least two particles.
    Idle,
    Moved(VertexId),
    Absorbed,
}

/// Fires `v` once, consuming its next instruction.
#[inline]
pub fn fire(config: &mut Configuration, v: VertexId, tape: &mut InstructionTape<'_>) -> Result<FireOutcome, EngineError> {
    let k = config.get(v).active_count();
    if k == 0 {
        return Err(EngineError::IllegalFiring(v));
    }
    Ok(match tape.next(v) {
        Instruction::Sleep if k == 1 => {
            config.sleep_single(v);
            FireOutcome::Slept
        }
        Instruction::Sleep => FireOutcome::Idle,
        Instruction::Step(w) => {
            config.remove_active(v);
            if w.is_sink() {
                FireOutcome::Absorbed
            } else {
                config.add_particle(w);
                FireOutcome::Moved(w)
            }
        }
    })
}

/// Order in which active vertices are fired. The stabilization result does
/// not depend on it; several are provided so that this can be checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum FiringPolicy {
    LowestIndex,
    HighestIndex,
    #[default]
    Fifo,
    /// Keep moving one particle until it sleeps or leaves, then pick another.
    SingleParticle,
}

impl FiringPolicy {
    pub const ALL: [FiringPolicy; 4] =
        [FiringPolicy::LowestIndex, FiringPolicy::HighestIndex, FiringPolicy::Fifo, FiringPolicy::SingleParticle];
}

impl fmt::Display for FiringPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FiringPolicy::LowestIndex => "lowest",
            FiringPolicy::HighestIndex => "highest",
            FiringPolicy::Fifo => "fifo",
            FiringPolicy::SingleParticle => "single",
        })
    }
}

impl FromStr for FiringPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowest" => Ok(FiringPolicy::LowestIndex),
            "highest" => Ok(FiringPolicy::HighestIndex),
            "fifo" => Ok(FiringPolicy::Fifo),
            "single" => Ok(FiringPolicy::SingleParticle),
            _ => Err(format!("unknown firing policy {s:?}")),
        }
    }
}

struct Worklist {
    policy: FiringPolicy,
    ordered: BTreeSet<u32>,
    queue: VecDeque<u32>,
    stack: Vec<u32>,
    queued: Vec<bool>,
}

impl Worklist {
    fn new(policy: FiringPolicy, n: usize) -> Self {
        Worklist { policy, ordered: BTreeSet::new(), queue: VecDeque::new(), stack: Vec::new(), queued: vec![false; n] }
    }

    #[inline]
    fn push(&mut self, v: VertexId) {
        let i = v.index();
        if self.queued[i] {
            return;
        }
        self.queued[i] = true;
        match self.policy {
            FiringPolicy::LowestIndex | FiringPolicy::HighestIndex => {
                self.ordered.insert(v.0);
            }
            FiringPolicy::Fifo => self.queue.push_back(v.0),
            FiringPolicy::SingleParticle => self.stack.push(v.0),
        }
    }

    #[inline]
    fn pop(&mut self) -> Option<VertexId> {
        let v = match self.policy {
            FiringPolicy::LowestIndex => self.ordered.pop_first(),
            FiringPolicy::HighestIndex => self.ordered.pop_last(),
            FiringPolicy::Fifo => self.queue.pop_front(),
            FiringPolicy::SingleParticle => self.stack.pop(),
        }?;
        self.queued[v as usize] = false;
        Some(VertexId(v))
    }
}

/// Firing and absorption counts of one execution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub firings: u64,
    pub absorbed: u64,
}

/// Runs a legal execution from `config` for at most `limit` firings.
/// Returns the counts and whether the configuration is now sleeping.
pub fn execute(
    config: &mut Configuration,
    tape: &mut InstructionTape<'_>,
    policy: FiringPolicy,
    limit: u64,
) -> (RunStats, bool) {
    let mut stats = RunStats::default();
    if config.is_sleeping() {
        return (stats, true);
    }
    let mut work = Worklist::new(policy, config.len());
    for (i, s) in config.sites().iter().enumerate() {
        if s.is_active() {
            work.push(VertexId(i as u32));
        }
    }
    let mut current: Option<VertexId> = None;
    while !config.is_sleeping() {
        if stats.firings == limit {
            return (stats, false);
        }
        let v = match current.take() {
            Some(c) if config.get(c).is_active() => c,
            _ => match work.pop() {
                Some(v) if config.get(v).is_active() => v,
                Some(_) => continue,
                None => unreachable!("active vertex missing from the worklist"),
            },
        };
        let outcome = fire(config, v, tape).expect("worklist only yields active vertices");
        stats.firings += 1;
        let follow = policy == FiringPolicy::SingleParticle;
        match outcome {
            FireOutcome::Moved(w) if follow => current = Some(w),
            FireOutcome::Moved(w) => work.push(w),
            FireOutcome::Idle if follow => current = Some(v),
            FireOutcome::Absorbed => stats.absorbed += 1,
            _ => {}
        }
        if config.get(v).is_active() && current != Some(v) {
            work.push(v);
        }
    }
    (stats, true)
}

/// Stabilizes in place, continuing from the tape's current consumption (so a
/// forked or partially consumed tape realizes `S^F`).
pub fn stabilize_in_place(
    config: &mut Configuration,
    tape: &mut InstructionTape<'_>,
    policy: FiringPolicy,
    cap: u64,
) -> Result<RunStats, EngineError> {
    match execute(config, tape, policy, cap) {
        (stats, true) => Ok(stats),
        (_, false) => Err(EngineError::FiringCap { cap, active: config.active_particles() }),
    }
}

/// Result of a stabilization call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilized {
    pub config: Configuration,
    /// Instructions consumed per vertex by this call.
    pub odometer: Odometer,
    pub absorbed: u64,
}

pub fn stabilize(
    config: &Configuration,
    tape: &mut InstructionTape<'_>,
    policy: FiringPolicy,
) -> Result<Stabilized, EngineError> {
    stabilize_capped(config, tape, policy, DEFAULT_FIRING_CAP)
}

pub fn stabilize_capped(
    config: &Configuration,
    tape: &mut InstructionTape<'_>,
    policy: FiringPolicy,
    cap: u64,
) -> Result<Stabilized, EngineError> {
    let before = tape.consumed();
    let mut out = config.clone();
    let stats = stabilize_in_place(&mut out, tape, policy, cap)?;
    Ok(Stabilized { config: out, odometer: tape.consumed().since(&before), absorbed: stats.absorbed })
}

/// IDLA stabilization `S_inf` in place: fires only sites with at least two
/// particles, treating Sleep instructions as no-ops, until every site holds at
/// most one particle. A site that received a particle on top of a sleeping one
/// ends with a single active particle.
pub fn stabilize_idla_in_place(
    config: &mut Configuration,
    tape: &mut InstructionTape<'_>,
    cap: u64,
) -> Result<RunStats, EngineError> {
    let mut stats = RunStats::default();
    let mut stack: Vec<VertexId> = config
        .sites()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.particles() >= 2)
        .map(|(i, _)| VertexId(i as u32))
        .collect();
    while let Some(mut v) = stack.pop() {
        // follow the walker until it finds a free site or the sink
        while config.get(v).particles() >= 2 {
            if stats.firings == cap {
                return Err(EngineError::FiringCap { cap, active: config.active_particles() });
            }
            stats.firings += 1;
            match fire(config, v, tape)? {
                FireOutcome::Moved(w) => {
                    if config.get(v).particles() >= 2 {
                        stack.push(v);
                    }
                    v = w;
                }
                FireOutcome::Absorbed => stats.absorbed += 1,
                FireOutcome::Idle => {}
                FireOutcome::Slept => unreachable!("IDLA never fires a lone particle"),
            }
        }
    }
    Ok(stats)
}

pub fn stabilize_idla(config: &Configuration, tape: &mut InstructionTape<'_>) -> Result<Stabilized, EngineError> {
    let before = tape.consumed();
    let mut out = config.clone();
    let stats = stabilize_idla_in_place(&mut out, tape, DEFAULT_FIRING_CAP)?;
    Ok(Stabilized { config: out, odometer: tape.consumed().since(&before), absorbed: stats.absorbed })
}

/// Stabilizes `config` under two policies on replays of the same tape and
/// reports whether final configurations and odometers coincide.
pub fn verify_abelian(
    config: &Configuration,
    tape: &InstructionTape<'_>,
    first: FiringPolicy,
    second: FiringPolicy,
) -> Result<bool, EngineError> {
    let a = stabilize(config, &mut tape.rewound(), first)?;
    let b = stabilize(config, &mut tape.rewound(), second)?;
    Ok(a.config == b.config && a.odometer == b.odometer)
}
