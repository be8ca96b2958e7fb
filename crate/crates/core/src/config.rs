//! Site states over {0, s, 1, 2, ...} and ARW configurations.

use std::fmt;
use std::num::NonZeroU32;
use std::ops::Add;
use std::str::FromStr;

use thiserror::Error;

use crate::chains::VertexId;

/// Ordered `Empty < Sleeping < Active(1) < Active(2) < ...`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteState {
    Empty,
    Sleeping,
    Active(NonZeroU32),
}

impl SiteState {
    pub fn active(k: u32) -> SiteState {
        NonZeroU32::new(k).map_or(SiteState::Empty, SiteState::Active)
    }

    /// Number of particles on the site, sleeping or not.
    #[inline]
    pub fn particles(self) -> u32 {
        match self {
            SiteState::Empty => 0,
            SiteState::Sleeping => 1,
            SiteState::Active(k) => k.get(),
        }
    }

    #[inline]
    pub fn active_count(self) -> u32 {
        match self {
            SiteState::Active(k) => k.get(),
            _ => 0,
        }
    }

    #[inline]
    pub fn is_active(self) -> bool {
        matches!(self, SiteState::Active(_))
    }
}

/// Extended addition: `0 + s = s`, `n + s = n + 1` for `n != 0`, so `s + s = 2`.
impl Add for SiteState {
    type Output = SiteState;

    fn add(self, rhs: SiteState) -> SiteState {
        use SiteState::*;
        match (self, rhs) {
            (Empty, x) | (x, Empty) => x,
            (a, b) => SiteState::active(a.particles() + b.particles()),
        }
    }
}

impl fmt::Display for SiteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SiteState::Empty => f.write_str("."),
            SiteState::Sleeping => f.write_str("s"),
            SiteState::Active(k) if k.get() < 10 => write!(f, "{k}"),
            SiteState::Active(k) => write!(f, "({k})"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unexpected character {0:?} in configuration string")]
    BadChar(char),
    #[error("unterminated or empty multi-digit escape")]
    BadEscape,
    #[error("configuration has {got} sites, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("configuration is not sleeping")]
    NotSleeping,
}

/// Per-vertex site states with cached particle counts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    sites: Vec<SiteState>,
    total: u64,
    active: u64,
    sleeping: u64,
}

impl Configuration {
    pub fn empty(n: usize) -> Self {
        Configuration { sites: vec![SiteState::Empty; n], total: 0, active: 0, sleeping: 0 }
    }

    /// `1_V`: one active particle on every vertex.
    pub fn ones(n: usize) -> Self {
        Self::from_sites(vec![SiteState::active(1); n])
    }

    pub fn all_sleeping(n: usize) -> Self {
        Self::from_sites(vec![SiteState::Sleeping; n])
    }

    pub fn from_sites(sites: Vec<SiteState>) -> Self {
        let mut c = Configuration { sites, total: 0, active: 0, sleeping: 0 };
        c.recount();
        c
    }

    /// Sleeping configuration whose bit `v` marks a sleeping particle at `v`.
    pub fn from_sleep_mask(n: usize, mask: u64) -> Self {
        assert!(n <= 64);
        Self::from_sites((0..n).map(|v| if mask >> v & 1 == 1 { SiteState::Sleeping } else { SiteState::Empty }).collect())
    }

    fn recount(&mut self) {
        self.total = self.sites.iter().map(|s| s.particles() as u64).sum();
        self.active = self.sites.iter().map(|s| s.active_count() as u64).sum();
        self.sleeping = self.sites.iter().filter(|s| **s == SiteState::Sleeping).count() as u64;
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    #[inline]
    pub fn get(&self, v: VertexId) -> SiteState {
        self.sites[v.index()]
    }

    pub fn sites(&self) -> &[SiteState] {
        &self.sites
    }

    pub fn total_particles(&self) -> u64 {
        self.total
    }

    pub fn active_particles(&self) -> u64 {
        self.active
    }

    pub fn sleeping_particles(&self) -> u64 {
        self.sleeping
    }

    /// No active particles: every site is empty or sleeping.
    pub fn is_sleeping(&self) -> bool {
        self.active == 0
    }

    /// Every site holds exactly one active particle.
    pub fn is_ones(&self) -> bool {
        self.active == self.sites.len() as u64 && self.total == self.active
    }

    /// Bit mask of sleeping sites; only meaningful for sleeping configurations.
    pub fn sleep_mask(&self) -> u64 {
        assert!(self.sites.len() <= 64, "mask encoding needs at most 64 sites");
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == SiteState::Sleeping)
            .fold(0, |m, (v, _)| m | 1 << v)
    }

    /// Adds one active particle at `v` (extended addition with `delta_v`).
    #[inline]
    pub fn add_particle(&mut self, v: VertexId) {
        let site = &mut self.sites[v.index()];
        match *site {
            SiteState::Empty => {
                *site = SiteState::active(1);
                self.active += 1;
            }
            SiteState::Sleeping => {
                *site = SiteState::active(2);
                self.sleeping -= 1;
                self.active += 2;
            }
            SiteState::Active(k) => {
                *site = SiteState::active(k.get() + 1);
                self.active += 1;
            }
        }
        self.total += 1;
    }

    /// Removes one active particle from `v`; the site must be active.
    #[inline]
    pub(crate) fn remove_active(&mut self, v: VertexId) {
        let site = &mut self.sites[v.index()];
        let k = site.active_count();
        debug_assert!(k > 0);
        *site = SiteState::active(k - 1);
        self.active -= 1;
        self.total -= 1;
    }

    /// Puts the lone active particle at `v` to sleep.
    #[inline]
    pub(crate) fn sleep_single(&mut self, v: VertexId) {
        debug_assert_eq!(self.sites[v.index()], SiteState::active(1));
        self.sites[v.index()] = SiteState::Sleeping;
        self.active -= 1;
        self.sleeping += 1;
    }

    /// Pointwise extended addition.
    pub fn plus(&self, other: &Configuration) -> Configuration {
        assert_eq!(self.len(), other.len());
        Self::from_sites(self.sites.iter().zip(&other.sites).map(|(&a, &b)| a + b).collect())
    }

    /// Adds one active particle at each listed vertex.
    pub fn with_particles<I: IntoIterator<Item = VertexId>>(&self, at: I) -> Configuration {
        let mut c = self.clone();
        for v in at {
            c.add_particle(v);
        }
        c
    }

    pub fn require_sleeping(&self) -> Result<(), ConfigError> {
        if self.is_sleeping() {
            Ok(())
        } else {
            Err(ConfigError::NotSleeping)
        }
    }

    /// Recomputes the cached counts and compares them with the stored ones.
    pub fn counts_consistent(&self) -> bool {
        let mut fresh = self.clone();
        fresh.recount();
        fresh.total == self.total && fresh.active == self.active && fresh.sleeping == self.sleeping
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sites {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut sites = Vec::with_capacity(text.len());
        let mut chars = text.chars();
        while let Some(c) = chars.next() {
            let site = match c {
                '.' | '0' => SiteState::Empty,
                's' => SiteState::Sleeping,
                '1'..='9' => SiteState::active(c as u32 - '0' as u32),
                '(' => {
                    let digits: String = chars.by_ref().take_while(|&d| d != ')').collect();
                    let k: u32 = digits.parse().map_err(|_| ConfigError::BadEscape)?;
                    SiteState::active(k)
                }
                other => return Err(ConfigError::BadChar(other)),
            };
            sites.push(site);
        }
        Ok(Configuration::from_sites(sites))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(k: u32) -> SiteState {
        SiteState::active(k)
    }

    #[test]
    fn extended_addition_table() {
        use SiteState::*;
        assert_eq!(Sleeping + Sleeping, a(2));
        assert_eq!(Empty + Sleeping, Sleeping);
        assert_eq!(a(3) + Sleeping, a(4));
        assert_eq!(Sleeping + a(1), a(2));
        assert_eq!(a(2) + a(5), a(7));
        assert_eq!(Empty + Empty, Empty);
    }

    #[test]
    fn ordering() {
        assert!(SiteState::Empty < SiteState::Sleeping);
        assert!(SiteState::Sleeping < a(1));
        assert!(a(1) < a(2));
    }

    fn site() -> impl Strategy<Value = SiteState> {
        prop_oneof![Just(SiteState::Empty), Just(SiteState::Sleeping), (1u32..20).prop_map(SiteState::active)]
    }

    proptest! {
        #[test]
        fn addition_commutes_and_associates(x in site(), y in site(), z in site()) {
            prop_assert_eq!(x + y, y + x);
            prop_assert_eq!((x + y) + z, x + (y + z));
        }

        #[test]
        fn string_codec_round_trips(sites in proptest::collection::vec(site(), 0..30)) {
            let c = Configuration::from_sites(sites);
            let back: Configuration = c.to_string().parse().unwrap();
            prop_assert_eq!(back, c);
        }

        #[test]
        fn cached_counts_track_mutation(sites in proptest::collection::vec(site(), 1..12), adds in proptest::collection::vec(0usize..12, 0..20)) {
            let n = sites.len();
            let mut c = Configuration::from_sites(sites);
            for v in adds {
                c.add_particle(VertexId((v % n) as u32));
                prop_assert!(c.counts_consistent());
            }
        }
    }

    #[test]
    fn codec_examples() {
        let c: Configuration = ".s2(12)".parse().unwrap();
        assert_eq!(c.sites(), &[SiteState::Empty, SiteState::Sleeping, a(2), a(12)]);
        assert_eq!(c.to_string(), ".s2(12)");
        assert_eq!(c.total_particles(), 15);
        assert!(matches!("x".parse::<Configuration>(), Err(ConfigError::BadChar('x'))));
        assert!(matches!("(".parse::<Configuration>(), Err(ConfigError::BadEscape)));
    }

    #[test]
    fn masks() {
        let c = Configuration::from_sleep_mask(3, 0b101);
        assert_eq!(c.to_string(), "s.s");
        assert_eq!(c.sleep_mask(), 0b101);
        assert!(c.is_sleeping());
        assert!(Configuration::ones(4).is_ones());
        let mut d = Configuration::all_sleeping(2);
        d.add_particle(VertexId(0));
        assert_eq!(d.to_string(), "2s");
        assert_eq!(d.active_particles(), 2);
    }
}
