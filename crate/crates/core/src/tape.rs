//! Quenched instructions.
//!
//! Instruction `n` at vertex `v` is a pure function of `(seed, v, n)`: vertex
//! `v` owns ChaCha8 stream `v` under a key derived from the seed, and
//! instruction `n` is decoded from the 64-bit word at position `n` of that
//! stream. Reading is sequential in the common case and seeks otherwise, so a
//! tape can be forked at an arbitrary per-vertex offset without history.
//!
//! Decoding: for a finite rate the word's top 53 bits give `x` in [0, 1);
//! `x < q_v` is Sleep, otherwise `(x - q_v) / (1 - q_v)` picks the step target
//! from P(v, .). For an infinite rate the stream alternates Sleep (even
//! positions) and Step (odd positions): an all-Sleep stream could never move a
//! surplus particle off the site.

use std::ops::{Add, AddAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chains::{BaseChain, VertexId};
use crate::rates::SleepRates;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instruction {
    Sleep,
    Step(VertexId),
}

/// Per-vertex instruction counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Odometer(Vec<u64>);

impl Odometer {
    pub fn zero(n: usize) -> Self {
        Odometer(vec![0; n])
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Odometer(counts)
    }

    pub fn unit(n: usize, v: VertexId) -> Self {
        let mut o = Self::zero(n);
        o.0[v.index()] = 1;
        o
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, v: VertexId) -> u64 {
        self.0[v.index()]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &Odometer) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Pointwise `self - earlier`; panics if `earlier` is not below `self`.
    pub fn since(&self, earlier: &Odometer) -> Odometer {
        Odometer(self.0.iter().zip(&earlier.0).map(|(a, b)| a.checked_sub(*b).expect("odometers are monotone")).collect())
    }
}

impl AddAssign<&Odometer> for Odometer {
    fn add_assign(&mut self, rhs: &Odometer) {
        for (a, b) in self.0.iter_mut().zip(&rhs.0) {
            *a += b;
        }
    }
}

impl Add<&Odometer> for &Odometer {
    type Output = Odometer;

    fn add(self, rhs: &Odometer) -> Odometer {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

// instructions decoded per refill; one refill is exactly one ChaCha buffer
const CHUNK: usize = 32;

#[derive(Clone)]
struct Stream {
    rng: ChaCha8Rng,
    decoded: [Instruction; CHUNK],
}

// no chunk decoded yet; no multiple of CHUNK is congruent to it
const UNSET: u64 = u64::MAX;

/// Lazily generated per-vertex instruction streams with consumption counters.
#[derive(Clone)]
pub struct InstructionTape<'a> {
    chain: &'a BaseChain,
    rates: &'a SleepRates,
    seed: u64,
    key: [u8; 32],
    origin: Vec<u64>,
    consumed: Vec<u64>,
    // absolute index of each stream's `decoded[0]`
    base: Vec<u64>,
    streams: Vec<Option<Box<Stream>>>,
}

impl<'a> InstructionTape<'a> {
    pub fn new(chain: &'a BaseChain, rates: &'a SleepRates, seed: u64) -> Self {
        assert_eq!(chain.num_vertices(), rates.len(), "one sleep rate per vertex");
        let n = chain.num_vertices();
        InstructionTape {
            chain,
            rates,
            seed,
            key: ChaCha8Rng::seed_from_u64(seed).get_seed(),
            origin: vec![0; n],
            consumed: vec![0; n],
            base: vec![UNSET; n],
            streams: vec![None; n],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chain(&self) -> &'a BaseChain {
        self.chain
    }

    pub fn rates(&self) -> &'a SleepRates {
        self.rates
    }

    /// Instructions consumed since this tape (or fork) was created.
    pub fn consumed(&self) -> Odometer {
        Odometer(self.consumed.clone())
    }

    #[inline]
    pub fn consumed_at(&self, v: VertexId) -> u64 {
        self.consumed[v.index()]
    }

    /// The tape whose instruction `(v, n)` is this tape's `(v, n + offset(v))`.
    /// Consumption on the fork starts from zero.
    pub fn fork(&self, offset: &Odometer) -> InstructionTape<'a> {
        let mut t = self.clone();
        for (o, d) in t.origin.iter_mut().zip(offset.counts()) {
            *o += d;
        }
        t.consumed.iter_mut().for_each(|c| *c = 0);
        t
    }

    /// Same tape with consumption reset, for replaying an execution.
    pub fn rewound(&self) -> InstructionTape<'a> {
        let mut t = self.clone();
        t.consumed.iter_mut().for_each(|c| *c = 0);
        t
    }

    /// Consumes the next instruction at `v`.
    #[inline]
    pub fn next(&mut self, v: VertexId) -> Instruction {
        let i = v.index();
        let n = self.consumed[i];
        self.consumed[i] = n + 1;
        self.read(v, self.origin[i] + n)
    }

    /// Instruction `n` (relative to this tape's origin) at `v`, not consumed.
    pub fn peek(&mut self, v: VertexId, n: u64) -> Instruction {
        self.read(v, self.origin[v.index()] + n)
    }

    #[inline]
    fn read(&mut self, v: VertexId, absolute: u64) -> Instruction {
        let i = v.index();
        let k = absolute.wrapping_sub(self.base[i]);
        match &self.streams[i] {
            Some(stream) if k < CHUNK as u64 => stream.decoded[k as usize],
            _ => self.refill(v, absolute),
        }
    }

    #[cold]
    fn refill(&mut self, v: VertexId, absolute: u64) -> Instruction {
        let i = v.index();
        let stream = self.streams[i].get_or_insert_with(|| {
            let mut rng = ChaCha8Rng::from_seed(self.key);
            rng.set_stream(i as u64);
            Box::new(Stream { rng, decoded: [Instruction::Sleep; CHUNK] })
        });
        let base = absolute - absolute % CHUNK as u64;
        if self.base[i].wrapping_add(CHUNK as u64) != base {
            stream.rng.set_word_pos(2 * base as u128);
        }
        self.base[i] = base;
        for (k, slot) in stream.decoded.iter_mut().enumerate() {
            *slot = decode(self.chain, self.rates, v, base + k as u64, stream.rng.next_u64());
        }
        stream.decoded[(absolute - base) as usize]
    }
}

#[inline]
fn unit_interval(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn decode(chain: &BaseChain, rates: &SleepRates, v: VertexId, absolute: u64, word: u64) -> Instruction {
    let q = rates.sleep_probability(v.index());
    let x = unit_interval(word);
    if q == 0.0 {
        return Instruction::Step(chain.step_target(v, x));
    }
    if q >= 1.0 {
        return if absolute % 2 == 0 { Instruction::Sleep } else { Instruction::Step(chain.step_target(v, x)) };
    }
    if x < q {
        Instruction::Sleep
    } else {
        Instruction::Step(chain.step_target(v, (x - q) / (1.0 - q)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{build_ball, build_interval};
    use crate::rates::Rate;

    #[test]
    fn regeneration_is_exact() {
        let chain = build_ball(2, 3.0).unwrap();
        let rates = SleepRates::constant(chain.num_vertices(), Rate::new(0.7).unwrap());
        let mut a = InstructionTape::new(&chain, &rates, 99);
        let mut b = InstructionTape::new(&chain, &rates, 99);
        let first: Vec<_> = (0..200).map(|k| a.next(VertexId(k % 25))).collect();
        // different interleaving, same per-vertex sequences
        let mut second = vec![Instruction::Sleep; 200];
        for v in 0..25u32 {
            for k in (0..200usize).filter(|k| *k as u32 % 25 == v) {
                second[k] = b.next(VertexId(v));
            }
        }
        assert_eq!(first, second);
        assert_ne!(first, {
            let mut c = InstructionTape::new(&chain, &rates, 100);
            (0..200).map(|k| c.next(VertexId(k % 25))).collect::<Vec<_>>()
        });
    }

    #[test]
    fn fork_identity_and_shift() {
        let chain = build_interval(4).unwrap();
        let rates = SleepRates::constant(7, Rate::new(1.0).unwrap());
        let mut base = InstructionTape::new(&chain, &rates, 5);
        let mut same = base.fork(&Odometer::zero(7));
        let v = VertexId(3);
        let mut shifted = base.fork(&Odometer::unit(7, v));
        for n in 0..50 {
            assert_eq!(same.peek(VertexId(1), n), base.peek(VertexId(1), n));
            assert_eq!(shifted.peek(v, n), base.peek(v, n + 1));
            assert_eq!(shifted.peek(VertexId(2), n), base.peek(VertexId(2), n));
        }
        // sequential reads agree with random access after a seek
        for n in 0..10 {
            assert_eq!(shifted.next(v), base.peek(v, n + 1));
        }
        assert_eq!(shifted.consumed_at(v), 10);
    }

    #[test]
    fn infinite_rate_alternates() {
        let chain = build_interval(2).unwrap();
        let rates = SleepRates::constant(3, Rate::INFINITE);
        let mut t = InstructionTape::new(&chain, &rates, 1);
        for n in 0..20 {
            let ins = t.next(VertexId(1));
            assert_eq!(ins == Instruction::Sleep, n % 2 == 0);
        }
    }

    #[test]
    fn zero_rate_never_sleeps() {
        let chain = build_interval(3).unwrap();
        let rates = SleepRates::constant(5, Rate::ZERO);
        let mut t = InstructionTape::new(&chain, &rates, 11);
        assert!((0..1000).all(|_| t.next(VertexId(2)) != Instruction::Sleep));
    }

    #[test]
    fn odometer_arithmetic() {
        let a = Odometer::from_counts(vec![1, 2, 3]);
        let b = Odometer::from_counts(vec![1, 5, 3]);
        assert!(a.le(&b));
        assert!(!b.le(&a));
        assert_eq!((&a + &b).counts(), &[2, 7, 6]);
        assert_eq!(b.since(&a).counts(), &[0, 3, 0]);
        assert_eq!(b.total(), 9);
    }
}
