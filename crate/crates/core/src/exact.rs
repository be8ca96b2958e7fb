//! Exact laws on tiny chains, by solving the absorbing Markov chain of the
//! two-case firing rule: fire the lowest active vertex; a lone particle sleeps
//! with probability `q_v` and otherwise steps, a site with two or more
//! particles sends one along `P`. Sleeping configurations are encoded as bit
//! masks (bit `v` set when `v` holds a sleeping particle).

use std::collections::{BTreeMap, HashMap};

use faer::prelude::*;
use thiserror::Error;

use crate::chains::{BaseChain, VertexId};
use crate::config::Configuration;
use crate::rates::SleepRates;

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("exact enumeration supports at most {max} vertices, chain has {got}")]
    TooManyVertices { max: usize, got: usize },
    #[error("more than {0} reachable configurations")]
    TooManyStates(usize),
}

pub const MAX_VERTICES: usize = 12;
pub const MAX_STATES: usize = 20_000;

/// Law over sleep masks.
pub type Law = BTreeMap<u64, f64>;

fn successors(chain: &BaseChain, rates: &SleepRates, c: &Configuration) -> Vec<(Configuration, f64)> {
    let v = VertexId(c.sites().iter().position(|s| s.is_active()).expect("non-sleeping state") as u32);
    let k = c.get(v).active_count();
    let q = rates.sleep_probability(v.index());
    let step_mass = if k >= 2 { 1.0 } else { 1.0 - q };
    let mut out = Vec::new();
    if k == 1 && q > 0.0 {
        let mut next = c.clone();
        next.sleep_single(v);
        out.push((next, q));
    }
    if step_mass > 0.0 {
        let den = chain.denominator(v) as f64;
        for e in chain.edges(v) {
            let mut next = c.clone();
            next.remove_active(v);
            if !e.target.is_sink() {
                next.add_particle(e.target);
            }
            out.push((next, step_mass * e.weight as f64 / den));
        }
    }
    out
}

/// Exact law of `S[start]`.
pub fn stabilization_law(chain: &BaseChain, rates: &SleepRates, start: &Configuration) -> Result<Law, ExactError> {
    let n = chain.num_vertices();
    if n > MAX_VERTICES {
        return Err(ExactError::TooManyVertices { max: MAX_VERTICES, got: n });
    }
    if start.is_sleeping() {
        return Ok(Law::from([(start.sleep_mask(), 1.0)]));
    }
    // enumerate transient states reachable from start
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    let mut states = vec![start.clone()];
    index.insert(start.clone(), 0);
    let mut absorbing: BTreeMap<u64, usize> = BTreeMap::new();
    let mut edges: Vec<Vec<(Result<usize, u64>, f64)>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let mut row = Vec::new();
        for (next, p) in successors(chain, rates, &states[i]) {
            if next.is_sleeping() {
                let m = next.sleep_mask();
                let len = absorbing.len();
                absorbing.entry(m).or_insert(len);
                row.push((Err(m), p));
            } else {
                let j = *index.entry(next.clone()).or_insert_with(|| {
                    states.push(next);
                    states.len() - 1
                });
                row.push((Ok(j), p));
            }
        }
        edges.push(row);
        if states.len() > MAX_STATES {
            return Err(ExactError::TooManyStates(MAX_STATES));
        }
        i += 1;
    }
    let t = states.len();
    let masks: Vec<u64> = absorbing.keys().copied().collect();
    let column: HashMap<u64, usize> = masks.iter().enumerate().map(|(j, &m)| (m, j)).collect();
    let mut a = Mat::<f64>::identity(t, t);
    let mut r = Mat::<f64>::zeros(t, masks.len());
    for (i, row) in edges.iter().enumerate() {
        for &(target, p) in row {
            match target {
                Ok(j) => a[(i, j)] -= p,
                Err(m) => r[(i, column[&m])] += p,
            }
        }
    }
    let x = a.partial_piv_lu().solve(&r);
    Ok(masks.iter().enumerate().map(|(j, &m)| (m, x[(0, j)])).filter(|(_, p)| *p != 0.0).collect())
}

/// Exact stationary law, the law of `S[1_V]`.
pub fn stationary_law(chain: &BaseChain, rates: &SleepRates) -> Result<Law, ExactError> {
    stabilization_law(chain, rates, &Configuration::ones(chain.num_vertices()))
}

/// The one-step operator `A_v`: entry `(a, b)` is the probability that
/// `S[sigma_a + delta_v]` is `sigma_b`, over all `2^#V` sleeping states.
pub fn one_step_operator(chain: &BaseChain, rates: &SleepRates, v: VertexId) -> Result<Mat<f64>, ExactError> {
    let n = chain.num_vertices();
    if n > MAX_VERTICES {
        return Err(ExactError::TooManyVertices { max: MAX_VERTICES, got: n });
    }
    let size = 1usize << n;
    let mut m = Mat::<f64>::zeros(size, size);
    for a in 0..size {
        let start = Configuration::from_sleep_mask(n, a as u64).with_particles([v]);
        for (b, p) in stabilization_law(chain, rates, &start)? {
            m[(a, b as usize)] = p;
        }
    }
    Ok(m)
}

/// Law of `sigma_t` for a deterministic driving list and initial state.
pub fn law_after(chain: &BaseChain, rates: &SleepRates, sigma0: &Configuration, driving: &[VertexId]) -> Result<Law, ExactError> {
    let n = chain.num_vertices();
    let mut law = Law::from([(sigma0.sleep_mask(), 1.0)]);
    let mut cache: HashMap<(u64, VertexId), Law> = HashMap::new();
    for &u in driving {
        let mut next = Law::new();
        for (&a, &pa) in &law {
            let step = match cache.get(&(a, u)) {
                Some(l) => l.clone(),
                None => {
                    let l = stabilization_law(chain, rates, &Configuration::from_sleep_mask(n, a).with_particles([u]))?;
                    cache.insert((a, u), l.clone());
                    l
                }
            };
            for (b, pb) in step {
                *next.entry(b).or_default() += pa * pb;
            }
        }
        law = next;
    }
    Ok(law)
}

/// Max-norm of `A B - B A`.
pub fn commutator_norm(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let c = a * b - b * a;
    let mut worst: f64 = 0.0;
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            worst = worst.max(c[(i, j)].abs());
        }
    }
    worst
}
