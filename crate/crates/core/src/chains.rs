//! Finite base chains with an absorbing sink.
//!
//! Every chain stores, for each vertex, a short list of outgoing edges with
//! integer numerators over a per-vertex denominator, so that "weights sum to
//! one" is checked exactly. The sink is a sentinel [`VertexId::SINK`] and never
//! indexes per-vertex data.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("radius must be finite and at least 1, got {0}")]
    BadRadius(f64),
    #[error("torus side length must be at least 2, got {0}")]
    BadSide(u32),
    #[error("parameter {name} must be at least 1")]
    TooSmall { name: &'static str },
    #[error("{0} vertices do not fit the index space")]
    TooLarge(String),
    #[error("vertex {vertex}: weights sum to {sum}/{den}, expected 1")]
    WeightSum { vertex: u32, sum: u64, den: u32 },
    #[error("vertex {vertex}: edge to out-of-range target {target}")]
    BadTarget { vertex: u32, target: u32 },
    #[error("vertex {0} cannot reach the sink")]
    SinkUnreachable(u32),
    #[error("chain has no vertices")]
    Empty,
    #[error("malformed chain descriptor: {0}")]
    Descriptor(String),
}

/// Dense vertex index; `SINK` is the absorbing state and is not part of V.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub const SINK: VertexId = VertexId(u32::MAX);

    #[inline]
    pub fn is_sink(self) -> bool {
        self == Self::SINK
    }

    #[inline]
    pub fn index(self) -> usize {
        debug_assert!(!self.is_sink(), "sink used as a vertex index");
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_sink() {
            write!(f, "sink")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub target: VertexId,
    pub weight: u32,
}

/// Transition structure P on V plus sink, stored in compressed rows.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseChain {
    label: String,
    row_start: Vec<u32>,
    edges: Vec<Edge>,
    denominators: Vec<u32>,
    dim: usize,
    coords: Vec<i32>,
    marked: Vec<VertexId>,
    center: Option<VertexId>,
}

impl BaseChain {
    /// Builds a chain from explicit rows. Duplicate targets in a row are
    /// merged; the result is validated for exact row sums and sink access.
    pub fn from_rows(
        label: impl Into<String>,
        rows: Vec<Vec<(VertexId, u32)>>,
        denominators: Vec<u32>,
    ) -> Result<Self, ChainError> {
        if rows.is_empty() {
            return Err(ChainError::Empty);
        }
        if rows.len() >= u32::MAX as usize {
            return Err(ChainError::TooLarge(rows.len().to_string()));
        }
        assert_eq!(rows.len(), denominators.len(), "one denominator per row");
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut edges = Vec::new();
        row_start.push(0);
        for (v, row) in rows.into_iter().enumerate() {
            let mut merged: Vec<Edge> = Vec::with_capacity(row.len());
            for (target, weight) in row {
                if weight == 0 {
                    continue;
                }
                if !target.is_sink() && target.index() >= n {
                    return Err(ChainError::BadTarget { vertex: v as u32, target: target.0 });
                }
                match merged.iter_mut().find(|e| e.target == target) {
                    Some(e) => e.weight += weight,
                    None => merged.push(Edge { target, weight }),
                }
            }
            let sum: u64 = merged.iter().map(|e| e.weight as u64).sum();
            if sum != denominators[v] as u64 {
                return Err(ChainError::WeightSum { vertex: v as u32, sum, den: denominators[v] });
            }
            edges.extend(merged);
            row_start.push(edges.len() as u32);
        }
        let chain = BaseChain {
            label: label.into(),
            row_start,
            edges,
            denominators,
            dim: 0,
            coords: Vec::new(),
            marked: Vec::new(),
            center: None,
        };
        chain.validate_sink_access()?;
        Ok(chain)
    }

    fn with_geometry(mut self, dim: usize, coords: Vec<i32>, center: Option<VertexId>) -> Self {
        debug_assert_eq!(coords.len(), dim * self.num_vertices());
        self.dim = dim;
        self.coords = coords;
        self.center = center;
        self
    }

    fn validate_sink_access(&self) -> Result<(), ChainError> {
        let n = self.num_vertices();
        let mut reverse: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut reached = vec![false; n];
        let mut queue = VecDeque::new();
        for v in 0..n {
            for e in self.edges(VertexId(v as u32)) {
                if e.target.is_sink() {
                    if !reached[v] {
                        reached[v] = true;
                        queue.push_back(v);
                    }
                } else {
                    reverse[e.target.index()].push(v as u32);
                }
            }
        }
        while let Some(w) = queue.pop_front() {
            for &v in &reverse[w] {
                if !reached[v as usize] {
                    reached[v as usize] = true;
                    queue.push_back(v as usize);
                }
            }
        }
        match reached.iter().position(|&r| !r) {
            Some(v) => Err(ChainError::SinkUnreachable(v as u32)),
            None => Ok(()),
        }
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.denominators.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.num_vertices() as u32).map(VertexId)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn edges(&self, v: VertexId) -> &[Edge] {
        let i = v.index();
        &self.edges[self.row_start[i] as usize..self.row_start[i + 1] as usize]
    }

    #[inline]
    pub fn denominator(&self, v: VertexId) -> u32 {
        self.denominators[v.index()]
    }

    /// Probability P(v, w) as a float; `w` may be the sink.
    pub fn probability(&self, v: VertexId, w: VertexId) -> f64 {
        let num = self.edges(v).iter().find(|e| e.target == w).map_or(0, |e| e.weight);
        num as f64 / self.denominator(v) as f64
    }

    /// Maps a uniform `y` in [0, 1) to a target drawn from P(v, .).
    #[inline]
    pub fn step_target(&self, v: VertexId, y: f64) -> VertexId {
        let edges = self.edges(v);
        let den = self.denominators[v.index()];
        let pick = ((y * den as f64) as u32).min(den - 1);
        if let [a, b] = edges {
            return if pick < a.weight { a.target } else { b.target };
        }
        let mut acc = 0;
        for e in edges {
            acc += e.weight;
            if pick < acc {
                return e.target;
            }
        }
        edges[edges.len() - 1].target
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self, v: VertexId) -> Option<&[i32]> {
        if self.dim == 0 {
            return None;
        }
        let i = v.index() * self.dim;
        Some(&self.coords[i..i + self.dim])
    }

    /// Distinguished vertex used by central driving (origin, root, ...).
    pub fn center(&self) -> Option<VertexId> {
        self.center
    }

    /// Distinguished vertex set; for the wired tree, the neighbours of the sink.
    pub fn marked(&self) -> &[VertexId] {
        &self.marked
    }

    /// Two disconnected copies of `self`, each keeping its own sink access.
    pub fn disjoint_union(&self, other: &BaseChain) -> BaseChain {
        let shift = self.num_vertices() as u32;
        let mut rows = Vec::with_capacity(self.num_vertices() + other.num_vertices());
        let mut dens = Vec::with_capacity(rows.capacity());
        for (chain, offset) in [(self, 0), (other, shift)] {
            for v in chain.vertices() {
                rows.push(
                    chain
                        .edges(v)
                        .iter()
                        .map(|e| {
                            let t = if e.target.is_sink() { e.target } else { VertexId(e.target.0 + offset) };
                            (t, e.weight)
                        })
                        .collect(),
                );
                dens.push(chain.denominator(v));
            }
        }
        BaseChain::from_rows(format!("{}+{}", self.label, other.label), rows, dens)
            .expect("union of valid chains is valid")
    }

    /// JSON descriptor `{label, num_vertices, edges: [[from, to|"sink", num, den]], coords}`.
    pub fn to_descriptor(&self) -> Value {
        let mut edges = Vec::with_capacity(self.edges.len());
        for v in self.vertices() {
            for e in self.edges(v) {
                let to = if e.target.is_sink() { json!("sink") } else { json!(e.target.0) };
                edges.push(json!([v.0, to, e.weight, self.denominator(v)]));
            }
        }
        let coords = if self.dim == 0 {
            Value::Null
        } else {
            Value::Array(self.vertices().map(|v| json!(self.coords(v).unwrap())).collect())
        };
        json!({
            "label": self.label,
            "num_vertices": self.num_vertices(),
            "edges": edges,
            "coords": coords,
        })
    }

    pub fn from_descriptor(value: &Value) -> Result<Self, ChainError> {
        let bad = |m: &str| ChainError::Descriptor(m.to_string());
        let label = value["label"].as_str().ok_or_else(|| bad("label"))?;
        let n = value["num_vertices"].as_u64().ok_or_else(|| bad("num_vertices"))? as usize;
        let mut rows: Vec<Vec<(VertexId, u32)>> = vec![Vec::new(); n];
        let mut dens: Vec<Option<u32>> = vec![None; n];
        for edge in value["edges"].as_array().ok_or_else(|| bad("edges"))? {
            let e = edge.as_array().filter(|e| e.len() == 4).ok_or_else(|| bad("edge arity"))?;
            let from = e[0].as_u64().filter(|&f| (f as usize) < n).ok_or_else(|| bad("edge source"))?;
            let to = match &e[1] {
                Value::String(s) if s == "sink" => VertexId::SINK,
                v => VertexId(v.as_u64().ok_or_else(|| bad("edge target"))? as u32),
            };
            let num = e[2].as_u64().ok_or_else(|| bad("numerator"))? as u32;
            let den = e[3].as_u64().filter(|&d| d > 0).ok_or_else(|| bad("denominator"))? as u32;
            match dens[from as usize] {
                Some(d) if d != den => return Err(bad("inconsistent denominators")),
                _ => dens[from as usize] = Some(den),
            }
            rows[from as usize].push((to, num));
        }
        let dens = dens
            .into_iter()
            .enumerate()
            .map(|(v, d)| d.ok_or_else(|| ChainError::Descriptor(format!("vertex {v} has no edges"))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut chain = BaseChain::from_rows(label, rows, dens)?;
        if let Some(cs) = value["coords"].as_array() {
            let dim = cs.first().and_then(|c| c.as_array()).map_or(0, |c| c.len());
            let mut flat = Vec::with_capacity(dim * n);
            for c in cs {
                let c = c.as_array().filter(|c| c.len() == dim).ok_or_else(|| bad("coords"))?;
                for x in c {
                    flat.push(x.as_i64().ok_or_else(|| bad("coords"))? as i32);
                }
            }
            if flat.len() != dim * n {
                return Err(bad("coords length"));
            }
            chain = chain.with_geometry(dim, flat, None);
        }
        Ok(chain)
    }
}

/// Lattice points of Z^d in the open Euclidean ball |x| < r, sorted
/// lexicographically, with simple random walk and the outer boundary wired to
/// the sink.
pub fn build_ball(d: usize, r: f64) -> Result<BaseChain, ChainError> {
    if d == 0 {
        return Err(ChainError::ZeroDimension);
    }
    if !r.is_finite() || r < 1.0 {
        return Err(ChainError::BadRadius(r));
    }
    let r2 = r * r;
    let extent = r.ceil() as i32;
    let points = lattice_box(d, extent)
        .filter(|x| (x.iter().map(|&c| (c as i64) * (c as i64)).sum::<i64>() as f64) < r2)
        .collect::<Vec<_>>();
    let index: HashMap<&[i32], u32> = points.iter().enumerate().map(|(i, p)| (p.as_slice(), i as u32)).collect();
    let den = 2 * d as u32;
    let mut rows = Vec::with_capacity(points.len());
    let mut nb = vec![0i32; d];
    for p in &points {
        let mut row = Vec::with_capacity(2 * d);
        for axis in 0..d {
            for delta in [-1, 1] {
                nb.copy_from_slice(p);
                nb[axis] += delta;
                let t = index.get(nb.as_slice()).map_or(VertexId::SINK, |&i| VertexId(i));
                row.push((t, 1));
            }
        }
        rows.push(row);
    }
    let origin = index.get(vec![0i32; d].as_slice()).map(|&i| VertexId(i));
    let n = points.len();
    let coords = points.into_iter().flatten().collect();
    let label = format!("ball:d={d},r={r}");
    Ok(BaseChain::from_rows(label, rows, vec![den; n])?.with_geometry(d, coords, origin))
}

/// Discrete torus Z_n^d with the origin absorbing.
pub fn build_torus(d: usize, n: u32) -> Result<BaseChain, ChainError> {
    if d == 0 {
        return Err(ChainError::ZeroDimension);
    }
    if n < 2 {
        return Err(ChainError::BadSide(n));
    }
    let total = (n as u64).checked_pow(d as u32).filter(|&t| t < u32::MAX as u64);
    let total = total.ok_or_else(|| ChainError::TooLarge(format!("{n}^{d}")))? as usize;
    // lexicographic index of a point; the origin has index 0 and becomes the sink
    let encode = |x: &[i32]| x.iter().fold(0usize, |acc, &c| acc * n as usize + c as usize);
    let points: Vec<Vec<i32>> = (1..total)
        .map(|mut k| {
            let mut x = vec![0i32; d];
            for axis in (0..d).rev() {
                x[axis] = (k % n as usize) as i32;
                k /= n as usize;
            }
            x
        })
        .collect();
    let den = 2 * d as u32;
    let mut rows = Vec::with_capacity(points.len());
    let mut nb = vec![0i32; d];
    for p in &points {
        let mut row = Vec::with_capacity(2 * d);
        for axis in 0..d {
            for delta in [-1, 1] {
                nb.copy_from_slice(p);
                nb[axis] = (nb[axis] + delta).rem_euclid(n as i32);
                let k = encode(&nb);
                let t = if k == 0 { VertexId::SINK } else { VertexId(k as u32 - 1) };
                row.push((t, 1));
            }
        }
        rows.push(row);
    }
    let count = points.len();
    let coords = points.into_iter().flatten().collect();
    let label = format!("torus:d={d},n={n}");
    Ok(BaseChain::from_rows(label, rows, vec![den; count])?.with_geometry(d, coords, None))
}

/// Integer points of (-r, r) with nearest-neighbour walk killed at +-r.
pub fn build_interval(r: u32) -> Result<BaseChain, ChainError> {
    if r < 1 {
        return Err(ChainError::TooSmall { name: "r" });
    }
    let n = 2 * r - 1;
    let rows = (0..n)
        .map(|i| {
            let left = if i == 0 { VertexId::SINK } else { VertexId(i - 1) };
            let right = if i + 1 == n { VertexId::SINK } else { VertexId(i + 1) };
            vec![(left, 1), (right, 1)]
        })
        .collect();
    let coords = (0..n as i32).map(|i| i - (r as i32 - 1)).collect();
    let label = format!("interval:r={r}");
    Ok(BaseChain::from_rows(label, rows, vec![2; n as usize])?.with_geometry(1, coords, Some(VertexId(r - 1))))
}

/// Simple random walk on the path {0, ..., L} with the sink at L.
pub fn build_path(len: u32) -> Result<BaseChain, ChainError> {
    if len < 1 {
        return Err(ChainError::TooSmall { name: "L" });
    }
    let mut rows = Vec::with_capacity(len as usize);
    let mut dens = Vec::with_capacity(len as usize);
    for i in 0..len {
        let right = if i + 1 == len { VertexId::SINK } else { VertexId(i + 1) };
        if i == 0 {
            rows.push(vec![(right, 1)]);
            dens.push(1);
        } else {
            rows.push(vec![(VertexId(i - 1), 1), (right, 1)]);
            dens.push(2);
        }
    }
    let coords = (0..len as i32).collect();
    Ok(BaseChain::from_rows(format!("path:L={len}"), rows, dens)?.with_geometry(1, coords, Some(VertexId(0))))
}

/// Complete binary tree of depth n+1 whose 2^(n+1) leaves are collapsed into
/// the sink. Vertices are numbered in heap order (root 0, children 2i+1,
/// 2i+2); the 2^n sink neighbours are reported by [`BaseChain::marked`].
pub fn build_wired_tree(n: u32) -> Result<BaseChain, ChainError> {
    if n < 1 {
        return Err(ChainError::TooSmall { name: "n" });
    }
    if n >= 30 {
        return Err(ChainError::TooLarge(format!("2^{}", n + 1)));
    }
    let count = (1u32 << (n + 1)) - 1;
    let first_bottom = (1u32 << n) - 1;
    let mut rows = Vec::with_capacity(count as usize);
    let mut dens = Vec::with_capacity(count as usize);
    for i in 0..count {
        let mut row = Vec::with_capacity(3);
        if i > 0 {
            row.push((VertexId((i - 1) / 2), 1));
        }
        for c in [2 * i + 1, 2 * i + 2] {
            let t = if i >= first_bottom { VertexId::SINK } else { VertexId(c) };
            row.push((t, 1));
        }
        dens.push(row.len() as u32);
        rows.push(row);
    }
    let mut chain = BaseChain::from_rows(format!("tree:n={n}"), rows, dens)?;
    chain.center = Some(VertexId(0));
    chain.marked = (first_bottom..count).map(VertexId).collect();
    Ok(chain)
}

fn lattice_box(d: usize, extent: i32) -> impl Iterator<Item = Vec<i32>> {
    let side = (2 * extent + 1) as u64;
    (0..side.pow(d as u32)).map(move |mut k| {
        let mut x = vec![0i32; d];
        for axis in (0..d).rev() {
            x[axis] = (k % side) as i32 - extent;
            k /= side;
        }
        x
    })
}

/// True iff every vertex is reachable from `support` along positive-probability
/// edges that avoid the sink (each support vertex reaches itself).
pub fn check_thorough(chain: &BaseChain, support: &[VertexId]) -> bool {
    if support.is_empty() {
        return false;
    }
    let mut seen = vec![false; chain.num_vertices()];
    let mut queue = VecDeque::new();
    for &a in support {
        if !seen[a.index()] {
            seen[a.index()] = true;
            queue.push_back(a);
        }
    }
    while let Some(v) = queue.pop_front() {
        for e in chain.edges(v) {
            if !e.target.is_sink() && !seen[e.target.index()] {
                seen[e.target.index()] = true;
                queue.push_back(e.target);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball_count_brute(d: usize, r: f64) -> usize {
        let e = r.ceil() as i64;
        let mut count = 0;
        let mut x = vec![-e; d];
        loop {
            if (x.iter().map(|c| c * c).sum::<i64>() as f64) < r * r {
                count += 1;
            }
            let mut axis = 0;
            loop {
                if axis == d {
                    return count;
                }
                x[axis] += 1;
                if x[axis] > e {
                    x[axis] = -e;
                    axis += 1;
                } else {
                    break;
                }
            }
        }
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(build_ball(1, 3.0).unwrap().num_vertices(), 5);
        assert_eq!(build_ball(2, 3.0).unwrap().num_vertices(), 25);
        let tiny = build_ball(1, 1.0).unwrap();
        assert_eq!(tiny.num_vertices(), 1);
        assert_eq!(tiny.edges(VertexId(0)), &[Edge { target: VertexId::SINK, weight: 2 }]);
    }

    #[test]
    fn ball_matches_enumeration() {
        for d in 1..=3 {
            for r in [1.0, 1.5, 2.0, 3.7, 7.0, 12.0, 20.0] {
                if d == 3 && r > 12.0 {
                    continue;
                }
                assert_eq!(build_ball(d, r).unwrap().num_vertices(), ball_count_brute(d, r), "d={d} r={r}");
            }
        }
    }

    #[test]
    fn ball_rejects_bad_input() {
        assert_eq!(build_ball(0, 3.0), Err(ChainError::ZeroDimension));
        assert!(matches!(build_ball(2, f64::NAN), Err(ChainError::BadRadius(_))));
        assert!(matches!(build_ball(2, f64::INFINITY), Err(ChainError::BadRadius(_))));
        assert!(matches!(build_ball(2, 0.5), Err(ChainError::BadRadius(_))));
    }

    #[test]
    fn ball_origin_and_coords() {
        let b = build_ball(2, 3.0).unwrap();
        let o = b.center().unwrap();
        assert_eq!(b.coords(o).unwrap(), &[0, 0]);
        // lexicographic order
        let first = b.coords(VertexId(0)).unwrap().to_vec();
        assert_eq!(first, vec![-2, -2]);
    }

    #[test]
    fn ball_negation_symmetry() {
        let b = build_ball(2, 4.5).unwrap();
        let lookup: HashMap<Vec<i32>, VertexId> = b.vertices().map(|v| (b.coords(v).unwrap().to_vec(), v)).collect();
        for v in b.vertices() {
            let neg: Vec<i32> = b.coords(v).unwrap().iter().map(|c| -c).collect();
            let w = lookup[&neg];
            let sink_v = b.probability(v, VertexId::SINK);
            let sink_w = b.probability(w, VertexId::SINK);
            assert_eq!(sink_v, sink_w);
            assert_eq!(b.edges(v).len(), b.edges(w).len());
        }
    }

    #[test]
    fn torus_structure() {
        let t = build_torus(1, 4).unwrap();
        assert_eq!(t.num_vertices(), 3);
        let t = build_torus(2, 3).unwrap();
        assert_eq!(t.num_vertices(), 8);
        for v in t.vertices() {
            assert_eq!(t.denominator(v), 4);
            let total: u32 = t.edges(v).iter().map(|e| e.weight).sum();
            assert_eq!(total, 4);
            assert!(t.edges(v).iter().all(|e| e.weight == 1), "n=3 torus has 4 distinct neighbours");
        }
        assert_eq!(build_torus(2, 1), Err(ChainError::BadSide(1)));
    }

    #[test]
    fn interval_structure() {
        assert_eq!(build_interval(1).unwrap().num_vertices(), 1);
        assert_eq!(build_interval(3).unwrap().num_vertices(), 5);
        let i2 = build_interval(2).unwrap();
        // vertex index 2 is coordinate +1; stepping right exits
        assert_eq!(i2.coords(VertexId(2)).unwrap(), &[1]);
        assert_eq!(i2.step_target(VertexId(2), 0.75), VertexId::SINK);
        assert_eq!(i2.step_target(VertexId(2), 0.25), VertexId(1));
    }

    #[test]
    fn wired_tree_structure() {
        let t = build_wired_tree(1).unwrap();
        assert_eq!(t.num_vertices(), 3);
        assert_eq!(t.marked().len(), 2);
        let child = VertexId(1);
        assert_eq!(t.denominator(child), 3);
        assert_eq!(t.probability(child, VertexId(0)), 1.0 / 3.0);
        assert_eq!(t.probability(child, VertexId::SINK), 2.0 / 3.0);
        let t2 = build_wired_tree(2).unwrap();
        assert_eq!(t2.num_vertices(), 7);
        assert_eq!(t2.marked().len(), 4);
        assert!(build_wired_tree(40).is_err());
    }

    #[test]
    fn every_builder_sums_to_one_and_reaches_sink() {
        let chains = [
            build_ball(2, 6.3).unwrap(),
            build_ball(3, 3.0).unwrap(),
            build_torus(2, 5).unwrap(),
            build_torus(3, 2).unwrap(),
            build_interval(7).unwrap(),
            build_path(9).unwrap(),
            build_wired_tree(4).unwrap(),
        ];
        for c in &chains {
            for v in c.vertices() {
                let s: u32 = c.edges(v).iter().map(|e| e.weight).sum();
                assert_eq!(s, c.denominator(v), "{}", c.label());
            }
            assert!(c.validate_sink_access().is_ok());
        }
    }

    #[test]
    fn from_rows_validation() {
        let bad = BaseChain::from_rows("x", vec![vec![(VertexId(0), 1), (VertexId::SINK, 1)]], vec![3]);
        assert!(matches!(bad, Err(ChainError::WeightSum { .. })));
        let trapped = BaseChain::from_rows(
            "trap",
            vec![vec![(VertexId::SINK, 1)], vec![(VertexId(2), 1)], vec![(VertexId(1), 1)]],
            vec![1, 1, 1],
        );
        assert_eq!(trapped, Err(ChainError::SinkUnreachable(1)));
    }

    #[test]
    fn thoroughness() {
        let b = build_ball(2, 4.0).unwrap();
        assert!(check_thorough(&b, &[b.center().unwrap()]));
        let all: Vec<_> = b.vertices().collect();
        assert!(check_thorough(&b, &all));
        assert!(!check_thorough(&b, &[]));
        let two = build_interval(2).unwrap().disjoint_union(&build_interval(2).unwrap());
        assert!(!check_thorough(&two, &[VertexId(0)]));
        assert!(check_thorough(&two, &[VertexId(0), VertexId(4)]));
    }

    #[test]
    fn descriptor_round_trip() {
        let t = build_wired_tree(2).unwrap();
        let desc = t.to_descriptor();
        assert_eq!(desc["edges"][0], json!([0, 1, 1, 2]));
        let back = BaseChain::from_descriptor(&desc).unwrap();
        assert_eq!(back.num_vertices(), t.num_vertices());
        for v in t.vertices() {
            assert_eq!(back.edges(v), t.edges(v));
        }
        let b = build_ball(2, 2.0).unwrap();
        let back = BaseChain::from_descriptor(&b.to_descriptor()).unwrap();
        assert_eq!(back.coords(VertexId(3)), b.coords(VertexId(3)));
    }
}
