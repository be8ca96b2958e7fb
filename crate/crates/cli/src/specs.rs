//! Parsers for the compact chain, rate and driving specs.

use std::collections::BTreeMap;
use std::fs;
use std::str::FromStr;

use arw_core::chains::{build_ball, build_interval, build_path, build_torus, build_wired_tree, BaseChain};
use arw_core::process::DrivingSpec;
use arw_core::{Rate, SleepRates, VertexId};

/// A built chain together with the parameters it was built from.
pub struct ChainInfo {
    pub chain: BaseChain,
    pub kind: String,
    pub dim: usize,
    /// Radius for balls and intervals, side for tori, depth for trees, length for paths.
    pub size: f64,
}

fn fields(spec: &str) -> Result<(String, BTreeMap<String, String>), String> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut map = BTreeMap::new();
    for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| format!("expected key=value in chain spec, got {pair:?}"))?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(format!("duplicate key {k:?} in chain spec"));
        }
    }
    Ok((kind.trim().to_string(), map))
}

fn take<T: FromStr>(map: &mut BTreeMap<String, String>, keys: &[&str], kind: &str) -> Result<T, String> {
    for k in keys {
        if let Some(v) = map.remove(*k) {
            return v.parse().map_err(|_| format!("bad value {v:?} for {k} in {kind} spec"));
        }
    }
    Err(format!("{kind} spec needs {}", keys[0]))
}

/// `ball:d=2,r=30`, `torus:d=2,n=10`, `interval:r=200`, `tree:n=10`, `path:L=64`.
pub fn parse_chain(spec: &str) -> Result<ChainInfo, String> {
    let (kind, mut map) = fields(spec)?;
    let info = match kind.as_str() {
        "ball" => {
            let d: usize = take(&mut map, &["d"], "ball")?;
            let r: f64 = take(&mut map, &["r"], "ball")?;
            ChainInfo { chain: build_ball(d, r).map_err(|e| e.to_string())?, kind, dim: d, size: r }
        }
        "torus" => {
            let d: usize = take(&mut map, &["d"], "torus")?;
            let n: u32 = take(&mut map, &["n"], "torus")?;
            ChainInfo { chain: build_torus(d, n).map_err(|e| e.to_string())?, kind, dim: d, size: n as f64 }
        }
        "interval" => {
            let r: u32 = take(&mut map, &["r"], "interval")?;
            ChainInfo { chain: build_interval(r).map_err(|e| e.to_string())?, kind, dim: 1, size: r as f64 }
        }
        "tree" => {
            let n: u32 = take(&mut map, &["n"], "tree")?;
            ChainInfo { chain: build_wired_tree(n).map_err(|e| e.to_string())?, kind, dim: 1, size: n as f64 }
        }
        "path" => {
            let l: u32 = take(&mut map, &["L", "l", "len"], "path")?;
            ChainInfo { chain: build_path(l).map_err(|e| e.to_string())?, kind, dim: 1, size: l as f64 }
        }
        other => return Err(format!("unknown chain kind {other:?} (ball, torus, interval, tree, path)")),
    };
    if let Some(k) = map.keys().next() {
        return Err(format!("unknown key {k:?} in chain spec {spec:?}"));
    }
    Ok(info)
}

/// A scalar rate (`inf` allowed) or a file of per-vertex rates, optionally
/// prefixed `file:`.
pub fn parse_lambda(spec: &str, n: usize) -> Result<SleepRates, String> {
    if let Some(path) = spec.strip_prefix("file:") {
        return rates_file(path, n);
    }
    match Rate::from_str(spec) {
        Ok(r) => Ok(SleepRates::constant(n, r)),
        Err(_) if std::path::Path::new(spec).is_file() => rates_file(spec, n),
        Err(e) => Err(e.to_string()),
    }
}

fn rates_file(path: &str, n: usize) -> Result<SleepRates, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read rates file {path}: {e}"))?;
    SleepRates::parse_list(&text, n).map_err(|e| e.to_string())
}

/// A scalar rate only.
pub fn parse_scalar_rate(spec: &str) -> Result<Rate, String> {
    Rate::from_str(spec).map_err(|e| e.to_string())
}

/// `central[:v]`, `uniform`, `permutation[:list]`, `custom:list` or
/// `file:PATH` (a whitespace or comma separated vertex list, repeated).
pub fn parse_driving(spec: &str) -> Result<DrivingSpec, String> {
    if let Some(path) = spec.strip_prefix("file:") {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read driving file {path}: {e}"))?;
        let list = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<u32>().map(VertexId).map_err(|_| format!("bad vertex {t:?} in {path}")))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(DrivingSpec::Custom(list));
    }
    spec.parse().map_err(|e: arw_core::process::ProcessError| e.to_string())
}

/// Comma separated values; integers also accept `a..b` (inclusive) ranges.
pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>, String> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| format!("bad list entry {t:?}")))
        .collect()
}

pub fn parse_grid(text: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in text.split(',').filter(|t| !t.trim().is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| format!("bad range {part:?}"))?;
                let b: u64 = b.trim().parse().map_err(|_| format!("bad range {part:?}"))?;
                out.extend(a..=b);
            }
            None => out.push(part.trim().parse().map_err(|_| format!("bad grid entry {part:?}"))?),
        }
    }
    Ok(out)
}
