use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("sleep rate must be in [0, inf], got {0}")]
    OutOfRange(f64),
    #[error("cannot parse sleep rate {0:?}")]
    Parse(String),
    #[error("expected {expected} per-vertex rates, got {got}")]
    Length { expected: usize, got: usize },
}

/// A single sleep rate in [0, inf].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Rate(f64);

impl Rate {
    pub const ZERO: Rate = Rate(0.0);
    pub const INFINITE: Rate = Rate(f64::INFINITY);

    pub fn new(lambda: f64) -> Result<Self, RateError> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(RateError::OutOfRange(lambda));
        }
        Ok(Rate(lambda))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Sleep probability q = lambda / (1 + lambda), exactly 1 at infinity.
    pub fn sleep_probability(self) -> f64 {
        if self.0.is_infinite() {
            1.0
        } else {
            self.0 / (1.0 + self.0)
        }
    }
}

impl FromStr for Rate {
    type Err = RateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Rate::INFINITE),
            other => Rate::new(other.parse::<f64>().map_err(|_| RateError::Parse(s.to_string()))?),
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Per-vertex sleep rates together with the derived sleep probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct SleepRates {
    rates: Vec<Rate>,
    sleep_prob: Vec<f64>,
}

impl SleepRates {
    pub fn new(rates: Vec<Rate>) -> Self {
        let sleep_prob = rates.iter().map(|r| r.sleep_probability()).collect();
        SleepRates { rates, sleep_prob }
    }

    pub fn constant(n: usize, rate: Rate) -> Self {
        Self::new(vec![rate; n])
    }

    pub fn from_values(values: &[f64]) -> Result<Self, RateError> {
        Ok(Self::new(values.iter().map(|&l| Rate::new(l)).collect::<Result<_, _>>()?))
    }

    /// Parses whitespace/comma separated rates (`inf` allowed), one per vertex.
    pub fn parse_list(text: &str, expected: usize) -> Result<Self, RateError> {
        let rates = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(Rate::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        if rates.len() != expected {
            return Err(RateError::Length { expected, got: rates.len() });
        }
        Ok(Self::new(rates))
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    #[inline]
    pub fn rate(&self, v: usize) -> Rate {
        self.rates[v]
    }

    #[inline]
    pub fn sleep_probability(&self, v: usize) -> f64 {
        self.sleep_prob[v]
    }

    pub fn rates(&self) -> &[Rate] {
        &self.rates
    }

    /// `Some(rate)` when every vertex shares one rate.
    pub fn as_constant(&self) -> Option<Rate> {
        let first = *self.rates.first()?;
        self.rates.iter().all(|&r| r == first).then_some(first)
    }

    pub fn describe(&self) -> String {
        match self.as_constant() {
            Some(r) => r.to_string(),
            None => self.rates.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","),
        }
    }
}
