//! Small statistics toolkit: exact binomial intervals, empirical laws over
//! sleeping configurations, total variation, bootstrap and least squares.

use std::collections::BTreeMap;

use rand::RngExt;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::seeds;

/// Exact (Clopper-Pearson) two-sided interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(k <= n && n > 0, "need 0 <= k <= n, n > 0");
    let alpha = 1.0 - level;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 { 0.0 } else { Beta::new(kf, nf - kf + 1.0).unwrap().inverse_cdf(alpha / 2.0) };
    let hi = if k == n { 1.0 } else { Beta::new(kf + 1.0, nf - kf).unwrap().inverse_cdf(1.0 - alpha / 2.0) };
    (lo, hi)
}

/// Counts of observed states, keyed by sleep mask.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EmpiricalLaw {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl EmpiricalLaw {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: u64) {
        *self.counts.entry(key).or_default() += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &EmpiricalLaw) {
        for (&k, &c) in &other.counts {
            *self.counts.entry(k).or_default() += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, key: u64) -> u64 {
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn frequency(&self, key: u64) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(key) as f64 / self.total as f64
        }
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn support(&self) -> usize {
        self.counts.len()
    }

    /// Plug-in total variation distance between two empirical laws.
    pub fn tv(&self, other: &EmpiricalLaw) -> f64 {
        let keys: std::collections::BTreeSet<u64> = self.counts.keys().chain(other.counts.keys()).copied().collect();
        0.5 * keys.iter().map(|&k| (self.frequency(k) - other.frequency(k)).abs()).sum::<f64>()
    }

    /// Total variation distance to an exact law given as probabilities.
    pub fn tv_to(&self, exact: &BTreeMap<u64, f64>) -> f64 {
        let keys: std::collections::BTreeSet<u64> = self.counts.keys().chain(exact.keys()).copied().collect();
        0.5 * keys.iter().map(|&k| (self.frequency(k) - exact.get(&k).copied().unwrap_or(0.0)).abs()).sum::<f64>()
    }
}

impl FromIterator<u64> for EmpiricalLaw {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        let mut law = EmpiricalLaw::new();
        for k in iter {
            law.add(k);
        }
        law
    }
}

/// Monte Carlo radius for the plug-in TV between two empirical laws: the
/// larger of `2 sqrt(K / (2 n))` over the joint support size `K` and the
/// smaller sample size `n`, and half the summed per-cell exact binomial
/// half-widths of both samples at `level`. Conservative by design.
pub fn tv_radius(a: &EmpiricalLaw, b: &EmpiricalLaw, level: f64) -> f64 {
    let keys: std::collections::BTreeSet<u64> = a.counts.keys().chain(b.counts.keys()).copied().collect();
    let n = a.total.min(b.total).max(1) as f64;
    let global = 2.0 * (keys.len() as f64 / (2.0 * n)).sqrt();
    let cell = |law: &EmpiricalLaw, k: u64| {
        if law.total == 0 {
            return 1.0;
        }
        let (lo, hi) = clopper_pearson(law.count(k), law.total, level);
        let p = law.frequency(k);
        (p - lo).max(hi - p)
    };
    let cells = 0.5 * keys.iter().map(|&k| cell(a, k) + cell(b, k)).sum::<f64>();
    global.max(cells)
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    (mean, (sample_variance(xs) / n).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Percentile bootstrap interval for `stat` at `level`.
pub fn bootstrap_ci(xs: &[f64], stat: impl Fn(&[f64]) -> f64, reps: usize, seed: u64, level: f64) -> (f64, f64) {
    let mut rng = seeds::rng(seed);
    let mut resample = vec![0.0; xs.len()];
    let mut values: Vec<f64> = (0..reps)
        .map(|_| {
            for slot in resample.iter_mut() {
                *slot = xs[rng.random_range(0..xs.len())];
            }
            stat(&resample)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (quantile_sorted(&values, tail), quantile_sorted(&values, 1.0 - tail))
}

/// Ordinary least squares fit `y = a + b x`; returns `(b, stderr(b))`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, f64::NAN);
    }
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_reference_values() {
        // k = 0: upper = 1 - (alpha/2)^(1/n)
        let (lo, hi) = clopper_pearson(0, 10, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-9);
        // symmetric case
        let (lo, hi) = clopper_pearson(5, 10, 0.95);
        assert!((lo + hi - 1.0).abs() < 1e-9);
        assert!((lo - 0.187_086_2).abs() < 1e-6);
        let (lo, hi) = clopper_pearson(10, 10, 0.99);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.005f64.powf(0.1)).abs() < 1e-9);
    }

    #[test]
    fn tv_basics() {
        let a: EmpiricalLaw = [0, 0, 1, 1].into_iter().collect();
        let b: EmpiricalLaw = [0, 0, 0, 2].into_iter().collect();
        assert!((a.tv(&b) - 0.5).abs() < 1e-12);
        assert_eq!(a.tv(&a), 0.0);
        let exact = BTreeMap::from([(0, 0.5), (1, 0.5)]);
        assert_eq!(a.tv_to(&exact), 0.0);
        assert!(tv_radius(&a, &b, 0.99) > 0.0);
    }

    #[test]
    fn quantiles_and_fits() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.25), 2.0);
        assert_eq!(quantile(&xs, 0.1), 1.4);
        let (m, se) = mean_stderr(&xs);
        assert_eq!(m, 3.0);
        assert!((se - (2.5f64 / 5.0).sqrt()).abs() < 1e-12);
        let y: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x).collect();
        let (b, sb) = ols_slope(&xs, &y);
        assert!((b - 2.0).abs() < 1e-12 && sb < 1e-9);
        let (lo, hi) = bootstrap_ci(&xs, |s| s.iter().sum::<f64>() / s.len() as f64, 500, 1, 0.9);
        assert!(lo <= 3.0 && 3.0 <= hi);
    }
}
