//! Regret statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to cumulative regret before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// Number of default checkpoints.
pub const DEFAULT_CHECKPOINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sublinearity {
    /// `Reg(K)/K ≤ 0.6 · Reg(K/10)/(K/10)`.
    pub ratio_pass: bool,
    /// `(Reg(K)/K) / (Reg(K/10)/(K/10))`; zero for an all-zero trace.
    pub ratio: f64,
    /// Log-log slope of cumulative regret against episode count.
    pub alpha: f64,
    pub checkpoints: Vec<usize>,
}

/// `n` episode counts spaced geometrically from `K/10` to `K`, deduplicated.
pub fn default_checkpoints(k: usize, n: usize) -> Vec<usize> {
    let lo = (k / 10).max(1) as f64;
    let hi = k as f64;
    let mut out: Vec<usize> = (0..n)
        .map(|i| {
            let t = if n == 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
            (lo * (hi / lo).powf(t)).round() as usize
        })
        .collect();
    out.dedup();
    out
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Ratio test and growth exponent of a cumulative-regret trace
/// (`trace[k-1] = Reg(k)`). Checkpoints are 1-based episode counts.
pub fn sublinearity_test(trace: &[f64], checkpoints: Option<&[usize]>) -> Result<Sublinearity> {
    let k = trace.len();
    if k < 10 {
        return Err(Error::Input(format!("need at least 10 episodes for the ratio test, got {k}")));
    }
    let cps = checkpoints.map_or_else(|| default_checkpoints(k, DEFAULT_CHECKPOINTS), <[usize]>::to_vec);
    if cps.len() < 5 {
        return Err(Error::Input(format!("the growth fit needs at least 5 checkpoints, got {}", cps.len())));
    }
    if let Some(&bad) = cps.iter().find(|&&c| c == 0 || c > k) {
        return Err(Error::Input(format!("checkpoint {bad} outside 1..={k}")));
    }
    let tenth = k / 10;
    let early = trace[tenth - 1] / tenth as f64;
    let late = trace[k - 1] / k as f64;
    if trace.iter().all(|&r| r <= 0.0) {
        return Ok(Sublinearity { ratio_pass: true, ratio: 0.0, alpha: 0.0, checkpoints: cps });
    }
    let ratio = if early > 0.0 { late / early } else { f64::INFINITY };
    let x: Vec<f64> = cps.iter().map(|&c| (c as f64).ln()).collect();
    let y: Vec<f64> = cps.iter().map(|&c| trace[c - 1].max(LOG_FLOOR).ln()).collect();
    Ok(Sublinearity { ratio_pass: late <= 0.6 * early, ratio, alpha: slope(&x, &y), checkpoints: cps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn distribution(values: &[f64]) -> Option<Distribution> {
    if values.is_empty() {
        return None;
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let (q1, q3) = (quantile(&s, 0.25), quantile(&s, 0.75));
    Some(Distribution {
        n: s.len(),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        median: quantile(&s, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
        min: s[0],
        max: s[s.len() - 1],
    })
}

/// Pointwise mean of equal-length traces.
pub fn mean_trace(traces: &[Vec<f64>]) -> Vec<f64> {
    let Some(len) = traces.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    (0..len).map(|i| traces.iter().map(|t| t[i]).sum::<f64>() / traces.len() as f64).collect()
}
