//! Histogram data for plots; no rendering.

use serde::Serialize;
use sigspike_core::stats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `counts / (total · width)`.
    pub density: Vec<f64>,
}

/// Freedman–Diaconis width `2·IQR·n^{-1/3}`; falls back to Sturges' rule
/// when the interquartile range vanishes.
pub fn freedman_diaconis_bins(xs: &[f64], max_bins: usize) -> usize {
    let n = xs.len();
    if n < 2 {
        return 1;
    }
    let (lo, hi) = range(xs);
    let iqr = stats::nearest_rank_quantile(xs, 0.75) - stats::nearest_rank_quantile(xs, 0.25);
    let bins = if iqr > 0.0 && hi > lo {
        let width = 2.0 * iqr / (n as f64).cbrt();
        ((hi - lo) / width).ceil() as usize
    } else {
        (n as f64).log2().ceil() as usize + 1
    };
    bins.clamp(1, max_bins.max(1))
}

fn range(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Equal-width edges covering every sample; bin count from the pooled data.
pub fn common_edges(samples: &[&[f64]], max_bins: usize) -> Vec<f64> {
    let pooled: Vec<f64> = samples.iter().flat_map(|s| s.iter().copied()).collect();
    let bins = freedman_diaconis_bins(&pooled, max_bins);
    let (mut lo, mut hi) = range(&pooled);
    if !(hi > lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

/// Bins are `[e_i, e_{i+1})`, the last one closed.
pub fn histogram(xs: &[f64], edges: &[f64]) -> Histogram {
    let bins = edges.len() - 1;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        if x < edges[0] || x > edges[bins] {
            continue;
        }
        let idx = edges.partition_point(|&e| e <= x).saturating_sub(1).min(bins - 1);
        counts[idx] += 1;
    }
    let total = xs.len().max(1) as f64;
    let density = counts.iter().zip(edges.windows(2)).map(|(&c, w)| c as f64 / (total * (w[1] - w[0]))).collect();
    Histogram { edges: edges.to_vec(), counts, density }
}
