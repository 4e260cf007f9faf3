//! Paired Wilcoxon signed-rank test.
//!
//! Zero differences are dropped (the standard signed-rank convention;
//! conventions differ, so this is pinned here). Tied absolute
//! differences receive average ranks. Exact two-sided p-values come from
//! the full null distribution of the rank sum for n ≤ 20; larger n uses
//! the normal approximation with tie and continuity corrections.

use statrs::distribution::{ContinuousCDF, Normal};

use super::MetricError;

/// Sample-size boundary between the exact and approximate routes.
pub const WILCOXON_EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// Non-zero differences actually tested.
    pub n: usize,
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Sum of ranks of negative differences.
    pub w_minus: f64,
    /// min(w_plus, w_minus); the tested statistic.
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Whether the exact route produced the p-value.
    pub exact: bool,
}

/// Average ranks of `|values|` ascending, plus tie-group sizes.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    let mut ranks = vec![0.0f64; values.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && values[order[j]].abs() == values[order[i]].abs() {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        tie_sizes.push(j - i);
        i = j;
    }
    (ranks, tie_sizes)
}

/// Exact two-sided p: the probability, over all 2^n equiprobable sign
/// assignments, that min(W+, W−) is at most the observed statistic.
/// Computed by dynamic programming over doubled (integer) rank sums.
fn exact_p(ranks: &[f64], statistic: f64) -> f64 {
    let n = ranks.len();
    let scaled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = scaled.iter().sum();
    let mut dist = vec![0u64; total + 1];
    dist[0] = 1;
    for &r in &scaled {
        for s in (r..=total).rev() {
            dist[s] += dist[s - r];
        }
    }
    let threshold = (2.0 * statistic).round() as usize;
    let mut count: u64 = 0;
    for (s, c) in dist.iter().enumerate() {
        if s.min(total - s) <= threshold {
            count += c;
        }
    }
    count as f64 / (1u64 << n) as f64
}

fn approximate_p(statistic: f64, n: usize, tie_sizes: &[usize]) -> f64 {
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    // Continuity correction toward the mean; the statistic is the smaller
    // rank sum, so it sits at or below mu.
    let z = (statistic - mu + 0.5) / sigma;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * normal.cdf(z)).min(1.0)
}

/// Two-sided paired Wilcoxon signed-rank test.
pub fn wilcoxon_paired(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(MetricError::AllZeroDifferences);
    }
    let (ranks, tie_sizes) = average_ranks(&diffs);
    let mut w_plus = 0.0f64;
    let mut w_minus = 0.0f64;
    for (d, r) in diffs.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }
    let statistic = w_plus.min(w_minus);
    let n = diffs.len();
    let exact = n <= WILCOXON_EXACT_LIMIT;
    let p_value = if exact {
        exact_p(&ranks, statistic)
    } else {
        approximate_p(statistic, n, &tie_sizes)
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        statistic,
        p_value,
        exact,
    })
}
