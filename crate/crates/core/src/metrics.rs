//! Run-quality metrics and the exact Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("best-known fitness must be positive, got {0}")]
    NonPositiveBest(f64),
    #[error("fitness {fitness} exceeds best-known fitness {best}")]
    FitnessExceedsBest { fitness: f64, best: f64 },
    #[error("input is empty")]
    EmptyInput,
    #[error("sample lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("tolerance must be non-negative, got {0}")]
    NegativeTolerance(f64),
}

/// Percentage relative error of `fitness` against `best`.
pub fn pre(fitness: f64, best: f64) -> Result<f64, MetricsError> {
    if !(best > 0.0) {
        return Err(MetricsError::NonPositiveBest(best));
    }
    if fitness > best {
        return Err(MetricsError::FitnessExceedsBest { fitness, best });
    }
    Ok((best - fitness) / best * 100.0)
}

/// Mean of per-run PRE values.
pub fn apre(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Fraction of runs whose best fitness is within `tolerance` of `best`.
pub fn success_rate(per_run_best: &[f64], best: f64, tolerance: f64) -> Result<f64, MetricsError> {
    if per_run_best.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(tolerance >= 0.0) {
        return Err(MetricsError::NegativeTolerance(tolerance));
    }
    let hits = per_run_best
        .iter()
        .filter(|&&f| best - f <= tolerance)
        .count();
    Ok(hits as f64 / per_run_best.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Smaller of the positive and negative signed-rank sums.
    pub w_statistic: f64,
    /// Number of non-zero differences.
    pub n_effective: usize,
    pub p_two_sided: f64,
}

/// Ranks of `values` (1-based), averaging over ties.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean of ranks i+1..=j+1
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Exact two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and tied magnitudes get average ranks. The
/// null distribution of the positive rank sum is counted over all `2^n`
/// sign assignments of the (tied) rank vector; since every rank is a multiple
/// of one half the count runs over integer half-rank sums. The p-value is
/// twice the lower tail at the observed statistic, capped at 1. With no
/// non-zero difference the p-value is 1.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(WilcoxonResult {
            w_statistic: 0.0,
            n_effective: 0,
            p_two_sided: 1.0,
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let half_ranks: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();

    let positive: usize = diffs
        .iter()
        .zip(&half_ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total: usize = half_ranks.iter().sum();
    let observed = positive.min(total - positive);

    // distribution of the positive half-rank sum; each sign has weight 1/2
    let mut dist = vec![0.0f64; total + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for &r in &half_ranks {
        for s in (0..=reach).rev() {
            let p = dist[s] * 0.5;
            dist[s] = p;
            dist[s + r] += p;
        }
        reach += r;
    }
    let lower_tail: f64 = dist[..=observed].iter().sum();

    Ok(WilcoxonResult {
        w_statistic: observed as f64 / 2.0,
        n_effective: diffs.len(),
        p_two_sided: (2.0 * lower_tail).min(1.0),
    })
}
