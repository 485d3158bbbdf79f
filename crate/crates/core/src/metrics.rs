//! Aggregation of per-realization episode results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EpisodeTrace;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no realizations to summarize")]
    Empty,
    #[error("trajectory lengths differ: {0} vs {1}")]
    MismatchedSlots(usize, usize),
    #[error("reference method {0:?} not among the summaries")]
    MissingReference(String),
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// Mean and 95% half-width `1.96 s / √n`; the half-width is 0 for `n = 1`.
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).collect::<CompensatedSum>().value() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

/// Per-realization figures of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub realization: u64,
    pub total_throughput: f64,
    pub unmet_slots: usize,
    pub handovers: usize,
    pub fallbacks: usize,
    pub ping_pongs: usize,
    pub slots: usize,
}

impl RealizationResult {
    pub fn from_trace(trace: &EpisodeTrace, threshold: f64) -> Self {
        Self {
            realization: trace.realization,
            total_throughput: trace.total_throughput(),
            unmet_slots: trace.unmet_slots(threshold),
            handovers: trace.handovers(),
            fallbacks: trace.fallbacks(),
            ping_pongs: trace.ping_pongs(),
            slots: trace.slots(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub realizations: usize,
    /// M.
    pub slots: usize,
    pub mean_throughput: f64,
    pub ci_throughput: f64,
    pub mean_unmet: f64,
    pub ci_unmet: f64,
    pub mean_handovers: f64,
    pub ci_handovers: f64,
    pub mean_fallbacks: f64,
    pub ci_fallbacks: f64,
    pub mean_ping_pongs: f64,
}

/// Means and 95% half-widths over realizations. Permutation-invariant up to
/// summation rounding.
pub fn summarize(method: &str, results: &[RealizationResult]) -> Result<RunSummary, MetricsError> {
    let first = results.first().ok_or(MetricsError::Empty)?;
    if let Some(r) = results.iter().find(|r| r.slots != first.slots) {
        return Err(MetricsError::MismatchedSlots(first.slots, r.slots));
    }
    let stat = |f: fn(&RealizationResult) -> f64| mean_ci(&results.iter().map(f).collect::<Vec<_>>());
    let (mean_throughput, ci_throughput) = stat(|r| r.total_throughput);
    let (mean_unmet, ci_unmet) = stat(|r| r.unmet_slots as f64);
    let (mean_handovers, ci_handovers) = stat(|r| r.handovers as f64);
    let (mean_fallbacks, ci_fallbacks) = stat(|r| r.fallbacks as f64);
    Ok(RunSummary {
        method: method.to_string(),
        realizations: results.len(),
        slots: first.slots,
        mean_throughput,
        ci_throughput,
        mean_unmet,
        ci_unmet,
        mean_handovers,
        ci_handovers,
        mean_fallbacks,
        ci_fallbacks,
        mean_ping_pongs: stat(|r| r.ping_pongs as f64).0,
    })
}

/// One method's row in a comparison table, with deltas against the
/// reference method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub slots: usize,
    pub mean_throughput: f64,
    pub mean_unmet: f64,
    pub mean_handovers: f64,
    pub delta_throughput: f64,
    pub delta_unmet: f64,
    pub delta_handovers: f64,
}

pub fn compare(summaries: &[RunSummary], reference: &str) -> Result<Vec<ComparisonRow>, MetricsError> {
    let base = summaries
        .iter()
        .find(|s| s.method == reference)
        .ok_or_else(|| MetricsError::MissingReference(reference.to_string()))?;
    summaries
        .iter()
        .map(|s| {
            if s.slots != base.slots {
                return Err(MetricsError::MismatchedSlots(base.slots, s.slots));
            }
            Ok(ComparisonRow {
                method: s.method.clone(),
                slots: s.slots,
                mean_throughput: s.mean_throughput,
                mean_unmet: s.mean_unmet,
                mean_handovers: s.mean_handovers,
                delta_throughput: s.mean_throughput - base.mean_throughput,
                delta_unmet: s.mean_unmet - base.mean_unmet,
                delta_handovers: s.mean_handovers - base.mean_handovers,
            })
        })
        .collect()
}

/// One-sided exact sign test of `a > b` over paired samples. Ties are
/// dropped. Returns `(wins, losses, p)`.
pub fn paired_sign_test(a: &[f64], b: &[f64]) -> (usize, usize, f64) {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count();
    let losses = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let n = wins + losses;
    // P(X ≥ wins), X ~ Bin(n, 1/2), summed in log space
    let ln_choose = |k: usize| -> f64 { ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k) };
    let p = (wins..=n).map(|k| (ln_choose(k) - n as f64 * std::f64::consts::LN_2).exp()).sum::<f64>();
    (wins, losses, p.min(1.0))
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Paired test of two methods on the same realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub a: String,
    pub b: String,
    pub mean_difference: f64,
    pub ci_difference: f64,
    pub wins: usize,
    pub losses: usize,
    pub p_value: f64,
}

/// `metric` is compared per realization, `a > b` counting as a win for `a`.
pub fn paired_comparison(
    a_name: &str,
    a: &[RealizationResult],
    b_name: &str,
    b: &[RealizationResult],
    metric: fn(&RealizationResult) -> f64,
) -> PairedComparison {
    assert!(
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.realization == y.realization),
        "comparison needs the same realizations in the same order"
    );
    let ta: Vec<f64> = a.iter().map(metric).collect();
    let tb: Vec<f64> = b.iter().map(metric).collect();
    let diff: Vec<f64> = ta.iter().zip(&tb).map(|(x, y)| x - y).collect();
    let (mean_difference, ci_difference) = mean_ci(&diff);
    let (wins, losses, p_value) = paired_sign_test(&ta, &tb);
    PairedComparison { a: a_name.into(), b: b_name.into(), mean_difference, ci_difference, wins, losses, p_value }
}
