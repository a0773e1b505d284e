//! Bandwidth-based comparator and quantile-based descriptive statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hill::hill_alpha;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthEstimate {
    pub alpha_hat: f64,
    pub se_alpha: f64,
    pub k_used: usize,
    pub bandwidth: f64,
    /// Observations with `|X - x0| <= b`.
    pub n_selected: usize,
}

/// The `m` largest values, sorted descending.
pub fn top_descending(mut values: Vec<f64>, m: usize) -> Vec<f64> {
    if m == 0 {
        return Vec::new();
    }
    if m < values.len() {
        values.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a));
        values.truncate(m);
    }
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Hill estimate on every response whose scalar covariate lies within `b` of `x0`.
pub fn gardes_estimate(
    data: &[(f64, f64)],
    x0: f64,
    b: f64,
    k: usize,
) -> Result<BandwidthEstimate> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("bandwidth must be positive, got {b}")));
    }
    if k == 0 {
        return Err(Error::Size("K must be at least 1".into()));
    }
    let selected: Vec<f64> = data
        .iter()
        .filter(|(_, x)| (x - x0).abs() <= b)
        .map(|&(y, _)| y)
        .collect();
    let n_selected = selected.len();
    if n_selected < k + 1 {
        return Err(Error::InsufficientNeighborhood {
            selected: n_selected,
            needed: k + 1,
        });
    }
    let top = top_descending(selected, k + 1);
    let est = hill_alpha(&top, k)?;
    Ok(BandwidthEstimate {
        alpha_hat: est.alpha_hat,
        se_alpha: est.se_alpha,
        k_used: k,
        bandwidth: b,
        n_selected,
    })
}

/// Inverse empirical CDF (type 1) on an ascending-sorted slice.
pub fn quantile_sorted(sorted_asc: &[f64], p: f64) -> f64 {
    let n = sorted_asc.len();
    let idx = (n as f64 * p).ceil() as usize;
    sorted_asc[idx.clamp(1, n) - 1]
}

fn sorted_copy(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyData("no values".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `((Q.9 - Q.5) - (Q.5 - Q.1)) / (Q.9 - Q.1)`
pub fn kelly_skewness(values: &[f64]) -> Result<f64> {
    let v = sorted_copy(values)?;
    kelly_sorted(&v)
}

fn kelly_sorted(v: &[f64]) -> Result<f64> {
    let (q1, q5, q9) = (
        quantile_sorted(v, 0.1),
        quantile_sorted(v, 0.5),
        quantile_sorted(v, 0.9),
    );
    if !(q9 > q1) {
        return Err(Error::DegenerateSpread("Q.9 equals Q.1".into()));
    }
    Ok(((q9 - q5) - (q5 - q1)) / (q9 - q1))
}

/// `(Q.975 - Q.025) / (Q.75 - Q.25)`; about 2.91 for a normal law.
pub fn crow_siddiqui(values: &[f64]) -> Result<f64> {
    let v = sorted_copy(values)?;
    crow_siddiqui_sorted(&v)
}

fn crow_siddiqui_sorted(v: &[f64]) -> Result<f64> {
    let iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
    if !(iqr > 0.0) {
        return Err(Error::DegenerateSpread("zero interquartile range".into()));
    }
    Ok((quantile_sorted(v, 0.975) - quantile_sorted(v, 0.025)) / iqr)
}

pub const DEFAULT_MIN_BIN_COUNT: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub bin: usize,
    /// Quantile interval `[lower, upper)` of the conditioning variable.
    pub quantile_lower: f64,
    pub quantile_upper: f64,
    pub by_min: f64,
    pub by_max: f64,
    pub count: usize,
    pub std: Option<f64>,
    pub kelly_skewness: Option<f64>,
    pub crow_siddiqui: Option<f64>,
    /// Fewer than the minimum count, or degenerate quantile spread.
    pub flagged: bool,
}

/// Standard deviation, Kelly skewness and Crow-Siddiqui kurtosis of `y`
/// within quantile bins of the second coordinate.
pub fn binned_descriptives(
    data: &[(f64, f64)],
    n_bins: usize,
    min_count: usize,
) -> Result<Vec<DescriptiveRow>> {
    if n_bins == 0 {
        return Err(Error::Size("need at least one bin".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyData("no observations".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a].1.total_cmp(&data[b].1));
    let n = data.len();
    (0..n_bins)
        .map(|b| {
            let lo = b * n / n_bins;
            let hi = (b + 1) * n / n_bins;
            let idx = &order[lo..hi];
            let mut ys: Vec<f64> = idx.iter().map(|&i| data[i].0).collect();
            ys.sort_by(f64::total_cmp);
            let count = ys.len();
            let (by_min, by_max) = match (idx.first(), idx.last()) {
                (Some(&f), Some(&l)) => (data[f].1, data[l].1),
                _ => (f64::NAN, f64::NAN),
            };
            let mut row = DescriptiveRow {
                bin: b,
                quantile_lower: b as f64 / n_bins as f64,
                quantile_upper: (b + 1) as f64 / n_bins as f64,
                by_min,
                by_max,
                count,
                std: None,
                kelly_skewness: None,
                crow_siddiqui: None,
                flagged: count < min_count.max(2),
            };
            if !row.flagged {
                let m = ys.iter().sum::<f64>() / count as f64;
                let var = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (count - 1) as f64;
                row.std = Some(var.sqrt());
                row.kelly_skewness = kelly_sorted(&ys).ok();
                row.crow_siddiqui = crow_siddiqui_sorted(&ys).ok();
                row.flagged = row.kelly_skewness.is_none() || row.crow_siddiqui.is_none();
            }
            Ok(row)
        })
        .collect()
}
