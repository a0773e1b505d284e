//! Data-driven choice of the number of tail observations `K`.
//!
//! The scaled log-spacings `Z_i = i * log(Y_(i) / Y_(i+1))` are i.i.d.
//! exponential with mean `xi` under an exact Pareto tail. An antisymmetric
//! weighted sum of them, studentized by the Hill estimate, is then roughly
//! standard normal. `C_K` is a centered moving RMS of that statistic, and
//! the selected `K` is the smallest candidate from which `C_t > 1` holds for
//! every larger candidate `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K_MIN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KDiagnostic {
    pub k: usize,
    pub t_stat: f64,
    pub c_stat: f64,
    /// Half-width `floor(k / 2)` of the moving window.
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k_star: usize,
    pub diagnostics: Vec<KDiagnostic>,
    /// No candidate satisfied the rule; `k_star` is `k_max`.
    pub fallback_used: bool,
}

/// Default candidate range `[5, floor(I/2) - 1]` for a local sample of length `n`.
pub fn default_k_range(n: usize) -> (usize, usize) {
    (DEFAULT_K_MIN, (n / 2).saturating_sub(1))
}

/// `Z_i = i * log(Y_(i) / Y_(i+1))` for `i = 1..=K`.
pub fn spacing_statistics(sorted_desc: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 || k + 1 > sorted_desc.len() {
        return Err(Error::Size(format!(
            "K = {k} needs 1 <= K and K + 1 <= {}",
            sorted_desc.len()
        )));
    }
    let threshold = sorted_desc[k];
    if !(threshold > 0.0) {
        return Err(Error::NonpositiveThreshold { threshold });
    }
    Ok((0..k)
        .map(|i| (i + 1) as f64 * (sorted_desc[i].ln() - sorted_desc[i + 1].ln()))
        .collect())
}

/// Antisymmetric weights `w_i = K - 2i + 1`.
pub fn weights(k: usize) -> Result<Vec<i64>> {
    if k < 2 {
        return Err(Error::Size(format!("weights need K >= 2, got {k}")));
    }
    let k = k as i64;
    Ok((1..=k).map(|i| k - 2 * i + 1).collect())
}

/// `sum w_i^2 = K (K^2 - 1) / 3`.
fn weight_energy(k: usize) -> f64 {
    let k = k as f64;
    k * (k * k - 1.0) / 3.0
}

/// Studentized weighted spacing statistic from precomputed `Z` and `xi`.
pub fn t_from_spacings(z: &[f64], xi_hat: f64) -> Result<f64> {
    if !(xi_hat > 0.0) {
        return Err(Error::DegenerateSample { count: z.len() + 1 });
    }
    let w = weights(z.len())?;
    let u: f64 = w.iter().zip(z).map(|(&w, &z)| w as f64 * z).sum();
    Ok(u / (weight_energy(z.len()).sqrt() * xi_hat))
}

/// `T_K`, studentized by the Hill tail index at the same `K`.
pub fn t_statistic(sorted_desc: &[f64], k: usize) -> Result<f64> {
    let z = spacing_statistics(sorted_desc, k)?;
    let xi = z.iter().sum::<f64>() / k as f64;
    if !(xi > 0.0) {
        return Err(Error::DegenerateSample { count: k + 1 });
    }
    t_from_spacings(&z, xi)
}

/// Smallest candidate whose whole upper tail of `c` values exceeds one.
/// `None` when the largest candidate already fails.
pub fn smallest_stable_k(candidates: &[usize], c: &[f64]) -> Option<usize> {
    let mut best = None;
    for (&k, &cv) in candidates.iter().zip(c).rev() {
        if cv > 1.0 {
            best = Some(k);
        } else {
            break;
        }
    }
    best
}

/// Evaluates `T_K` and `C_K` on `[k_min, k_max]` and applies the selection rule.
pub fn select_k(sorted_desc: &[f64], k_min: usize, k_max: usize) -> Result<KSelection> {
    if k_min < 2 || k_min >= k_max || k_max + 1 > sorted_desc.len() {
        return Err(Error::Size(format!(
            "candidate range [{k_min}, {k_max}] invalid for sample of length {}",
            sorted_desc.len()
        )));
    }
    let z = spacing_statistics(sorted_desc, k_max)?;

    // T_K from prefix sums: U_K = (K + 1) S_K - 2 sum_{i<=K} i Z_i.
    let mut t = Vec::with_capacity(k_max - k_min + 1);
    let (mut s, mut s_weighted) = (0.0, 0.0);
    for (idx, &zi) in z.iter().enumerate() {
        let i = idx + 1;
        s += zi;
        s_weighted += i as f64 * zi;
        if i >= k_min {
            let xi = s / i as f64;
            if !(xi > 0.0) {
                return Err(Error::DegenerateSample { count: i + 1 });
            }
            let u = (i + 1) as f64 * s - 2.0 * s_weighted;
            t.push(u / (weight_energy(i).sqrt() * xi));
        }
    }

    let mut sq_prefix = Vec::with_capacity(t.len() + 1);
    sq_prefix.push(0.0);
    for v in &t {
        sq_prefix.push(sq_prefix.last().unwrap() + v * v);
    }

    let candidates: Vec<usize> = (k_min..=k_max).collect();
    let mut diagnostics = Vec::with_capacity(candidates.len());
    for (pos, &k) in candidates.iter().enumerate() {
        let window = k / 2;
        let lo = k.saturating_sub(window).max(k_min) - k_min;
        let hi = (k + window).min(k_max) - k_min;
        let mean_sq = (sq_prefix[hi + 1] - sq_prefix[lo]) / (hi - lo + 1) as f64;
        diagnostics.push(KDiagnostic {
            k,
            t_stat: t[pos],
            c_stat: mean_sq.max(0.0).sqrt(),
            window,
        });
    }

    let c: Vec<f64> = diagnostics.iter().map(|d| d.c_stat).collect();
    let (k_star, fallback_used) = match smallest_stable_k(&candidates, &c) {
        Some(k) => (k, false),
        None => (k_max, true),
    };
    Ok(KSelection {
        k_star,
        diagnostics,
        fallback_used,
    })
}
