//! Hill estimator of the Pareto exponent from the top order statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hill estimate at a fixed number of tail observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    /// Pareto exponent.
    pub alpha_hat: f64,
    /// Tail index, `1 / alpha_hat`.
    pub xi_hat: f64,
    pub k_used: usize,
    pub n_local: usize,
    /// `alpha_hat / sqrt(k_used)`.
    pub se_alpha: f64,
    /// `Y_(K+1)`.
    pub order_stat_threshold: f64,
}

fn check_tail(sorted_desc: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Size("K must be at least 1".into()));
    }
    if k + 1 > sorted_desc.len() {
        return Err(Error::Size(format!(
            "K + 1 = {} exceeds sample length {}",
            k + 1,
            sorted_desc.len()
        )));
    }
    debug_assert!(sorted_desc.windows(2).all(|w| w[0] >= w[1]));
    let threshold = sorted_desc[k];
    if !(threshold > 0.0) {
        return Err(Error::NonpositiveThreshold { threshold });
    }
    Ok(threshold)
}

/// `log Y_(i) - log Y_(K+1)` for `i = 1..=K` on a descending sample.
pub fn log_spacings(sorted_desc: &[f64], k: usize) -> Result<Vec<f64>> {
    let threshold = check_tail(sorted_desc, k)?;
    let base = threshold.ln();
    Ok(sorted_desc[..k].iter().map(|y| y.ln() - base).collect())
}

/// Mean log-spacing, i.e. the Hill tail index. Errors if it is zero.
pub fn hill_xi(sorted_desc: &[f64], k: usize) -> Result<f64> {
    let spacings = log_spacings(sorted_desc, k)?;
    let xi = spacings.iter().sum::<f64>() / k as f64;
    if xi > 0.0 {
        Ok(xi)
    } else {
        Err(Error::DegenerateSample { count: k + 1 })
    }
}

/// Hill estimate of the Pareto exponent from the `K + 1` largest values
/// of a descending-sorted sample.
pub fn hill_alpha(sorted_desc: &[f64], k: usize) -> Result<TailEstimate> {
    let xi_hat = hill_xi(sorted_desc, k)?;
    let alpha_hat = 1.0 / xi_hat;
    Ok(TailEstimate {
        alpha_hat,
        xi_hat,
        k_used: k,
        n_local: sorted_desc.len(),
        se_alpha: alpha_hat / (k as f64).sqrt(),
        order_stat_threshold: sorted_desc[k],
    })
}
