//! Moment-existence tests, equality tests and confidence bounds.
//!
//! All procedures rest on `sqrt(K) (alpha_hat - alpha) -> N(0, alpha^2)` with
//! asymptotically independent estimates at distinct conditioning points.
//! The studentized statistic `sqrt(K) (alpha_hat - r) / sigma` drives every
//! decision by default. The variant with `sqrt(K)` in the denominator is
//! computed alongside for audit and can be selected with [`TestForm::AsPrinted`].

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestForm {
    /// `sqrt(K) (alpha - r) / sigma`.
    #[default]
    Studentized,
    /// `(alpha - r) / (sqrt(K) sigma)`.
    AsPrinted,
}

/// One-sided test of `H0: alpha > r` against `H1: alpha <= r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTest {
    pub r: f64,
    pub statistic: f64,
    /// Audit value with `sqrt(K)` dividing instead of multiplying.
    pub statistic_printed: f64,
    pub critical_value: f64,
    pub level: f64,
    pub p_value: f64,
    pub form: TestForm,
    pub reject: bool,
}

/// Two-sided test of `alpha(x0) = alpha(x1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualityTest {
    pub statistic: f64,
    pub statistic_printed: f64,
    pub critical_value: f64,
    pub level: f64,
    pub form: TestForm,
    pub reject: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub level: f64,
    pub one_sided: bool,
}

impl ConfidenceBound {
    pub fn contains(&self, value: f64) -> bool {
        self.lower.is_none_or(|l| l <= value) && self.upper.is_none_or(|u| value <= u)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

pub fn moment_test(
    alpha_hat: f64,
    sigma: f64,
    k: usize,
    r: f64,
    level: f64,
    form: TestForm,
) -> Result<MomentTest> {
    positive("alpha_hat", alpha_hat)?;
    positive("sigma", sigma)?;
    positive("r", r)?;
    unit_interval("level", level)?;
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let root_k = (k as f64).sqrt();
    let studentized = root_k * (alpha_hat - r) / sigma;
    let printed = (alpha_hat - r) / (root_k * sigma);
    let statistic = match form {
        TestForm::Studentized => studentized,
        TestForm::AsPrinted => printed,
    };
    let critical_value = normal_quantile(level);
    Ok(MomentTest {
        r,
        statistic: studentized,
        statistic_printed: printed,
        critical_value,
        level,
        p_value: normal_cdf(statistic),
        form,
        reject: statistic < critical_value,
    })
}

/// Equality test for estimates at two conditioning points sharing `K`.
pub fn equality_test(
    alpha0: f64,
    alpha1: f64,
    k0: usize,
    k1: usize,
    level: f64,
    form: TestForm,
) -> Result<EqualityTest> {
    positive("alpha0", alpha0)?;
    positive("alpha1", alpha1)?;
    unit_interval("level", level)?;
    if k0 != k1 {
        return Err(Error::Usage(format!(
            "equality test needs a common K, got {k0} and {k1}"
        )));
    }
    if k0 == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let root_k = (k0 as f64).sqrt();
    let spread = (alpha0 * alpha0 + alpha1 * alpha1).sqrt();
    let diff = (alpha0 - alpha1).abs();
    let studentized = root_k * diff / spread;
    let printed = diff / (root_k * spread);
    let statistic = match form {
        TestForm::Studentized => studentized,
        TestForm::AsPrinted => printed,
    };
    let critical_value = normal_quantile(1.0 - level / 2.0);
    Ok(EqualityTest {
        statistic: studentized,
        statistic_printed: printed,
        critical_value,
        level,
        form,
        reject: statistic > critical_value,
    })
}

/// Wald bounds `alpha_hat +/- z * sigma / sqrt(K)`. `level` is the coverage
/// (e.g. 0.95). The one-sided variant is an upper bound; lower bounds are
/// truncated at zero.
pub fn confidence_bounds(
    alpha_hat: f64,
    sigma: f64,
    k: usize,
    level: f64,
    one_sided: bool,
) -> Result<ConfidenceBound> {
    positive("alpha_hat", alpha_hat)?;
    positive("sigma", sigma)?;
    unit_interval("level", level)?;
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let se = sigma / (k as f64).sqrt();
    Ok(if one_sided {
        ConfidenceBound {
            lower: None,
            upper: Some(alpha_hat + normal_quantile(level) * se),
            level,
            one_sided,
        }
    } else {
        let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
        ConfidenceBound {
            lower: Some((alpha_hat - z * se).max(0.0)),
            upper: Some(alpha_hat + z * se),
            level,
            one_sided,
        }
    })
}
