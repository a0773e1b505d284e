//! Repeated random splitting and median aggregation.
//!
//! Each split `s` reshuffles the data into a fresh array with its own seed
//! `split_seed(master, s)`, runs nearest-neighbor extraction and the Hill
//! estimator, and the per-split exponents are combined by
//!
//! ```text
//! alpha_bar = median_s alpha_s
//! sigma2    = median_s ( alpha_s^2 + (alpha_s - alpha_bar)^2 )
//! ```
//!
//! Medians of even-length lists take the lower-middle order statistic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{default_side, extract_local_sample, split_into_grid, Dataset};
use crate::error::{Error, Result};
use crate::hill::{hill_alpha, TailEstimate};
use crate::inference::{confidence_bounds, moment_test, ConfidenceBound, MomentTest, TestForm};
use crate::kselect::{default_k_range, select_k};
use crate::rng::stream_id;

pub(crate) const DOMAIN_SPLIT: u64 = 3;

/// Seed of split `s` under `master`.
pub fn split_seed(master: u64, s: usize) -> u64 {
    stream_id(master, &[DOMAIN_SPLIT, s as u64])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub alpha_hat: f64,
    pub k_used: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateEstimate {
    pub alpha_bar: f64,
    pub sigma2_hat: f64,
    pub s_splits: usize,
    pub k_median: usize,
    pub per_split: Vec<SplitRecord>,
}

fn lower_median<T: Copy>(mut v: Vec<T>, cmp: impl Fn(&T, &T) -> std::cmp::Ordering) -> T {
    v.sort_by(cmp);
    v[(v.len() - 1) / 2]
}

pub fn aggregate_splits(per_split: &[SplitRecord]) -> Result<AggregateEstimate> {
    if per_split.is_empty() {
        return Err(Error::Usage("cannot aggregate an empty list of splits".into()));
    }
    let alpha_bar = lower_median(
        per_split.iter().map(|s| s.alpha_hat).collect(),
        f64::total_cmp,
    );
    let sigma2_hat = lower_median(
        per_split
            .iter()
            .map(|s| s.alpha_hat * s.alpha_hat + (s.alpha_hat - alpha_bar).powi(2))
            .collect(),
        f64::total_cmp,
    );
    let k_median = lower_median(per_split.iter().map(|s| s.k_used).collect(), Ord::cmp);
    Ok(AggregateEstimate {
        alpha_bar,
        sigma2_hat,
        s_splits: per_split.len(),
        k_median,
        per_split: per_split.to_vec(),
    })
}

/// Aggregates bare per-split estimates whose seeds are not tracked.
pub fn aggregate_estimates(estimates: &[TailEstimate]) -> Result<AggregateEstimate> {
    let records: Vec<SplitRecord> = estimates
        .iter()
        .map(|e| SplitRecord {
            alpha_hat: e.alpha_hat,
            k_used: e.k_used,
            seed: 0,
        })
        .collect();
    aggregate_splits(&records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum KChoice {
    Fixed(usize),
    /// Diagnostic selection; bounds default to `[5, floor(I/2) - 1]`.
    Auto {
        k_min: Option<usize>,
        k_max: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub k: KChoice,
    pub splits: usize,
    pub seed: u64,
    pub scale: Option<Vec<f64>>,
    /// Restrict to records matching `x0` exactly on coordinates flagged discrete.
    pub exact_match_discrete: bool,
    pub moment_orders: Vec<f64>,
    /// Test level.
    pub level: f64,
    /// Coverage of the reported bounds.
    pub bound_level: f64,
    pub test_form: TestForm,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rows: None,
            cols: None,
            k: KChoice::Auto {
                k_min: None,
                k_max: None,
            },
            splits: 1000,
            seed: 0,
            scale: None,
            exact_match_discrete: true,
            moment_orders: vec![2.0, 3.0, 4.0],
            level: 0.05,
            bound_level: 0.95,
            test_form: TestForm::Studentized,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.splits == 0 {
            return Err(Error::Usage("split count must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) || !(self.bound_level > 0.0 && self.bound_level < 1.0) {
            return Err(Error::Usage("levels must lie in (0, 1)".into()));
        }
        if self.moment_orders.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::Usage("moment orders must be positive".into()));
        }
        if let KChoice::Fixed(0) = self.k {
            return Err(Error::Usage("fixed K must be at least 1".into()));
        }
        Ok(())
    }
}

/// Aggregate estimate with its tests and bounds at one conditioning point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub x0: Vec<f64>,
    pub aggregate: AggregateEstimate,
    /// `sqrt(sigma2_hat / k_median)`.
    pub se: f64,
    pub moment_tests: Vec<MomentTest>,
    pub upper_bound: ConfidenceBound,
    pub interval: ConfidenceBound,
    pub effective_splits: usize,
    pub failed_splits: usize,
    /// Splits where automatic K selection fell back to the largest candidate.
    pub k_fallbacks: usize,
    pub n_records: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone)]
struct SplitOutcome {
    estimate: TailEstimate,
    fallback: bool,
}

fn estimate_split(sample: &[f64], k: KChoice) -> Result<SplitOutcome> {
    match k {
        KChoice::Fixed(k) => Ok(SplitOutcome {
            estimate: hill_alpha(sample, k)?,
            fallback: false,
        }),
        KChoice::Auto { k_min, k_max } => {
            let (lo, hi) = default_k_range(sample.len());
            let sel = select_k(sample, k_min.unwrap_or(lo), k_max.unwrap_or(hi))?;
            Ok(SplitOutcome {
                estimate: hill_alpha(sample, sel.k_star)?,
                fallback: sel.fallback_used,
            })
        }
    }
}

fn finish(
    x0: &[f64],
    outcomes: Vec<(u64, Result<SplitOutcome>)>,
    config: &PipelineConfig,
    n_records: usize,
    rows: usize,
    cols: usize,
) -> Result<ConditionalEstimate> {
    let total = outcomes.len();
    let mut records = Vec::with_capacity(total);
    let mut k_fallbacks = 0;
    let mut first_error = None;
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                k_fallbacks += o.fallback as usize;
                records.push(SplitRecord {
                    alpha_hat: o.estimate.alpha_hat,
                    k_used: o.estimate.k_used,
                    seed,
                });
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let failed = total - records.len();
    if failed * 10 > total {
        return Err(match (records.is_empty(), first_error) {
            (true, Some(e)) => e,
            _ => Error::TooManyFailures { failed, total },
        });
    }
    let aggregate = aggregate_splits(&records)?;
    let sigma = aggregate.sigma2_hat.sqrt();
    let k = aggregate.k_median;
    let moment_tests = config
        .moment_orders
        .iter()
        .map(|&r| moment_test(aggregate.alpha_bar, sigma, k, r, config.level, config.test_form))
        .collect::<Result<Vec<_>>>()?;
    let upper_bound = confidence_bounds(aggregate.alpha_bar, sigma, k, config.bound_level, true)?;
    let interval = confidence_bounds(aggregate.alpha_bar, sigma, k, config.bound_level, false)?;
    Ok(ConditionalEstimate {
        x0: x0.to_vec(),
        se: sigma / (k as f64).sqrt(),
        moment_tests,
        upper_bound,
        interval,
        effective_splits: records.len(),
        failed_splits: failed,
        k_fallbacks,
        n_records,
        rows,
        cols,
        aggregate,
    })
}

/// Runs the split pipeline for several conditioning points. Points sharing
/// their discrete coordinates share the splits, so each point's result equals
/// what [`estimate_conditional_alpha`] returns for it alone.
pub fn estimate_many(
    data: &Dataset,
    x0s: &[Vec<f64>],
    config: &PipelineConfig,
) -> Result<Vec<Result<ConditionalEstimate>>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData("dataset has no records".into()));
    }
    if x0s.is_empty() {
        return Err(Error::Usage("no conditioning points".into()));
    }
    if let Some(bad) = x0s.iter().find(|x| x.len() != data.dim()) {
        return Err(Error::Shape(format!(
            "conditioning point has dimension {}, data has {}",
            bad.len(),
            data.dim()
        )));
    }
    let discrete: Vec<usize> = if config.exact_match_discrete {
        (0..data.dim()).filter(|&c| data.discrete()[c]).collect()
    } else {
        Vec::new()
    };

    // Group points by their discrete coordinates, in order of first appearance.
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (idx, x0) in x0s.iter().enumerate() {
        let key: Vec<f64> = discrete.iter().map(|&c| x0[c]).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(idx),
            None => groups.push((key, vec![idx])),
        }
    }

    let mut results: Vec<Option<Result<ConditionalEstimate>>> = vec![None; x0s.len()];
    for (key, members) in groups {
        let subset;
        let group_data = if discrete.is_empty() {
            data
        } else {
            subset = data.filter_exact(&discrete, &key);
            &subset
        };
        let n_records = group_data.len();
        let per_split: Vec<(u64, Result<Vec<Result<SplitOutcome>>>)> = (0..config.splits)
            .into_par_iter()
            .map(|s| {
                let seed = split_seed(config.seed, s);
                let outcome = split_into_grid(group_data, config.rows, config.cols, seed).map(|grid| {
                    members
                        .iter()
                        .map(|&m| {
                            let sample = extract_local_sample(&grid, &x0s[m], config.scale.as_deref())?;
                            estimate_split(sample.values(), config.k)
                        })
                        .collect()
                });
                (seed, outcome)
            })
            .collect();

        let side = default_side(n_records);
        let dims = (config.rows.unwrap_or(side), config.cols.unwrap_or(side));
        for (pos, &m) in members.iter().enumerate() {
            let outcomes = per_split
                .iter()
                .map(|(seed, o)| {
                    let r = match o {
                        Ok(list) => list[pos].clone(),
                        Err(e) => Err(e.clone()),
                    };
                    (*seed, r)
                })
                .collect();
            results[m] = Some(finish(&x0s[m], outcomes, config, n_records, dims.0, dims.1));
        }
    }
    Ok(results.into_iter().map(|r| r.expect("every point assigned")).collect())
}

/// Full split, extract, estimate and aggregate pipeline at one point.
pub fn estimate_conditional_alpha(
    data: &Dataset,
    x0: &[f64],
    config: &PipelineConfig,
) -> Result<ConditionalEstimate> {
    estimate_many(data, &[x0.to_vec()], config)?
        .pop()
        .expect("one point in, one result out")
}
