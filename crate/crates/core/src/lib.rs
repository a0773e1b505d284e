//! Conditional Pareto exponent estimation.
//!
//! Given responses `Y` and covariates `X`, the tail exponent of `Y | X = x0`
//! is estimated by laying the sample out as a random `I x J` array, taking in
//! every row the response of the covariate nearest to `x0`, and applying the
//! Hill estimator to the largest of those induced responses. Repeating over
//! random splits and aggregating by medians gives the reported estimate, on
//! which moment-existence tests and confidence bounds are built.
//!
//! Modules:
//! - [`array`]: datasets, random arrays, nearest-neighbor induced samples
//! - [`hill`]: the Hill estimator
//! - [`kselect`]: diagnostic choice of the tail sample size `K`
//! - [`inference`]: moment and equality tests, confidence bounds
//! - [`aggregate`]: multi-split pipeline and median aggregation
//! - [`baselines`]: bandwidth comparator and quantile descriptives
//! - [`simulation`]: Monte Carlo designs and tables
//! - [`io`]: CSV ingestion, panel growth rates, report schemas
//! - [`rng`]: counter-based seeded streams

pub mod aggregate;
pub mod array;
pub mod baselines;
pub mod error;
pub mod hill;
pub mod inference;
pub mod io;
pub mod kselect;
pub mod rng;
pub mod simulation;
pub mod synthetic;

pub use aggregate::{
    aggregate_splits, estimate_conditional_alpha, estimate_many, AggregateEstimate,
    ConditionalEstimate, KChoice, PipelineConfig, SplitRecord,
};
pub use array::{extract_local_sample, split_into_grid, Dataset, LocalTailSample, ObservationGrid};
pub use error::{Error, Result};
pub use hill::{hill_alpha, log_spacings, TailEstimate};
pub use inference::{confidence_bounds, equality_test, moment_test, TestForm};
pub use kselect::{select_k, KSelection};
pub use rng::RngStream;
pub use simulation::{Design, McCellResult};
