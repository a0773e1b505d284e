//! Monte Carlo designs and summary tables.
//!
//! Every cell of a simulated array is a pure function of its replication
//! stream and cell index: `X` comes from draw `2c` and the Pareto uniform
//! from draw `2c + 1`. The harness therefore only materializes responses for
//! the cells a nearest-neighbor or bandwidth search actually picks, and the
//! result is identical to generating the full array first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{sort_descending, ObservationGrid};
use crate::baselines::gardes_estimate;
use crate::error::{Error, Result};
use crate::hill::hill_alpha;
use crate::inference::confidence_bounds;
use crate::rng::RngStream;

pub(crate) const DOMAIN_GRID: u64 = 1;
pub(crate) const DOMAIN_FLAT: u64 = 2;

/// Nominal coverage of the interval used for the coverage column.
pub const COVERAGE_LEVEL: f64 = 0.95;

/// Covariate `X ~ U(0,1)`, response `Y | X ~ Pareto(alpha(X))` with unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    /// `alpha(x) = 1 + 10x`
    Linear,
    /// `alpha(x) = 10 (x^2 - x + 1)`
    Quadratic,
}

impl Design {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Design::Linear),
            2 => Ok(Design::Quadratic),
            _ => Err(Error::Usage(format!("unknown design {id}; expected 1 or 2"))),
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Design::Linear => 1,
            Design::Quadratic => 2,
        }
    }

    #[inline]
    fn alpha_unchecked(self, x: f64) -> f64 {
        match self {
            Design::Linear => 1.0 + 10.0 * x,
            Design::Quadratic => 10.0 * (x * x - x + 1.0),
        }
    }
}

pub fn true_alpha(design: Design, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0, 1]")));
    }
    Ok(design.alpha_unchecked(x))
}

/// Inverse transform for unit-scale Pareto: `u^(-1/alpha)`, `u` in (0, 1].
#[inline]
pub fn pareto_from_uniform(u: f64, alpha: f64) -> f64 {
    u.powf(-1.0 / alpha)
}

pub fn sample_pareto(alpha: f64, rng: &mut RngStream) -> f64 {
    pareto_from_uniform(rng.uniform_open0(), alpha)
}

#[inline]
fn cell_x(stream: &RngStream, cell: usize) -> f64 {
    stream.uniform_at(2 * cell as u64)
}

#[inline]
fn cell_y(stream: &RngStream, design: Design, cell: usize, x: f64) -> f64 {
    let u = 1.0 - stream.uniform_at(2 * cell as u64 + 1);
    pareto_from_uniform(u, design.alpha_unchecked(x))
}

/// Full `I x J` array for `design` drawn from `stream`.
pub fn generate_grid(
    design: Design,
    rows: usize,
    cols: usize,
    stream: &RngStream,
) -> Result<ObservationGrid> {
    let cells = rows * cols;
    let xs: Vec<f64> = (0..cells).map(|c| cell_x(stream, c)).collect();
    let ys = xs
        .iter()
        .enumerate()
        .map(|(c, &x)| cell_y(stream, design, c, x))
        .collect();
    ObservationGrid::from_cells(rows, cols, ys, xs)
}

/// Stream for replication `rep` of an `I x J` array experiment.
pub fn grid_stream(seed: u64, design: Design, rows: usize, cols: usize, rep: usize) -> RngStream {
    RngStream::derive(
        seed,
        &[DOMAIN_GRID, design.id() as u64, rows as u64, cols as u64, rep as u64],
    )
}

/// Stream for replication `rep` of a flat-sample experiment.
pub fn flat_stream(seed: u64, design: Design, n_total: usize, rep: usize) -> RngStream {
    RngStream::derive(
        seed,
        &[DOMAIN_FLAT, design.id() as u64, n_total as u64, rep as u64],
    )
}

/// Flat i.i.d. sample of `(y, x)` pairs.
pub fn generate_flat(design: Design, n: usize, stream: &RngStream) -> Vec<(f64, f64)> {
    (0..n)
        .map(|c| {
            let x = cell_x(stream, c);
            (cell_y(stream, design, c, x), x)
        })
        .collect()
}

/// One summarized row of a Monte Carlo table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCellResult {
    pub design: u32,
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    pub x0: f64,
    /// Set for bandwidth-baseline rows.
    pub bandwidth: Option<f64>,
    pub reps: usize,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mc_se: f64,
    pub failures: usize,
}

/// Per-replication estimates for a set of `(K, x0)` cells. `None` marks a
/// failed replication.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloDraws {
    pub cells: Vec<(usize, f64)>,
    /// `estimates[rep][cell]`
    pub estimates: Vec<Vec<Option<f64>>>,
}

impl MonteCarloDraws {
    pub fn column(&self, cell: usize) -> Vec<Option<f64>> {
        self.estimates.iter().map(|r| r[cell]).collect()
    }
}

fn validate_x0(x0s: &[f64]) -> Result<()> {
    if x0s.is_empty() {
        return Err(Error::Usage("x0 list is empty".into()));
    }
    for &x in x0s {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("x0 = {x} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Nearest-neighbor Hill estimates on freshly simulated arrays. Arrays are
/// shared across all `(K, x0)` cells of a replication.
pub fn simulate_nn_estimates(
    design: Design,
    rows: usize,
    cols: usize,
    ks: &[usize],
    x0s: &[f64],
    reps: usize,
    seed: u64,
) -> Result<MonteCarloDraws> {
    validate_x0(x0s)?;
    if rows == 0 || cols == 0 || reps == 0 || ks.is_empty() {
        return Err(Error::Usage("rows, cols, reps and K list must be positive".into()));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k + 1 > rows) {
        return Err(Error::Size(format!("K = {k} needs 1 <= K < rows = {rows}")));
    }
    let cells: Vec<(usize, f64)> = ks
        .iter()
        .flat_map(|&k| x0s.iter().map(move |&x| (k, x)))
        .collect();

    let estimates = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let stream = grid_stream(seed, design, rows, cols, rep);
            let xs: Vec<f64> = (0..rows * cols).map(|c| cell_x(&stream, c)).collect();
            let samples: Vec<Vec<f64>> = x0s
                .iter()
                .map(|&x0| {
                    let mut values: Vec<f64> = (0..rows)
                        .map(|i| {
                            let row = &xs[i * cols..(i + 1) * cols];
                            let mut best = (0, f64::INFINITY);
                            for (j, &x) in row.iter().enumerate() {
                                let d = (x - x0) * (x - x0);
                                if d < best.1 {
                                    best = (j, d);
                                }
                            }
                            let c = i * cols + best.0;
                            cell_y(&stream, design, c, xs[c])
                        })
                        .collect();
                    sort_descending(&mut values);
                    values
                })
                .collect();
            ks.iter()
                .flat_map(|&k| {
                    samples
                        .iter()
                        .map(move |s| hill_alpha(s, k).ok().map(|e| e.alpha_hat))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(MonteCarloDraws { cells, estimates })
}

/// Bias, SD, RMSE and Wald coverage of a column of estimates.
pub fn summarize(
    estimates: &[Option<f64>],
    truth: f64,
    k: usize,
) -> Result<(f64, f64, f64, f64, f64, usize)> {
    let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
    let failures = estimates.len() - ok.len();
    if ok.is_empty() {
        return Err(Error::InsufficientData("every replication failed".into()));
    }
    let n = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / n;
    let sd = if ok.len() > 1 {
        (ok.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let bias = mean - truth;
    let rmse = (bias * bias + sd * sd).sqrt();
    let mut covered = 0usize;
    for &a in &ok {
        if confidence_bounds(a, a, k, COVERAGE_LEVEL, false)?.contains(truth) {
            covered += 1;
        }
    }
    Ok((bias, sd, rmse, covered as f64 / n, sd / n.sqrt(), failures))
}

/// Table rows for nearest-neighbor estimation at several `K` on shared arrays.
pub fn run_monte_carlo_multi(
    design: Design,
    rows: usize,
    cols: usize,
    ks: &[usize],
    x0s: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<McCellResult>> {
    let draws = simulate_nn_estimates(design, rows, cols, ks, x0s, reps, seed)?;
    draws
        .cells
        .iter()
        .enumerate()
        .map(|(c, &(k, x0))| {
            let truth = true_alpha(design, x0)?;
            let (bias, sd, rmse, coverage, mc_se, failures) =
                summarize(&draws.column(c), truth, k)?;
            Ok(McCellResult {
                design: design.id(),
                rows,
                cols,
                k,
                x0,
                bandwidth: None,
                reps,
                bias,
                sd,
                rmse,
                coverage,
                mc_se,
                failures,
            })
        })
        .collect()
}

pub fn run_monte_carlo(
    design: Design,
    rows: usize,
    cols: usize,
    k: usize,
    x0s: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<McCellResult>> {
    run_monte_carlo_multi(design, rows, cols, &[k], x0s, reps, seed)
}

/// Bandwidth-baseline estimates on flat samples of size `n_total`; bandwidths
/// share the sample within a replication. Cells are `(K, bandwidth)`.
pub fn simulate_gardes_estimates(
    design: Design,
    n_total: usize,
    ks: &[usize],
    x0: f64,
    bandwidths: &[f64],
    reps: usize,
    seed: u64,
) -> Result<MonteCarloDraws> {
    validate_x0(&[x0])?;
    if n_total == 0 || reps == 0 || ks.is_empty() || bandwidths.is_empty() {
        return Err(Error::Usage("sample size, reps, K and bandwidth lists must be nonempty".into()));
    }
    if bandwidths.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::Domain("bandwidths must be positive".into()));
    }
    let widest = bandwidths.iter().cloned().fold(0.0, f64::max);
    let cells: Vec<(usize, f64)> = ks
        .iter()
        .flat_map(|&k| bandwidths.iter().map(move |&b| (k, b)))
        .collect();

    let estimates = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let stream = flat_stream(seed, design, n_total, rep);
            // Observations outside the widest window are never selected.
            let near: Vec<(f64, f64)> = (0..n_total)
                .filter_map(|c| {
                    let x = cell_x(&stream, c);
                    ((x - x0).abs() <= widest).then(|| (cell_y(&stream, design, c, x), x))
                })
                .collect();
            cells
                .iter()
                .map(|&(k, b)| gardes_estimate(&near, x0, b, k).ok().map(|e| e.alpha_hat))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(MonteCarloDraws { cells, estimates })
}

pub fn run_monte_carlo_gardes(
    design: Design,
    n_total: usize,
    ks: &[usize],
    x0: f64,
    bandwidths: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<McCellResult>> {
    let draws = simulate_gardes_estimates(design, n_total, ks, x0, bandwidths, reps, seed)?;
    let truth = true_alpha(design, x0)?;
    let side = crate::array::default_side(n_total);
    let square = side * side == n_total;
    draws
        .cells
        .iter()
        .enumerate()
        .map(|(c, &(k, b))| {
            let (bias, sd, rmse, coverage, mc_se, failures) =
                summarize(&draws.column(c), truth, k)?;
            Ok(McCellResult {
                design: design.id(),
                rows: if square { side } else { n_total },
                cols: if square { side } else { 1 },
                k,
                x0,
                bandwidth: Some(b),
                reps,
                bias,
                sd,
                rmse,
                coverage,
                mc_se,
                failures,
            })
        })
        .collect()
}

/// Jarque-Bera statistic; asymptotically chi-square with 2 degrees of freedom.
pub fn jarque_bera(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0)
}

/// Upper 1% point of chi-square(2): `-2 ln(0.01)`.
pub fn jarque_bera_critical_1pct() -> f64 {
    -2.0 * 0.01f64.ln()
}
