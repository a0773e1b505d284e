//! CSV ingestion, growth-variable derivation and report schemas.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::{ConditionalEstimate, PipelineConfig};
use crate::error::{Error, Result};
use crate::array::Dataset;
use crate::simulation::McCellResult;

/// Dataset plus the number of rows dropped during parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub value: T,
    pub dropped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadOptions {
    /// Covariate columns that take discrete values (matched exactly).
    pub discrete: Vec<String>,
}

fn parse_cell(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Schema(format!("column '{name}' not found")))
}

pub fn read_dataset<R: Read>(
    reader: R,
    y_column: &str,
    x_columns: &[String],
    options: &LoadOptions,
) -> Result<Loaded<Dataset>> {
    if x_columns.is_empty() {
        return Err(Error::Schema("at least one covariate column is required".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let y_idx = header_index(&headers, y_column)?;
    let x_idx = x_columns
        .iter()
        .map(|c| header_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    for d in &options.discrete {
        if !x_columns.contains(d) {
            return Err(Error::Schema(format!("discrete column '{d}' is not a covariate")));
        }
    }

    let (mut ys, mut xs, mut dropped) = (Vec::new(), Vec::new(), 0usize);
    for record in rdr.records() {
        let record = record?;
        let y = record.get(y_idx).and_then(parse_cell);
        let x: Option<Vec<f64>> = x_idx.iter().map(|&i| record.get(i).and_then(parse_cell)).collect();
        match (y, x) {
            (Some(y), Some(x)) => {
                ys.push(y);
                xs.extend(x);
            }
            _ => dropped += 1,
        }
    }
    if ys.is_empty() {
        return Err(Error::EmptyData("no usable rows".into()));
    }
    let discrete = x_columns.iter().map(|c| options.discrete.contains(c)).collect();
    let dataset = Dataset::new(ys, xs, x_columns.to_vec())?.with_discrete(discrete)?;
    Ok(Loaded { value: dataset, dropped })
}

pub fn load_csv(
    path: &Path,
    y_column: &str,
    x_columns: &[String],
    options: &LoadOptions,
) -> Result<Loaded<Dataset>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(file, y_column, x_columns, options)
}

/// Writes `y` followed by the covariate columns.
pub fn write_dataset<W: Write>(dataset: &Dataset, y_name: &str, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![y_name.to_string()];
    header.extend(dataset.names().iter().cloned());
    w.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut row = vec![dataset.y(i).to_string()];
        row.extend(dataset.x(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One `(id, period, earnings)` observation of a long panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub id: String,
    pub period: i64,
    pub earnings: f64,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelColumns {
    pub id: String,
    pub period: String,
    pub earnings: String,
    pub covariates: Vec<String>,
}

pub fn read_panel<R: Read>(reader: R, columns: &PanelColumns) -> Result<Loaded<Vec<PanelRow>>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id = header_index(&headers, &columns.id)?;
    let period = header_index(&headers, &columns.period)?;
    let earnings = header_index(&headers, &columns.earnings)?;
    let cov = columns
        .covariates
        .iter()
        .map(|c| header_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let (mut rows, mut dropped) = (Vec::new(), 0usize);
    for record in rdr.records() {
        let record = record?;
        let parsed = (|| {
            let id = record.get(id)?.trim().to_string();
            if id.is_empty() {
                return None;
            }
            let period = record.get(period)?.trim().parse::<i64>().ok()?;
            let earnings = record.get(earnings).and_then(parse_cell)?;
            let covariates = cov
                .iter()
                .map(|&i| record.get(i).and_then(parse_cell))
                .collect::<Option<Vec<_>>>()?;
            Some(PanelRow {
                id,
                period,
                earnings,
                covariates,
            })
        })();
        match parsed {
            Some(r) => rows.push(r),
            None => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyData("no usable panel rows".into()));
    }
    Ok(Loaded { value: rows, dropped })
}

pub fn write_panel<W: Write>(rows: &[PanelRow], columns: &PanelColumns, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![columns.id.clone(), columns.period.clone(), columns.earnings.clone()];
    header.extend(columns.covariates.iter().cloned());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.id.clone(), r.period.to_string(), r.earnings.to_string()];
        rec.extend(r.covariates.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthMode {
    /// `|log e2 - log e1|`
    Absolute,
    /// Magnitudes of negative changes only.
    SignedLeft,
    /// Positive changes only.
    SignedRight,
}

impl std::str::FromStr for GrowthMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(GrowthMode::Absolute),
            "signed-left" => Ok(GrowthMode::SignedLeft),
            "signed-right" => Ok(GrowthMode::SignedRight),
            _ => Err(Error::Usage(format!("unknown growth mode '{s}'"))),
        }
    }
}

/// Base-period rank of `values`: share of strictly smaller values over `n - 1`.
/// The minimum maps to 0 and a unique maximum to 1.
pub fn quantile_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n <= 1 {
        return vec![0.0; n];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    values
        .iter()
        .map(|v| sorted.partition_point(|s| s < v) as f64 / (n - 1) as f64)
        .collect()
}

/// Builds `(y, [rank, covariates...])` from two periods of a long panel.
/// Covariates are taken from the base period. Ids with nonpositive earnings
/// in either period are dropped and counted.
pub fn derive_growth_variable(
    panel: &[PanelRow],
    covariate_names: &[String],
    base_period: i64,
    next_period: i64,
    mode: GrowthMode,
) -> Result<Loaded<Dataset>> {
    let mut next: HashMap<&str, f64> = HashMap::new();
    for r in panel.iter().filter(|r| r.period == next_period) {
        next.insert(r.id.as_str(), r.earnings);
    }
    let mut matched = Vec::new();
    let mut dropped = 0usize;
    let mut seen = std::collections::HashSet::new();
    for r in panel.iter().filter(|r| r.period == base_period) {
        if !seen.insert(r.id.as_str()) {
            continue;
        }
        if let Some(&e2) = next.get(r.id.as_str()) {
            if r.earnings > 0.0 && e2 > 0.0 {
                matched.push((r, e2));
            } else {
                dropped += 1;
            }
        }
    }
    if matched.is_empty() {
        return Err(Error::EmptyData(format!(
            "no ids with positive earnings in both periods {base_period} and {next_period}"
        )));
    }
    let base: Vec<f64> = matched.iter().map(|(r, _)| r.earnings).collect();
    let ranks = quantile_ranks(&base);

    let mut names = vec!["rank".to_string()];
    names.extend(covariate_names.iter().cloned());
    let (mut ys, mut xs) = (Vec::new(), Vec::new());
    for ((r, e2), rank) in matched.iter().zip(ranks) {
        let change = e2.ln() - r.earnings.ln();
        let y = match mode {
            GrowthMode::Absolute => Some(change.abs()),
            GrowthMode::SignedLeft => (change < 0.0).then_some(-change),
            GrowthMode::SignedRight => (change > 0.0).then_some(change),
        };
        if let Some(y) = y {
            ys.push(y);
            xs.push(rank);
            xs.extend_from_slice(&r.covariates);
        }
    }
    if ys.is_empty() {
        return Err(Error::EmptyData("no observations left after applying the growth mode".into()));
    }
    Ok(Loaded {
        value: Dataset::new(ys, xs, names)?,
        dropped,
    })
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Usage(format!("'{s}' is not a number")))
}

/// Expands `start:stop:step` (inclusive) or a single number.
pub fn parse_axis(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(vec![parse_number(v)?]),
        [a, b, c] => {
            let (start, stop, step) = (parse_number(a)?, parse_number(b)?, parse_number(c)?);
            if !(step > 0.0) || stop < start {
                return Err(Error::Usage(format!("bad range '{spec}'")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|i| round12(start + i as f64 * step)).collect())
        }
        _ => Err(Error::Usage(format!("bad axis '{spec}'"))),
    }
}

/// Parses conditioning points. Points are separated by `;`, coordinates
/// within a point by `,`, and each coordinate is a number or a
/// `start:stop:step` range; ranges expand to the cartesian product. For
/// one-dimensional covariates, `,` also separates points.
pub fn parse_x0_points(spec: &str, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut points = Vec::new();
    for point in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let coords: Vec<&str> = point.split(',').collect();
        if dim == 1 {
            for c in coords {
                points.extend(parse_axis(c)?.into_iter().map(|v| vec![v]));
            }
            continue;
        }
        if coords.len() != dim {
            return Err(Error::Usage(format!(
                "point '{point}' has {} coordinates, expected {dim}",
                coords.len()
            )));
        }
        let axes = coords.iter().map(|c| parse_axis(c)).collect::<Result<Vec<_>>>()?;
        let mut acc: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &axes {
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        points.extend(acc);
    }
    if points.is_empty() {
        return Err(Error::Usage("empty conditioning-point grid".into()));
    }
    Ok(points)
}

pub const MC_COLUMNS: [&str; 12] = [
    "design", "I", "J", "K", "x0", "reps", "bias", "sd", "rmse", "coverage", "mc_se", "failures",
];

/// Monte Carlo table as CSV. A trailing `bandwidth` column is added when any
/// row carries one.
pub fn write_mc_csv<W: Write>(rows: &[McCellResult], writer: W) -> Result<()> {
    let with_bw = rows.iter().any(|r| r.bandwidth.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = MC_COLUMNS.to_vec();
    if with_bw {
        header.push("bandwidth");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.design.to_string(),
            r.rows.to_string(),
            r.cols.to_string(),
            r.k.to_string(),
            r.x0.to_string(),
            r.reps.to_string(),
            r.bias.to_string(),
            r.sd.to_string(),
            r.rmse.to_string(),
            r.coverage.to_string(),
            r.mc_se.to_string(),
            r.failures.to_string(),
        ];
        if with_bw {
            rec.push(r.bandwidth.map(|b| b.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mc_csv<R: Read>(reader: R) -> Result<Vec<McCellResult>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = MC_COLUMNS
        .iter()
        .map(|c| header_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let bw = header_index(&headers, "bandwidth").ok();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let f = |i: usize| -> Result<f64> { parse_number(record.get(idx[i]).unwrap_or("")) };
        let u = |i: usize| -> Result<usize> {
            record
                .get(idx[i])
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Schema(format!("bad integer in column {}", MC_COLUMNS[i])))
        };
        out.push(McCellResult {
            design: u(0)? as u32,
            rows: u(1)?,
            cols: u(2)?,
            k: u(3)?,
            x0: f(4)?,
            reps: u(5)?,
            bias: f(6)?,
            sd: f(7)?,
            rmse: f(8)?,
            coverage: f(9)?,
            mc_se: f(10)?,
            failures: u(11)?,
            bandwidth: match bw.and_then(|i| record.get(i)).map(str::trim) {
                Some(s) if !s.is_empty() => Some(parse_number(s)?),
                _ => None,
            },
        });
    }
    Ok(out)
}

/// Where the estimation data came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: String,
    pub y: String,
    pub x: Vec<String>,
    pub discrete: Vec<String>,
    /// Set when the input is a long panel turned into growth rates.
    pub panel: Option<PanelSpec>,
    pub dropped_rows: usize,
    pub n_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub id: String,
    pub period: String,
    pub earnings: String,
    pub covariates: Vec<String>,
    pub base_period: i64,
    pub next_period: i64,
    pub mode: GrowthMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub r: f64,
    pub statistic: f64,
    pub statistic_printed: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub x0: Vec<f64>,
    pub status: String,
    pub error_category: Option<String>,
    pub error_message: Option<String>,
    pub alpha_bar: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub k_median: Option<usize>,
    pub se: Option<f64>,
    pub upper_bound: Option<f64>,
    pub interval_lower: Option<f64>,
    pub interval_upper: Option<f64>,
    pub moment_tests: Vec<MomentRow>,
    pub effective_splits: usize,
    pub failed_splits: usize,
    pub k_fallbacks: usize,
    pub n_records: usize,
    pub rows: usize,
    pub cols: usize,
}

impl EstimateRow {
    pub fn from_result(x0: &[f64], splits: usize, result: &Result<ConditionalEstimate>) -> Self {
        match result {
            Ok(e) => Self {
                x0: e.x0.clone(),
                status: "ok".into(),
                error_category: None,
                error_message: None,
                alpha_bar: Some(e.aggregate.alpha_bar),
                sigma2_hat: Some(e.aggregate.sigma2_hat),
                k_median: Some(e.aggregate.k_median),
                se: Some(e.se),
                upper_bound: e.upper_bound.upper,
                interval_lower: e.interval.lower,
                interval_upper: e.interval.upper,
                moment_tests: e
                    .moment_tests
                    .iter()
                    .map(|t| MomentRow {
                        r: t.r,
                        statistic: t.statistic,
                        statistic_printed: t.statistic_printed,
                        critical_value: t.critical_value,
                        p_value: t.p_value,
                        reject: t.reject,
                    })
                    .collect(),
                effective_splits: e.effective_splits,
                failed_splits: e.failed_splits,
                k_fallbacks: e.k_fallbacks,
                n_records: e.n_records,
                rows: e.rows,
                cols: e.cols,
            },
            Err(err) => Self {
                x0: x0.to_vec(),
                status: "failed".into(),
                error_category: Some(err.category().into()),
                error_message: Some(err.to_string()),
                alpha_bar: None,
                sigma2_hat: None,
                k_median: None,
                se: None,
                upper_bound: None,
                interval_lower: None,
                interval_upper: None,
                moment_tests: Vec::new(),
                effective_splits: 0,
                failed_splits: splits,
                k_fallbacks: 0,
                n_records: 0,
                rows: 0,
                cols: 0,
            },
        }
    }
}

/// Self-describing estimation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub input: InputSpec,
    pub config: PipelineConfig,
    pub rows: Vec<EstimateRow>,
}
