//! Rectangular arrays of observations and nearest-neighbor induced samples.
//!
//! A flat sample of `N` records is shuffled and laid out row-major in an
//! `I x J` grid. For a conditioning point `x0`, each row contributes the
//! response of its nearest covariate vector, giving `I` induced responses
//! that behave approximately like a sample from the conditional law at `x0`.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Flat collection of `(y, x)` records with `x` of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ys: Vec<f64>,
    xs: Vec<f64>,
    dim: usize,
    names: Vec<String>,
    discrete: Vec<bool>,
}

impl Dataset {
    /// Builds a dataset from parallel response and row-major covariate vectors.
    pub fn new(ys: Vec<f64>, xs: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let dim = names.len();
        if dim == 0 {
            return Err(Error::Shape("covariate dimension must be at least 1".into()));
        }
        if xs.len() != ys.len() * dim {
            return Err(Error::Shape(format!(
                "{} covariate values for {} records of dimension {dim}",
                xs.len(),
                ys.len()
            )));
        }
        if ys.iter().chain(xs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset values must be finite".into()));
        }
        Ok(Self {
            ys,
            xs,
            dim,
            discrete: vec![false; names.len()],
            names,
        })
    }

    /// Convenience constructor for scalar covariates.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (ys, xs) = pairs.iter().copied().unzip();
        Self::new(ys, xs, vec!["x".into()])
    }

    pub fn with_discrete(mut self, discrete: Vec<bool>) -> Result<Self> {
        if discrete.len() != self.dim {
            return Err(Error::Shape("discrete flags must match dimension".into()));
        }
        self.discrete = discrete;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn discrete(&self) -> &[bool] {
        &self.discrete
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn y(&self, idx: usize) -> f64 {
        self.ys[idx]
    }

    pub fn x(&self, idx: usize) -> &[f64] {
        &self.xs[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keeps only the given covariate columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() || columns.iter().any(|&c| c >= self.dim) {
            return Err(Error::Shape("invalid column selection".into()));
        }
        let mut xs = Vec::with_capacity(self.len() * columns.len());
        for i in 0..self.len() {
            let row = self.x(i);
            xs.extend(columns.iter().map(|&c| row[c]));
        }
        Ok(Self {
            ys: self.ys.clone(),
            xs,
            dim: columns.len(),
            names: columns.iter().map(|&c| self.names[c].clone()).collect(),
            discrete: columns.iter().map(|&c| self.discrete[c]).collect(),
        })
    }

    /// Records whose coordinates `coords` equal `values` exactly.
    pub fn filter_exact(&self, coords: &[usize], values: &[f64]) -> Self {
        let mut ys = Vec::new();
        let mut xs = Vec::new();
        for i in 0..self.len() {
            let x = self.x(i);
            if coords.iter().zip(values).all(|(&c, &v)| x[c] == v) {
                ys.push(self.ys[i]);
                xs.extend_from_slice(x);
            }
        }
        Self {
            ys,
            xs,
            dim: self.dim,
            names: self.names.clone(),
            discrete: self.discrete.clone(),
        }
    }
}

/// `I x J` array of observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    ys: Vec<f64>,
    xs: Vec<f64>,
    /// Index of the originating dataset record for every cell.
    source: Vec<usize>,
    seed: Option<u64>,
}

impl ObservationGrid {
    /// Assembles a grid from row-major cell values.
    pub fn from_cells(rows: usize, cols: usize, ys: Vec<f64>, xs: Vec<f64>) -> Result<Self> {
        let cells = rows * cols;
        if cells == 0 || ys.len() != cells || !xs.len().is_multiple_of(cells) {
            return Err(Error::Shape(format!(
                "{} responses and {} covariates do not fill a {rows}x{cols} grid",
                ys.len(),
                xs.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            dim: xs.len() / cells,
            ys,
            xs,
            source: (0..cells).collect(),
            seed: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.ys[i * self.cols + j]
    }

    pub fn x(&self, i: usize, j: usize) -> &[f64] {
        let c = i * self.cols + j;
        &self.xs[c * self.dim..(c + 1) * self.dim]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn source(&self, i: usize, j: usize) -> usize {
        self.source[i * self.cols + j]
    }

    /// Dataset records that did not make it into the grid.
    pub fn discarded(&self, n_records: usize) -> Vec<usize> {
        let mut used = vec![false; n_records];
        for &s in &self.source {
            used[s] = true;
        }
        (0..n_records).filter(|&i| !used[i]).collect()
    }
}

/// Induced responses at a conditioning point, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTailSample {
    x0: Vec<f64>,
    values: Vec<f64>,
    nn_distances: Vec<f64>,
}

impl LocalTailSample {
    /// Wraps an arbitrary sample (sorted here) with no neighbor metadata.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        sort_descending(&mut values);
        Self {
            x0: Vec::new(),
            nn_distances: Vec::new(),
            values,
        }
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// `Y_(1) >= Y_(2) >= ... >= Y_(I)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Distance of the chosen neighbor, indexed by grid row.
    pub fn nn_distances(&self) -> &[f64] {
        &self.nn_distances
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            x0: self.x0.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            nn_distances: self.nn_distances.clone(),
        }
    }
}

/// Stable descending sort.
pub fn sort_descending(values: &mut [f64]) {
    values.sort_by(|a, b| b.total_cmp(a));
}

/// Default side length: floor(sqrt(N)).
pub fn default_side(n: usize) -> usize {
    let mut s = (n as f64).sqrt() as usize;
    while s * s > n {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= n {
        s += 1;
    }
    s
}

/// Shuffles `data` with a stream seeded by `seed` and lays the first `I*J`
/// records out row-major. Defaults are `I = J = floor(sqrt(N))`.
pub fn split_into_grid(
    data: &Dataset,
    rows: Option<usize>,
    cols: Option<usize>,
    seed: u64,
) -> Result<ObservationGrid> {
    let n = data.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 records to split, got {n}"
        )));
    }
    let side = default_side(n);
    let rows = rows.unwrap_or(side);
    let cols = cols.unwrap_or(side);
    if rows == 0 || cols == 0 {
        return Err(Error::Sizing("grid dimensions must be positive".into()));
    }
    let cells = rows
        .checked_mul(cols)
        .filter(|&c| c <= n)
        .ok_or_else(|| Error::Sizing(format!("{rows}x{cols} grid exceeds {n} records")))?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::derive(seed, &[]);
    order.shuffle(&mut rng);
    order.truncate(cells);

    let dim = data.dim();
    let mut ys = Vec::with_capacity(cells);
    let mut xs = Vec::with_capacity(cells * dim);
    for &idx in &order {
        ys.push(data.y(idx));
        xs.extend_from_slice(data.x(idx));
    }
    Ok(ObservationGrid {
        rows,
        cols,
        dim,
        ys,
        xs,
        source: order,
        seed: Some(seed),
    })
}

fn check_query(dim: usize, x0: &[f64], scale: Option<&[f64]>) -> Result<()> {
    if x0.len() != dim {
        return Err(Error::Shape(format!(
            "conditioning point has dimension {}, grid covariates have {dim}",
            x0.len()
        )));
    }
    if let Some(w) = scale {
        if w.len() != dim {
            return Err(Error::Shape(format!(
                "{} scale weights for dimension {dim}",
                w.len()
            )));
        }
        if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("scale weights must be strictly positive".into()));
        }
    }
    Ok(())
}

#[inline]
fn squared_distance(x: &[f64], x0: &[f64], scale: Option<&[f64]>) -> f64 {
    match scale {
        None => x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum(),
        Some(w) => x
            .iter()
            .zip(x0)
            .zip(w)
            .map(|((a, b), s)| {
                let d = (a - b) * s;
                d * d
            })
            .sum(),
    }
}

/// Column of the nearest neighbor to `x0` in row `i`; ties go to the smallest column.
pub fn nearest_in_row(
    grid: &ObservationGrid,
    i: usize,
    x0: &[f64],
    scale: Option<&[f64]>,
) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for j in 0..grid.cols {
        let d = squared_distance(grid.x(i, j), x0, scale);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Nearest-neighbor induced sample at `x0`.
pub fn extract_local_sample(
    grid: &ObservationGrid,
    x0: &[f64],
    scale: Option<&[f64]>,
) -> Result<LocalTailSample> {
    check_query(grid.dim, x0, scale)?;
    let mut values = Vec::with_capacity(grid.rows);
    let mut nn_distances = Vec::with_capacity(grid.rows);
    for i in 0..grid.rows {
        let (j, d2) = nearest_in_row(grid, i, x0, scale);
        values.push(grid.y(i, j));
        nn_distances.push(d2.sqrt());
    }
    sort_descending(&mut values);
    Ok(LocalTailSample {
        x0: x0.to_vec(),
        values,
        nn_distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_data(n: usize) -> Dataset {
        let pairs: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, i as f64 / n as f64)).collect();
        Dataset::from_pairs(&pairs).unwrap()
    }

    #[test]
    fn default_square_grid() {
        let g = split_into_grid(&scalar_data(100), None, None, 1).unwrap();
        assert_eq!((g.rows(), g.cols()), (10, 10));
        assert!(g.discarded(100).is_empty());
    }

    #[test]
    fn remainder_discarded() {
        let g = split_into_grid(&scalar_data(101), None, None, 1).unwrap();
        assert_eq!((g.rows(), g.cols()), (10, 10));
        assert_eq!(g.discarded(101).len(), 1);
    }

    #[test]
    fn same_seed_same_grid() {
        let d = scalar_data(500);
        let a = split_into_grid(&d, None, None, 7).unwrap();
        let b = split_into_grid(&d, None, None, 7).unwrap();
        assert_eq!(a, b);
        let c = split_into_grid(&d, None, None, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sizing_errors() {
        let d = scalar_data(10);
        assert!(matches!(
            split_into_grid(&d, Some(4), Some(3), 0),
            Err(Error::Sizing(_))
        ));
        assert!(matches!(
            split_into_grid(&scalar_data(3), None, None, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn single_column_grid_returns_column_sorted() {
        let ys = vec![3.0, 1.0, 4.0, 1.5];
        let xs = vec![0.1, 0.9, 0.4, 0.3];
        let g = ObservationGrid::from_cells(4, 1, ys, xs).unwrap();
        let s = extract_local_sample(&g, &[0.5], None).unwrap();
        assert_eq!(s.values(), &[4.0, 3.0, 1.5, 1.0]);
    }

    #[test]
    fn exact_match_is_selected() {
        let ys = vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0];
        let xs = vec![0.0, 0.5, 0.9, 0.2, 0.8, 0.5];
        let g = ObservationGrid::from_cells(2, 3, ys, xs).unwrap();
        let s = extract_local_sample(&g, &[0.5], None).unwrap();
        assert_eq!(s.values(), &[30.0, 2.0]);
        assert_eq!(s.nn_distances(), &[0.0, 0.0]);
    }

    #[test]
    fn ties_go_to_first_column() {
        let ys = vec![1.0, 2.0];
        let xs = vec![0.4, 0.6];
        let g = ObservationGrid::from_cells(1, 2, ys, xs).unwrap();
        let s = extract_local_sample(&g, &[0.5], None).unwrap();
        assert_eq!(s.values(), &[1.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let g = ObservationGrid::from_cells(1, 2, vec![1.0, 2.0], vec![0.4, 0.6]).unwrap();
        assert!(matches!(
            extract_local_sample(&g, &[0.5, 1.0], None),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            extract_local_sample(&g, &[0.5], Some(&[0.0])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn scale_weights_change_metric() {
        // Row: (x1, x2) = (0.0, 5.0) vs (1.0, 0.0); query at origin.
        let g = ObservationGrid::from_cells(1, 2, vec![1.0, 2.0], vec![0.0, 5.0, 1.0, 0.0]).unwrap();
        let plain = extract_local_sample(&g, &[0.0, 0.0], None).unwrap();
        assert_eq!(plain.values(), &[2.0]);
        let weighted = extract_local_sample(&g, &[0.0, 0.0], Some(&[100.0, 1.0])).unwrap();
        assert_eq!(weighted.values(), &[1.0]);
    }

    #[test]
    fn filter_and_select() {
        let d = Dataset::new(
            vec![1.0, 2.0, 3.0],
            vec![0.1, 30.0, 0.2, 40.0, 0.3, 30.0],
            vec!["rank".into(), "age".into()],
        )
        .unwrap();
        let f = d.filter_exact(&[1], &[30.0]);
        assert_eq!(f.ys(), &[1.0, 3.0]);
        let s = d.select_columns(&[1]).unwrap();
        assert_eq!(s.x(1), &[40.0]);
        assert_eq!(s.names(), &["age".to_string()]);
    }

    #[test]
    fn default_side_is_exact_floor_sqrt() {
        for n in [4usize, 8, 9, 99, 100, 101, 250_000, 80_000] {
            let s = default_side(n);
            assert!(s * s <= n && (s + 1) * (s + 1) > n);
        }
    }
}
