//! Synthetic two-period earnings panel with a known conditional tail.
//!
//! Each person has a base-earnings quantile `u ~ U(0,1)`, an age drawn from
//! [`AGES`] and a binary gender. The absolute one-period log change is
//! `scale * Pareto(alpha(u, age))`, with scale 0.1 for gender 0 and 0.08 for
//! gender 1, and a random sign. Gender only rescales, so given `(u, age)`
//! the change has an exact Pareto tail with exponent [`panel_alpha`].

use crate::inference::normal_quantile;
use crate::io::{PanelColumns, PanelRow};
use crate::rng::RngStream;
use crate::simulation::pareto_from_uniform;

pub const AGES: [f64; 3] = [30.0, 40.0, 50.0];
pub const BASE_PERIOD: i64 = 1;
pub const NEXT_PERIOD: i64 = 2;

/// `1 + 10 u + (age - 40) / 20`
pub fn panel_alpha(rank: f64, age: f64) -> f64 {
    1.0 + 10.0 * rank + (age - 40.0) / 20.0
}

pub fn panel_columns() -> PanelColumns {
    PanelColumns {
        id: "id".into(),
        period: "period".into(),
        earnings: "earnings".into(),
        covariates: vec!["age".into(), "gender".into()],
    }
}

/// Two rows per person, for [`BASE_PERIOD`] and [`NEXT_PERIOD`].
pub fn synthetic_panel(n_people: usize, seed: u64) -> Vec<PanelRow> {
    let mut rows = Vec::with_capacity(2 * n_people);
    for p in 0..n_people {
        let mut s = RngStream::derive(seed, &[0x5059_4E4C, p as u64]);
        let u = s.uniform().clamp(1e-12, 1.0 - 1e-12);
        let age = AGES[(s.uniform() * AGES.len() as f64) as usize];
        let gender = if s.uniform() < 0.5 { 0.0 } else { 1.0 };
        let scale = if gender == 0.0 { 0.1 } else { 0.08 };
        let change = scale * pareto_from_uniform(s.uniform_open0(), panel_alpha(u, age));
        let sign = if s.uniform() < 0.5 { -1.0 } else { 1.0 };
        let base = 30_000.0 * (0.8 * normal_quantile(u)).exp();
        let id = format!("p{p:06}");
        rows.push(PanelRow {
            id: id.clone(),
            period: BASE_PERIOD,
            earnings: base,
            covariates: vec![age, gender],
        });
        rows.push(PanelRow {
            id,
            period: NEXT_PERIOD,
            earnings: base * (sign * change).exp(),
            covariates: vec![age, gender],
        });
    }
    rows
}
