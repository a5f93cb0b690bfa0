//! Conversions between life-table death counts and central mortality rates.
//!
//! Rates come from `m = -ln(1 - q)` with `q = d / l`. The open age group has
//! `q = 1` and is left out of the rate surface; on the way back its `q` is
//! pinned at 1, which closes every table.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lifetable::{deaths_from_q, floor_and_normalize, DeathGrid};

/// Lower bound for `m` when a cell has `q = 0`.
pub const M_FLOOR: f64 = 1e-10;

/// Log central rates for ages `0..K-1` plus the quantities the Lee–Carter
/// adjustment needs.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalitySurface {
    /// `n x (K-1)`.
    pub log_m: DMatrix<f64>,
    /// Life-table person-years `d / m` per cell, `n x (K-1)`.
    pub exposure: DMatrix<f64>,
    /// Deaths per cell, `n x (K-1)`.
    pub deaths: DMatrix<f64>,
    pub radix: f64,
}

impl MortalitySurface {
    /// Number of ages in the originating grid, open age group included.
    pub fn n_ages(&self) -> usize {
        self.log_m.ncols() + 1
    }
}

pub fn q_to_m(q: f64) -> f64 {
    -(-q).ln_1p()
}

pub fn m_to_q(m: f64) -> f64 {
    -(-m).exp_m1()
}

/// `q_x = d_x / l_x` for every age of one table, with `l_x` the tail sum.
pub fn death_probabilities(deaths: &[f64]) -> Vec<f64> {
    let mut alive: f64 = deaths.iter().sum();
    let mut q = Vec::with_capacity(deaths.len());
    for &d in deaths {
        q.push(if alive > 0.0 { d / alive } else { 1.0 });
        alive -= d;
    }
    q
}

pub fn grid_to_log_mortality(grid: &DeathGrid) -> Result<MortalitySurface> {
    let (n, k) = (grid.n_years(), grid.n_ages());
    if k < 2 {
        return Err(Error::Argument(
            "need at least two ages for mortality rates".into(),
        ));
    }
    let mut log_m = DMatrix::zeros(n, k - 1);
    let mut exposure = DMatrix::zeros(n, k - 1);
    let mut deaths = DMatrix::zeros(n, k - 1);
    for t in 0..n {
        let row = grid.row(t);
        let q = death_probabilities(&row);
        for x in 0..k - 1 {
            if q[x] >= 1.0 {
                return Err(Error::Domain(format!(
                    "year {}, age {x}: probability of dying is 1 below the open age",
                    grid.first_year() + t as i32
                )));
            }
            let m = q_to_m(q[x]).max(M_FLOOR);
            log_m[(t, x)] = m.ln();
            exposure[(t, x)] = row[x] / m;
            deaths[(t, x)] = row[x];
        }
    }
    Ok(MortalitySurface {
        log_m,
        exposure,
        deaths,
        radix: grid.radix(),
    })
}

/// Death counts for `K` ages from `K-1` log rates: `q = 1 - exp(-m)`, the
/// open age closes the table, and tiny counts are floored.
pub fn deaths_from_log_rates(log_m: &[f64], radix: f64) -> Vec<f64> {
    let mut q: Vec<f64> = log_m.iter().map(|lm| m_to_q(lm.exp())).collect();
    q.push(1.0);
    let mut deaths = deaths_from_q(&q, radix);
    floor_and_normalize(&mut deaths, radix);
    deaths
}
