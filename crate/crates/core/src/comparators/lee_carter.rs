//! Lee–Carter: `ln m_{t,x} = a_x + b_x k_t + e_{t,x}` with `sum b = 1` and
//! `sum k = 0`, a second-stage refit of `k_t` to the observed deaths and a
//! random walk with drift on the refitted index.

use log::warn;
use nalgebra::DMatrix;

use super::mortality::{grid_to_log_mortality, MortalitySurface};
use super::LogRateModel;
use crate::error::{Error, Result};
use crate::lifetable::DeathGrid;
use crate::univariate::{fit_rw, RandomWalk, ScoreForecaster};

const ADJUST_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LeeCarterModel {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Index straight from the SVD, summing to zero.
    pub kappa_unadjusted: Vec<f64>,
    /// Index after matching implied deaths to observed deaths.
    pub kappa: Vec<f64>,
    /// `ln m - a - b kappa` with the adjusted index.
    pub residuals: DMatrix<f64>,
    pub walk: RandomWalk,
    pub radix: f64,
}

pub fn fit_lee_carter(grid: &DeathGrid) -> Result<LeeCarterModel> {
    let surface = grid_to_log_mortality(grid)?;
    fit_lee_carter_surface(&surface)
}

pub fn fit_lee_carter_surface(surface: &MortalitySurface) -> Result<LeeCarterModel> {
    let log_m = &surface.log_m;
    let (n, p) = log_m.shape();
    if n < 3 {
        return Err(Error::Argument(format!(
            "Lee–Carter needs at least 3 years, got {n}"
        )));
    }
    let a: Vec<f64> = (0..p).map(|x| log_m.column(x).mean()).collect();
    let centred = DMatrix::from_fn(n, p, |t, x| log_m[(t, x)] - a[x]);
    let (b, kappa_unadjusted) = leading_factor(&centred)?;

    let kappa: Vec<f64> = (0..n)
        .map(|t| {
            let target: f64 = surface.deaths.row(t).sum();
            adjust_kappa(
                kappa_unadjusted[t],
                &a,
                &b,
                surface.exposure.row(t).iter().copied(),
                target,
            )
        })
        .collect();
    let residuals = DMatrix::from_fn(n, p, |t, x| log_m[(t, x)] - a[x] - b[x] * kappa[t]);
    let walk = fit_rw(&kappa, true)?;
    Ok(LeeCarterModel {
        a,
        b,
        kappa_unadjusted,
        kappa,
        residuals,
        walk,
        radix: surface.radix,
    })
}

/// Leading SVD pair of a centred matrix, scaled so the loadings sum to one.
fn leading_factor(centred: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, p) = centred.shape();
    if centred.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite log rate".into()));
    }
    if centred.iter().all(|v| v.abs() < 1e-14) {
        // no change over time: any loading works, the index is zero
        return Ok((vec![1.0 / p as f64; p], vec![0.0; n]));
    }
    let svd = centred.clone().svd(true, true);
    let s = &svd.singular_values;
    let i = s.iamax();
    let u = svd
        .u
        .ok_or_else(|| Error::Numeric("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD did not return V".into()))?;
    let total: f64 = v_t.row(i).sum();
    if total.abs() < 1e-12 {
        return Err(Error::Numeric(
            "leading age loadings sum to zero; cannot impose sum(b) = 1".into(),
        ));
    }
    let b = v_t.row(i).iter().map(|v| v / total).collect();
    let kappa = u.column(i).iter().map(|u| u * s[i] * total).collect();
    Ok((b, kappa))
}

/// Solves `sum_x E_x exp(a_x + b_x k) = target` for `k` by bisection,
/// taking the root nearest the starting value.
fn adjust_kappa(
    start: f64,
    a: &[f64],
    b: &[f64],
    exposure: impl Iterator<Item = f64> + Clone,
    target: f64,
) -> f64 {
    let f = |k: f64| -> f64 {
        exposure
            .clone()
            .zip(a.iter().zip(b))
            .map(|(e, (a, b))| e * (a + b * k).exp())
            .sum::<f64>()
            - target
    };
    let f0 = f(start);
    if f0 == 0.0 {
        return start;
    }
    let mut width = 1e-3 * start.abs().max(1.0);
    let bracket = loop {
        let (lo, hi) = (start - width, start + width);
        if f(hi).signum() != f0.signum() {
            break Some((start, hi));
        }
        if f(lo).signum() != f0.signum() {
            break Some((lo, start));
        }
        width *= 2.0;
        if width > 1e6 {
            break None;
        }
    };
    let Some((mut lo, mut hi)) = bracket else {
        warn!("kappa adjustment found no root near {start}; keeping the SVD value");
        return start;
    };
    let f_lo_sign = f(lo).signum();
    while hi - lo > ADJUST_TOL * (1.0 + lo.abs().max(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == f_lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl LeeCarterModel {
    /// `a + b kappa_t` for the adjusted index.
    pub fn fitted_log_rates(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.kappa.len(), self.a.len(), |t, x| {
            self.a[x] + self.b[x] * self.kappa[t]
        })
    }

    /// Forecasting view: one component `b` driven by the random walk on
    /// `kappa`, starting from the fitted final year.
    pub fn as_log_rate_model(&self) -> LogRateModel {
        LogRateModel {
            mean: self.a.clone(),
            components: DMatrix::from_row_slice(1, self.b.len(), &self.b),
            forecasters: vec![ScoreForecaster::RandomWalk(self.walk.clone())],
            residuals: self.residuals.clone(),
            radix: self.radix,
        }
    }
}
