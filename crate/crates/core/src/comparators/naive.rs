//! Random walks, with or without drift, on each age of the clr-transformed
//! death counts. Bands are Gaussian in clr space and mapped back bound by
//! bound.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::coda::{clr_transform, geometric_means, inverse_clr, recompose_deaths, GeometricMeans};
use crate::error::{Error, Result};
use crate::forecast::{check_gamma, DeathForecast, PredictionBand};
use crate::lifetable::DeathGrid;
use crate::univariate::fit_rw;

pub fn naive_clr_rw(
    grid: &DeathGrid,
    with_drift: bool,
    horizon: usize,
    gammas: &[f64],
) -> Result<DeathForecast> {
    if horizon == 0 {
        return Err(Error::Argument(
            "forecast horizon must be at least 1".into(),
        ));
    }
    for g in gammas {
        check_gamma(*g)?;
    }
    let (means, centre, sd) = clr_forecast(grid, with_drift, horizon)?;
    let k = centre.ncols();
    let normal = Normal::standard();
    let radix = grid.radix();
    let to_deaths = |row: &[f64]| recompose_deaths(&inverse_clr(row), &means, radix);

    let mut point = DMatrix::zeros(horizon, k);
    let mut bands: Vec<PredictionBand> = gammas
        .iter()
        .map(|&gamma| PredictionBand {
            gamma,
            lower: DMatrix::zeros(horizon, k),
            upper: DMatrix::zeros(horizon, k),
        })
        .collect();
    for h in 0..horizon {
        let mid: Vec<f64> = centre.row(h).iter().copied().collect();
        point.row_mut(h).copy_from_slice(&to_deaths(&mid));
        for band in &mut bands {
            let q = normal.inverse_cdf(1.0 - band.gamma / 2.0);
            let lo: Vec<f64> = (0..k).map(|x| mid[x] - q * sd[(h, x)]).collect();
            let hi: Vec<f64> = (0..k).map(|x| mid[x] + q * sd[(h, x)]).collect();
            let (dl, du) = (to_deaths(&lo), to_deaths(&hi));
            for x in 0..k {
                band.lower[(h, x)] = dl[x].min(du[x]);
                band.upper[(h, x)] = dl[x].max(du[x]);
            }
        }
    }
    Ok(DeathForecast { point, bands })
}

/// clr-space point forecasts and standard deviations, `H x K` each.
pub fn naive_clr_paths(
    grid: &DeathGrid,
    with_drift: bool,
    horizon: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (_, centre, sd) = clr_forecast(grid, with_drift, horizon)?;
    Ok((centre, sd))
}

fn clr_forecast(
    grid: &DeathGrid,
    with_drift: bool,
    horizon: usize,
) -> Result<(GeometricMeans, DMatrix<f64>, DMatrix<f64>)> {
    let means = geometric_means(grid)?;
    let clr = clr_transform(grid, &means)?;
    let z = clr.z();
    let k = z.ncols();
    let mut centre = DMatrix::zeros(horizon, k);
    let mut sd = DMatrix::zeros(horizon, k);
    for x in 0..k {
        let w = fit_rw(&z.column(x).iter().copied().collect::<Vec<_>>(), with_drift)?;
        let fc = w.forecast(horizon);
        for h in 0..horizon {
            centre[(h, x)] = fc.mean[h];
            sd[(h, x)] = fc.variance[h].sqrt();
        }
    }
    Ok((means, centre, sd))
}
