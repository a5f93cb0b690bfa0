//! End-to-end compositional forecasting of death distributions.
//!
//! Fit: geometric means, clr, PCA with `L` components and one univariate
//! forecaster per score series. Forecast: extrapolate the scores, rebuild clr
//! rows from the components, invert the clr and re-centre by the geometric
//! means.
//!
//! Bootstrap replicates perturb each forecast score by an in-sample forecast
//! error of the same horizon and add a resampled PCA residual per age.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::coda::{
    clr_rows_to_deaths, clr_transform, fit_pca, geometric_means, inverse_clr, recompose_deaths,
    select_ncomp_cpv, GeometricMeans, PcaBasis,
};
use crate::error::{Error, Result};
pub use crate::forecast::BootstrapOptions;
use crate::forecast::{combine_scores, BootstrapForecast, DeathForecast, FactorBootstrap};
use crate::lifetable::DeathGrid;
use crate::univariate::{ForecasterKind, ScoreForecaster, UnivariateForecast};

/// Default number of bootstrap replicates.
pub const DEFAULT_REPLICATES: usize = 1000;

/// How the number of retained components is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NcompMode {
    /// Smallest `L` reaching this cumulative share of variance.
    Cpv(f64),
    Fixed(usize),
}

impl Default for NcompMode {
    fn default() -> Self {
        NcompMode::Cpv(crate::coda::DEFAULT_CPV)
    }
}

impl fmt::Display for NcompMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NcompMode::Cpv(d) => write!(f, "cpv:{d}"),
            NcompMode::Fixed(l) => write!(f, "fixed:{l}"),
        }
    }
}

impl FromStr for NcompMode {
    type Err = Error;

    /// Accepts `cpv`, `cpv:0.85`, `fixed:6` or a bare integer.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Argument(format!("bad component mode `{s}` (cpv[:delta] or fixed:L)"));
        if s == "cpv" {
            return Ok(NcompMode::default());
        }
        if let Some(d) = s.strip_prefix("cpv:") {
            let delta: f64 = d.parse().map_err(|_| bad())?;
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(bad());
            }
            return Ok(NcompMode::Cpv(delta));
        }
        let l = s.strip_prefix("fixed:").unwrap_or(&s);
        match l.parse::<usize>() {
            Ok(l) if l >= 1 => Ok(NcompMode::Fixed(l)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CodaModel {
    pub means: GeometricMeans,
    pub basis: PcaBasis,
    pub forecasters: Vec<ScoreForecaster>,
    pub radix: f64,
    pub ncomp_mode: NcompMode,
    pub last_year: i32,
}

pub fn fit_coda(grid: &DeathGrid, mode: NcompMode, kind: ForecasterKind) -> Result<CodaModel> {
    let means = geometric_means(grid)?;
    let clr = clr_transform(grid, &means)?;
    let ncomp = match mode {
        NcompMode::Fixed(l) => l,
        NcompMode::Cpv(delta) => {
            // spectrum only; components are refitted below at the chosen L
            let full = fit_pca(clr.z(), 1)?;
            select_ncomp_cpv(&full.eigenvalues, delta)?
        }
    };
    let basis = fit_pca(clr.z(), ncomp)?;
    let forecasters = (0..ncomp)
        .map(|l| ScoreForecaster::fit(kind, &basis.score_series(l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CodaModel {
        means,
        basis,
        forecasters,
        radix: grid.radix(),
        ncomp_mode: mode,
        last_year: grid.last_year(),
    })
}

impl CodaModel {
    pub fn ncomp(&self) -> usize {
        self.basis.ncomp()
    }

    pub fn n_ages(&self) -> usize {
        self.basis.components.ncols()
    }

    pub fn score_forecasts(&self, horizon: usize) -> Vec<UnivariateForecast> {
        self.forecasters
            .iter()
            .map(|f| f.forecast(horizon))
            .collect()
    }

    /// In-sample fitted death grid from the retained components.
    pub fn fitted_deaths(&self) -> DMatrix<f64> {
        clr_rows_to_deaths(&self.basis.reconstruction(), &self.means, self.radix)
    }

    fn deaths_from_clr(&self, z: &[f64]) -> Vec<f64> {
        recompose_deaths(&inverse_clr(z), &self.means, self.radix)
    }

    /// `H x K` point forecast of death counts.
    pub fn point_forecast(&self, horizon: usize) -> Result<DMatrix<f64>> {
        if horizon == 0 {
            return Err(Error::Argument(
                "forecast horizon must be at least 1".into(),
            ));
        }
        let scores = self.score_forecasts(horizon);
        Ok(self.point_from(&scores))
    }

    fn point_from(&self, scores: &[UnivariateForecast]) -> DMatrix<f64> {
        let horizon = scores.first().map_or(0, |s| s.horizon());
        let k = self.n_ages();
        let mut out = DMatrix::zeros(horizon, k);
        for h in 0..horizon {
            let z = self.combine(|l| scores[l].mean[h]);
            out.row_mut(h).copy_from_slice(&self.deaths_from_clr(&z));
        }
        out
    }

    fn combine(&self, score: impl Fn(usize) -> f64) -> Vec<f64> {
        combine_scores(&self.basis.components, score)
    }

    /// Bootstrap replicates over horizons `1..=H`; deterministic given the
    /// seed regardless of thread scheduling.
    pub fn bootstrap_forecast(
        &self,
        horizon: usize,
        opts: &BootstrapOptions,
    ) -> Result<BootstrapForecast> {
        let scores = self.score_forecasts(horizon);
        FactorBootstrap {
            scores: &scores,
            components: &self.basis.components,
            residuals: &self.basis.residuals,
            to_deaths: |z: &[f64]| self.deaths_from_clr(z),
        }
        .run(horizon, opts)
    }

    /// Point forecast with bootstrap bands at each `gamma`.
    pub fn forecast_with_bands(
        &self,
        horizon: usize,
        gammas: &[f64],
        opts: &BootstrapOptions,
    ) -> Result<(DeathForecast, BootstrapForecast)> {
        let point = self.point_forecast(horizon)?;
        let boot = self.bootstrap_forecast(horizon, opts)?;
        Ok((DeathForecast::from_bootstrap(point, &boot, gammas)?, boot))
    }
}
