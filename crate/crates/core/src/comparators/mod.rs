//! Benchmark forecasters: Lee–Carter, a simplified Hyndman–Ullah model and
//! naive random walks on clr-transformed death counts.

pub mod hyndman_ullah;
pub mod lee_carter;
pub mod mortality;
pub mod naive;

use nalgebra::DMatrix;

pub use hyndman_ullah::{fit_hu, fit_hu_with, whittaker_smooth, HuModel, Smoothing};
pub use lee_carter::{fit_lee_carter, LeeCarterModel};
pub use mortality::{deaths_from_log_rates, grid_to_log_mortality, MortalitySurface};
pub use naive::naive_clr_rw;

use crate::error::{Error, Result};
use crate::forecast::{
    combine_scores, BootstrapForecast, BootstrapOptions, DeathForecast, FactorBootstrap,
};
use crate::univariate::{ScoreForecaster, UnivariateForecast};

/// Log-rate factor model `ln m = mean + sum_l beta_l phi_l + e` shared by the
/// Lee–Carter and Hyndman–Ullah forecasts.
#[derive(Debug, Clone)]
pub struct LogRateModel {
    /// Length `K-1`.
    pub mean: Vec<f64>,
    /// `L x (K-1)`.
    pub components: DMatrix<f64>,
    pub forecasters: Vec<ScoreForecaster>,
    /// `n x (K-1)`.
    pub residuals: DMatrix<f64>,
    pub radix: f64,
}

impl LogRateModel {
    pub fn n_ages(&self) -> usize {
        self.mean.len() + 1
    }

    pub fn score_forecasts(&self, horizon: usize) -> Vec<UnivariateForecast> {
        self.forecasters
            .iter()
            .map(|f| f.forecast(horizon))
            .collect()
    }

    fn to_deaths(&self, centred: &[f64]) -> Vec<f64> {
        let log_m: Vec<f64> = centred.iter().zip(&self.mean).map(|(c, a)| c + a).collect();
        deaths_from_log_rates(&log_m, self.radix)
    }

    /// `H x K` point forecast of death counts.
    pub fn point_forecast(&self, horizon: usize) -> Result<DMatrix<f64>> {
        if horizon == 0 {
            return Err(Error::Argument(
                "forecast horizon must be at least 1".into(),
            ));
        }
        let scores = self.score_forecasts(horizon);
        let mut out = DMatrix::zeros(horizon, self.n_ages());
        for h in 0..horizon {
            let c = combine_scores(&self.components, |l| scores[l].mean[h]);
            out.row_mut(h).copy_from_slice(&self.to_deaths(&c));
        }
        Ok(out)
    }

    pub fn bootstrap_forecast(
        &self,
        horizon: usize,
        opts: &BootstrapOptions,
    ) -> Result<BootstrapForecast> {
        let scores = self.score_forecasts(horizon);
        FactorBootstrap {
            scores: &scores,
            components: &self.components,
            residuals: &self.residuals,
            to_deaths: |c: &[f64]| self.to_deaths(c),
        }
        .run(horizon, opts)
    }

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
