//! Univariate forecasters for principal component score series.

pub mod ets;
pub mod nelder_mead;
pub mod random_walk;

use std::fmt;
use std::str::FromStr;

pub use ets::{fit_ets, fit_ets_auto, EtsFit, EtsSpec, Trend};
pub use random_walk::{fit_rw, RandomWalk};

use crate::error::{Error, Result};

/// Forecast of one series over horizons `1..=H`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateForecast {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// `insample_errors[h - 1]` holds `y_t - y_{t|t-h}` for `t = h+1..=n`.
    pub insample_errors: Vec<Vec<f64>>,
}

impl UnivariateForecast {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForecasterKind {
    Ets,
    Rw,
    Rwd,
}

impl ForecasterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ForecasterKind::Ets => "ets",
            ForecasterKind::Rw => "rw",
            ForecasterKind::Rwd => "rwd",
        }
    }
}

impl fmt::Display for ForecasterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ForecasterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ets" => Ok(ForecasterKind::Ets),
            "rw" => Ok(ForecasterKind::Rw),
            "rwd" => Ok(ForecasterKind::Rwd),
            other => Err(Error::Argument(format!(
                "unknown forecaster `{other}` (expected ets, rw or rwd)"
            ))),
        }
    }
}

/// A fitted score forecaster.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreForecaster {
    Ets(EtsFit),
    RandomWalk(RandomWalk),
}

impl ScoreForecaster {
    pub fn fit(kind: ForecasterKind, series: &[f64]) -> Result<Self> {
        Ok(match kind {
            ForecasterKind::Ets => ScoreForecaster::Ets(fit_ets_auto(series)?),
            ForecasterKind::Rw => ScoreForecaster::RandomWalk(fit_rw(series, false)?),
            ForecasterKind::Rwd => ScoreForecaster::RandomWalk(fit_rw(series, true)?),
        })
    }

    pub fn forecast(&self, horizon: usize) -> UnivariateForecast {
        match self {
            ScoreForecaster::Ets(fit) => fit.forecast(horizon),
            ScoreForecaster::RandomWalk(rw) => rw.forecast(horizon),
        }
    }
}
