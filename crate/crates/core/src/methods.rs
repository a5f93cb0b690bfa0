//! Every forecasting method behind one name and one call.

use std::fmt;
use std::str::FromStr;

use crate::coda_forecast::{fit_coda, NcompMode};
use crate::comparators::{fit_hu, fit_lee_carter, naive_clr_rw};
use crate::error::{Error, Result};
use crate::forecast::{BootstrapForecast, BootstrapOptions, DeathForecast};
use crate::lifetable::DeathGrid;
use crate::univariate::ForecasterKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Coda {
        kind: ForecasterKind,
        ncomp: NcompMode,
    },
    LeeCarter,
    HyndmanUllah,
    /// Per-age random walk on clr data, with drift when `true`.
    NaiveRw(bool),
}

impl Method {
    pub fn score_forecaster(&self) -> &'static str {
        match self {
            Method::Coda { kind, .. } => kind.as_str(),
            Method::LeeCarter => "rwd",
            Method::HyndmanUllah => "ets",
            Method::NaiveRw(false) => "rw",
            Method::NaiveRw(true) => "rwd",
        }
    }

    /// Component setting as reported in tables.
    pub fn components(&self) -> String {
        match self {
            Method::Coda {
                ncomp: NcompMode::Fixed(l),
                ..
            } => l.to_string(),
            Method::Coda {
                ncomp: NcompMode::Cpv(d),
                ..
            } => format!("cpv:{d}"),
            Method::LeeCarter => "1".into(),
            Method::HyndmanUllah => "6".into(),
            Method::NaiveRw(_) => "NA".into(),
        }
    }

    /// Point forecast over `1..=H` with one band per `gamma`, plus the
    /// bootstrap replicates for methods that draw them.
    pub fn forecast(
        &self,
        grid: &DeathGrid,
        horizon: usize,
        gammas: &[f64],
        opts: &BootstrapOptions,
    ) -> Result<(DeathForecast, Option<BootstrapForecast>)> {
        let (fc, boot) = match self {
            Method::Coda { kind, ncomp } => {
                fit_coda(grid, *ncomp, *kind)?.forecast_with_bands(horizon, gammas, opts)?
            }
            Method::LeeCarter => fit_lee_carter(grid)?
                .as_log_rate_model()
                .forecast_with_bands(horizon, gammas, opts)?,
            Method::HyndmanUllah => fit_hu(grid)?
                .model
                .forecast_with_bands(horizon, gammas, opts)?,
            Method::NaiveRw(drift) => {
                return Ok((naive_clr_rw(grid, *drift, horizon, gammas)?, None))
            }
        };
        Ok((fc, Some(boot)))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Coda { kind, ncomp } => match ncomp {
                NcompMode::Fixed(l) => write!(f, "coda-{kind}-L{l}"),
                NcompMode::Cpv(d) if *d == crate::coda::DEFAULT_CPV => write!(f, "coda-{kind}-cpv"),
                NcompMode::Cpv(d) => write!(f, "coda-{kind}-cpv:{d}"),
            },
            Method::LeeCarter => f.write_str("lc"),
            Method::HyndmanUllah => f.write_str("hu"),
            Method::NaiveRw(false) => f.write_str("rw"),
            Method::NaiveRw(true) => f.write_str("rwd"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `lc`, `hu`, `rw`, `rwd`, `coda` or `coda-<ets|rw|rwd>[-<L6|cpv[:delta]>]`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "lc" | "lee-carter" => return Ok(Method::LeeCarter),
            "hu" | "hu-ets" | "hyndman-ullah" => return Ok(Method::HyndmanUllah),
            "rw" => return Ok(Method::NaiveRw(false)),
            "rwd" => return Ok(Method::NaiveRw(true)),
            _ => {}
        }
        let bad = || {
            Error::Argument(format!(
                "unknown method `{s}` (expected coda[-ets|rw|rwd[-L<n>|cpv]], lc, hu, rw or rwd)"
            ))
        };
        let rest = lower.strip_prefix("coda").ok_or_else(bad)?;
        let mut parts = rest.strip_prefix('-').unwrap_or(rest).splitn(2, '-');
        let kind = match parts.next() {
            None | Some("") => ForecasterKind::Ets,
            Some(k) => k.parse().map_err(|_| bad())?,
        };
        let ncomp = match parts.next() {
            None => NcompMode::default(),
            Some(l) => match l.strip_prefix('l') {
                Some(n) => format!("fixed:{n}").parse().map_err(|_| bad())?,
                None => l.parse().map_err(|_| bad())?,
            },
        };
        Ok(Method::Coda { kind, ncomp })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in [
            "coda-ets-L6",
            "coda-rwd-cpv",
            "coda-rw-cpv:0.9",
            "lc",
            "hu",
            "rw",
            "rwd",
        ] {
            let m: Method = name.parse().unwrap();
            assert_eq!(m.to_string(), name);
        }
        assert_eq!(
            "coda".parse::<Method>().unwrap(),
            Method::Coda {
                kind: ForecasterKind::Ets,
                ncomp: NcompMode::default()
            }
        );
        assert!("coda-arima-L6".parse::<Method>().is_err());
        assert!("coda-ets-L0".parse::<Method>().is_err());
        assert!("lcx".parse::<Method>().is_err());
    }

    #[test]
    fn report_columns() {
        let m: Method = "coda-ets-L6".parse().unwrap();
        assert_eq!(
            (m.score_forecaster(), m.components()),
            ("ets", "6".to_string())
        );
        assert_eq!(Method::NaiveRw(true).components(), "NA");
    }

    #[test]
    fn every_method_yields_valid_tables() {
        let grid = crate::synthetic::synthetic_grid(30, 4);
        let opts = BootstrapOptions::new(20, 1);
        for name in ["coda-rwd-cpv", "lc", "hu", "rw"] {
            let m: Method = name.parse().unwrap();
            let (fc, boot) = m.forecast(&grid, 3, &[0.2, 0.05], &opts).unwrap();
            assert_eq!(fc.point.shape(), (3, grid.n_ages()));
            assert_eq!(fc.bands.len(), 2);
            assert_eq!(boot.is_some(), name != "rw");
            for h in 0..3 {
                assert!((fc.point.row(h).sum() - 100_000.0).abs() < 1e-6);
            }
        }
    }
}
