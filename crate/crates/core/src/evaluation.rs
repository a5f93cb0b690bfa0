//! Expanding-window backtests scored by MAPE and the interval score.

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forecast::{coverage_label, BootstrapOptions};
use crate::lifetable::DeathGrid;
use crate::methods::Method;
use crate::resample::split_seed;

pub const DEFAULT_TRAIN_END: i32 = 1994;
pub const DEFAULT_HORIZON: usize = 20;
pub const DEFAULT_GAMMAS: [f64; 2] = [0.2, 0.05];
const MIN_TRAIN_YEARS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    /// Last year of the first training window.
    pub train_end: i32,
    pub horizon: usize,
    pub gammas: Vec<f64>,
    /// Bootstrap settings; each origin derives its own seed from `seed`.
    pub bootstrap: BootstrapOptions,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            train_end: DEFAULT_TRAIN_END,
            horizon: DEFAULT_HORIZON,
            gammas: DEFAULT_GAMMAS.to_vec(),
            bootstrap: BootstrapOptions::new(crate::coda_forecast::DEFAULT_REPLICATES, 0),
        }
    }
}

/// One method's forecast of one target year.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub method: usize,
    pub origin: i32,
    pub h: usize,
    pub actual: Vec<f64>,
    pub point: Vec<f64>,
    /// `(gamma, lower, upper)`.
    pub bands: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl ForecastRecord {
    pub fn target_year(&self) -> i32 {
        self.origin + self.h as i32
    }

    fn band(&self, gamma: f64) -> Option<(&[f64], &[f64])> {
        self.bands
            .iter()
            .find(|(g, _, _)| (g - gamma).abs() < 1e-12)
            .map(|(_, l, u)| (l.as_slice(), u.as_slice()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backtest {
    pub methods: Vec<Method>,
    pub train_end: i32,
    pub final_year: i32,
    pub horizon: usize,
    pub gammas: Vec<f64>,
    /// Ordered by method, origin and horizon.
    pub records: Vec<ForecastRecord>,
}

/// Refits every method on data through each origin
/// `train_end..final_year` and forecasts up to the final year.
pub fn expanding_window_backtest(
    grid: &DeathGrid,
    methods: &[Method],
    config: &BacktestConfig,
) -> Result<Backtest> {
    let final_year = grid.last_year();
    if config.horizon == 0 {
        return Err(Error::Argument(
            "backtest horizon must be at least 1".into(),
        ));
    }
    let train_len = i64::from(config.train_end) - i64::from(grid.first_year()) + 1;
    if train_len < MIN_TRAIN_YEARS as i64 {
        return Err(Error::Argument(format!(
            "first training window {}..={} has fewer than {MIN_TRAIN_YEARS} years",
            grid.first_year(),
            config.train_end
        )));
    }
    if i64::from(final_year) < i64::from(config.train_end) + config.horizon as i64 {
        return Err(Error::Argument(format!(
            "data end in {final_year}; need at least {} for horizon {} after {}",
            i64::from(config.train_end) + config.horizon as i64,
            config.horizon,
            config.train_end
        )));
    }
    let origins: Vec<i32> = (config.train_end..final_year).collect();
    let per_origin: Vec<Vec<ForecastRecord>> = origins
        .par_iter()
        .map(|&origin| {
            let train = grid.slice_years(grid.first_year(), origin)?;
            let steps = config.horizon.min((final_year - origin) as usize);
            let opts = BootstrapOptions {
                seed: split_seed(config.bootstrap.seed, (origin - config.train_end) as u64),
                ..config.bootstrap
            };
            let mut out = Vec::new();
            for (mi, method) in methods.iter().enumerate() {
                let (fc, _) = method.forecast(&train, steps, &config.gammas, &opts)?;
                for h in 1..=steps {
                    let t = grid
                        .year_index(origin + h as i32)
                        .expect("target year lies inside the grid");
                    out.push(ForecastRecord {
                        method: mi,
                        origin,
                        h,
                        actual: grid.row(t),
                        point: fc.point.row(h - 1).iter().copied().collect(),
                        bands: fc
                            .bands
                            .iter()
                            .map(|b| {
                                (
                                    b.gamma,
                                    b.lower.row(h - 1).iter().copied().collect(),
                                    b.upper.row(h - 1).iter().copied().collect(),
                                )
                            })
                            .collect(),
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<ForecastRecord> = per_origin.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.method, r.origin, r.h));
    Ok(Backtest {
        methods: methods.to_vec(),
        train_end: config.train_end,
        final_year,
        horizon: config.horizon,
        gammas: config.gammas.clone(),
        records,
    })
}

/// Mean absolute percentage error over paired cells; zero actuals are
/// skipped.
pub fn mape<'a>(pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    let mut skipped = 0usize;
    for (actual, forecast) in pairs {
        if actual.len() != forecast.len() {
            return Err(Error::Argument("actual and forecast lengths differ".into()));
        }
        for (d, f) in actual.iter().zip(forecast) {
            if *d == 0.0 {
                skipped += 1;
                continue;
            }
            total += ((d - f) / d).abs();
            count += 1;
        }
    }
    if skipped > 0 {
        warn!("MAPE skipped {skipped} cells with zero actual deaths");
    }
    if count == 0 {
        return Err(Error::Domain("no cells with nonzero actuals".into()));
    }
    Ok(100.0 * total / count as f64)
}

/// `(u - l) + 2/gamma (l - d) 1{d < l} + 2/gamma (d - u) 1{d > u}`.
pub fn interval_score(lower: f64, upper: f64, actual: f64, gamma: f64) -> f64 {
    let mut score = upper - lower;
    if actual < lower {
        score += 2.0 / gamma * (lower - actual);
    }
    if actual > upper {
        score += 2.0 / gamma * (actual - upper);
    }
    score
}

impl Backtest {
    pub fn method_records(&self, method: usize, h: usize) -> Vec<&ForecastRecord> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.h == h)
            .collect()
    }

    /// Records for `(method, h)`, failing if any expected origin is absent.
    pub fn complete_records(&self, method: usize, h: usize) -> Result<Vec<&ForecastRecord>> {
        let found = self.method_records(method, h);
        let last_origin = self.final_year - h as i32;
        let missing: Vec<i32> = (self.train_end..=last_origin)
            .filter(|o| !found.iter().any(|r| r.origin == *o))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Structure(format!(
                "method {} horizon {h}: no forecasts from origins {missing:?}",
                self.methods
                    .get(method)
                    .map_or("?".into(), |m| m.to_string())
            )));
        }
        Ok(found)
    }

    pub fn mape(&self, method: usize, h: usize) -> Result<f64> {
        let records = self.complete_records(method, h)?;
        mape(
            records
                .iter()
                .map(|r| (r.actual.as_slice(), r.point.as_slice())),
        )
    }

    /// Average interval score over ages and forecast years at horizon `h`.
    pub fn mean_interval_score(&self, method: usize, gamma: f64, h: usize) -> Result<f64> {
        let records = self.complete_records(method, h)?;
        let mut total = 0.0;
        let mut count = 0usize;
        for r in records {
            let (lower, upper) = r.band(gamma).ok_or_else(|| {
                Error::Argument(format!("no band at gamma {gamma} for origin {}", r.origin))
            })?;
            for x in 0..r.actual.len() {
                total += interval_score(lower[x], upper[x], r.actual[x], gamma);
                count += 1;
            }
        }
        Ok(total / count as f64)
    }

    /// Per-horizon and overall (simple mean over horizons) errors.
    pub fn error_table(&self) -> Result<ErrorTable> {
        let mut rows = Vec::new();
        for (mi, method) in self.methods.iter().enumerate() {
            let mut per_h = Vec::with_capacity(self.horizon);
            for h in 1..=self.horizon {
                let mis = self
                    .gammas
                    .iter()
                    .map(|g| self.mean_interval_score(mi, *g, h))
                    .collect::<Result<Vec<_>>>()?;
                per_h.push(ErrorRow {
                    method: *method,
                    h: Some(h),
                    mape: self.mape(mi, h)?,
                    mis,
                });
            }
            let hs = per_h.len() as f64;
            let overall = ErrorRow {
                method: *method,
                h: None,
                mape: per_h.iter().map(|r| r.mape).sum::<f64>() / hs,
                mis: (0..self.gammas.len())
                    .map(|g| per_h.iter().map(|r| r.mis[g]).sum::<f64>() / hs)
                    .collect(),
            };
            rows.extend(per_h);
            rows.push(overall);
        }
        Ok(ErrorTable {
            gammas: self.gammas.clone(),
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub method: Method,
    /// `None` for the average over horizons.
    pub h: Option<usize>,
    pub mape: f64,
    /// One mean interval score per `gamma`, in configuration order.
    pub mis: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub gammas: Vec<f64>,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn overall(&self, method: &Method) -> Option<&ErrorRow> {
        self.rows
            .iter()
            .find(|r| r.h.is_none() && r.method == *method)
    }

    /// `method,score_forecaster,L,h,mape,mis80,mis95`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,score_forecaster,L,h,mape");
        for g in &self.gammas {
            out.push_str(&format!(",mis{}", coverage_label(*g)));
        }
        out.push('\n');
        for row in &self.rows {
            let h = row.h.map_or("overall".to_string(), |h| h.to_string());
            out.push_str(&format!(
                "{},{},{},{},{:.4}",
                row.method,
                row.method.score_forecaster(),
                row.method.components(),
                h,
                row.mape
            ));
            for s in &row.mis {
                out.push_str(&format!(",{s:.4}"));
            }
            out.push('\n');
        }
        out
    }
}
