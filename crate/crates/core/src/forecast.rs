//! Forecast containers shared by every method: bootstrap samples, pointwise
//! bands and the forecast CSV export.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::resample::{quantile_sorted, replicate_rng};
use crate::univariate::UnivariateForecast;

/// Replicate count, seed and sampling switches for a bootstrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Resample whole residual rows (keeps cross-age dependence) instead of
    /// one year per age.
    pub residual_rows: bool,
    /// Draw one error origin shared by all components at each horizon.
    pub joint_score_errors: bool,
}

impl BootstrapOptions {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            residual_rows: false,
            joint_score_errors: false,
        }
    }
}

/// A fitted factor model `y = sum_l beta_l phi_l + residual` whose score
/// forecasts carry in-sample error pools.
pub(crate) struct FactorBootstrap<'a, F> {
    pub scores: &'a [UnivariateForecast],
    /// `L x P`.
    pub components: &'a DMatrix<f64>,
    /// `n x P`.
    pub residuals: &'a DMatrix<f64>,
    /// Maps a reconstructed row (components plus residual) to deaths.
    pub to_deaths: F,
}

/// `sum_l beta_l phi_l` for one row.
pub(crate) fn combine_scores(components: &DMatrix<f64>, score: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut z = vec![0.0; components.ncols()];
    for l in 0..components.nrows() {
        let beta = score(l);
        for (x, zx) in z.iter_mut().enumerate() {
            *zx += beta * components[(l, x)];
        }
    }
    z
}

impl<F> FactorBootstrap<'_, F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    /// Each replicate adds an in-sample error of matching horizon to every
    /// forecast score and a resampled residual to every coordinate.
    pub fn run(&self, horizon: usize, opts: &BootstrapOptions) -> Result<BootstrapForecast> {
        if horizon == 0 || opts.replicates == 0 {
            return Err(Error::Argument(
                "horizon and replicate count must be positive".into(),
            ));
        }
        for (l, s) in self.scores.iter().enumerate() {
            if s.horizon() < horizon {
                return Err(Error::Argument(format!(
                    "component {} forecast covers {} of {horizon} steps",
                    l + 1,
                    s.horizon()
                )));
            }
            if let Some(h) = s.insample_errors[..horizon]
                .iter()
                .position(|p| p.is_empty())
            {
                return Err(Error::Argument(format!(
                    "component {}: no in-sample errors at horizon {}",
                    l + 1,
                    h + 1
                )));
            }
        }
        let n = self.residuals.nrows();
        if n == 0 {
            return Err(Error::Argument("empty residual matrix".into()));
        }
        let paths: Vec<DMatrix<f64>> = (0..opts.replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = replicate_rng(opts.seed, b as u64);
                let mut path: Option<DMatrix<f64>> = None;
                for h in 0..horizon {
                    let shared = match self.scores.first() {
                        Some(s) => rng.random_range(0..s.insample_errors[h].len()),
                        None => 0,
                    };
                    let perturbed: Vec<f64> = self
                        .scores
                        .iter()
                        .map(|s| {
                            let pool = &s.insample_errors[h];
                            let idx = if opts.joint_score_errors {
                                shared.min(pool.len() - 1)
                            } else {
                                rng.random_range(0..pool.len())
                            };
                            s.mean[h] + pool[idx]
                        })
                        .collect();
                    let mut z = combine_scores(self.components, |l| perturbed[l]);
                    if opts.residual_rows {
                        let t = rng.random_range(0..n);
                        for (x, zx) in z.iter_mut().enumerate() {
                            *zx += self.residuals[(t, x)];
                        }
                    } else {
                        for (x, zx) in z.iter_mut().enumerate() {
                            *zx += self.residuals[(rng.random_range(0..n), x)];
                        }
                    }
                    let deaths = (self.to_deaths)(&z);
                    let p = path.get_or_insert_with(|| DMatrix::zeros(horizon, deaths.len()));
                    p.row_mut(h).copy_from_slice(&deaths);
                }
                path.expect("horizon is positive")
            })
            .collect();
        Ok(BootstrapForecast::from_paths(&paths))
    }
}

/// Bootstrap replicates of future death distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapForecast {
    /// `samples[h - 1]` is a `B x K` matrix of replicate death vectors.
    pub samples: Vec<DMatrix<f64>>,
}

impl BootstrapForecast {
    pub fn horizon(&self) -> usize {
        self.samples.len()
    }

    pub fn replicates(&self) -> usize {
        self.samples.first().map_or(0, |m| m.nrows())
    }

    pub fn n_ages(&self) -> usize {
        self.samples.first().map_or(0, |m| m.ncols())
    }

    /// Assembles per-replicate `H x K` paths into per-horizon matrices.
    pub fn from_paths(paths: &[DMatrix<f64>]) -> Self {
        let b = paths.len();
        let (h, k) = paths.first().map_or((0, 0), |p| p.shape());
        let samples = (0..h)
            .map(|step| DMatrix::from_fn(b, k, |r, x| paths[r][(step, x)]))
            .collect();
        BootstrapForecast { samples }
    }

    /// Replicate `r` as an `H x K` path.
    pub fn path(&self, r: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.horizon(), self.n_ages(), |h, x| {
            self.samples[h][(r, x)]
        })
    }
}

/// Pointwise `100(1 - gamma)%` band, `H x K` each.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBand {
    pub gamma: f64,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

/// Empirical `gamma/2` and `1 - gamma/2` quantiles (type 7) at every cell.
pub fn prediction_interval(boot: &BootstrapForecast, gamma: f64) -> Result<PredictionBand> {
    check_gamma(gamma)?;
    if boot.replicates() == 0 {
        return Err(Error::Argument("bootstrap has no replicates".into()));
    }
    let (h, k) = (boot.horizon(), boot.n_ages());
    let mut lower = DMatrix::zeros(h, k);
    let mut upper = DMatrix::zeros(h, k);
    let mut column = Vec::with_capacity(boot.replicates());
    for (step, sample) in boot.samples.iter().enumerate() {
        for x in 0..k {
            column.clear();
            column.extend(sample.column(x).iter().copied());
            column.sort_by(f64::total_cmp);
            lower[(step, x)] = quantile_sorted(&column, gamma / 2.0);
            upper[(step, x)] = quantile_sorted(&column, 1.0 - gamma / 2.0);
        }
    }
    Ok(PredictionBand {
        gamma,
        lower,
        upper,
    })
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("gamma {gamma} outside (0, 1)")))
    }
}

/// Point forecast plus one band per requested significance level.
#[derive(Debug, Clone, PartialEq)]
pub struct DeathForecast {
    /// `H x K`.
    pub point: DMatrix<f64>,
    pub bands: Vec<PredictionBand>,
}

impl DeathForecast {
    pub fn horizon(&self) -> usize {
        self.point.nrows()
    }

    /// Point forecast with one bootstrap band per `gamma`.
    pub fn from_bootstrap(
        point: DMatrix<f64>,
        boot: &BootstrapForecast,
        gammas: &[f64],
    ) -> Result<Self> {
        let bands = gammas
            .iter()
            .map(|g| prediction_interval(boot, *g))
            .collect::<Result<Vec<_>>>()?;
        Ok(DeathForecast { point, bands })
    }

    pub fn band(&self, gamma: f64) -> Option<&PredictionBand> {
        self.bands.iter().find(|b| (b.gamma - gamma).abs() < 1e-12)
    }
}

/// Column label for a band, e.g. `80` for `gamma = 0.2`.
pub fn coverage_label(gamma: f64) -> String {
    let pct = 100.0 * (1.0 - gamma);
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}", pct.round() as i64)
    } else {
        format!("{pct}")
    }
}

/// `horizon,age,point,lower80,upper80,lower95,upper95` (one pair per band).
pub fn forecast_csv(forecast: &DeathForecast) -> String {
    let mut out = String::from("horizon,age,point");
    for band in &forecast.bands {
        let label = coverage_label(band.gamma);
        out.push_str(&format!(",lower{label},upper{label}"));
    }
    out.push('\n');
    for h in 0..forecast.horizon() {
        for x in 0..forecast.point.ncols() {
            out.push_str(&format!("{},{},{:.6}", h + 1, x, forecast.point[(h, x)]));
            for band in &forecast.bands {
                out.push_str(&format!(
                    ",{:.6},{:.6}",
                    band.lower[(h, x)],
                    band.upper[(h, x)]
                ));
            }
            out.push('\n');
        }
    }
    out
}
