//! Simplified Hyndman–Ullah model: per-year smoothing of log rates across
//! age, six principal components of the centred smooth surface and an
//! automatic ETS forecast for each score.
//!
//! The smoother is a Whittaker (second-difference penalised least squares)
//! fit with the weight chosen by generalised cross-validation. It is not
//! monotone.

use std::fmt;

use nalgebra::DMatrix;

use super::mortality::grid_to_log_mortality;
use super::LogRateModel;
use crate::coda::fit_pca;
use crate::error::{Error, Result};
use crate::lifetable::DeathGrid;
use crate::univariate::{ForecasterKind, ScoreForecaster};

pub const HU_COMPONENTS: usize = 6;

/// Smoothing weight per year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// Minimise GCV over a log grid of weights.
    Gcv,
    Fixed(f64),
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothing::Gcv => f.write_str("gcv"),
            Smoothing::Fixed(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HuModel {
    pub lambdas: Vec<f64>,
    /// `n x (K-1)` smoothed log rates.
    pub smoothed: DMatrix<f64>,
    pub model: LogRateModel,
}

impl HuModel {
    pub fn ncomp(&self) -> usize {
        self.model.components.nrows()
    }
}

pub fn fit_hu(grid: &DeathGrid) -> Result<HuModel> {
    fit_hu_with(grid, Smoothing::Gcv, HU_COMPONENTS, ForecasterKind::Ets)
}

pub fn fit_hu_with(
    grid: &DeathGrid,
    smoothing: Smoothing,
    ncomp: usize,
    kind: ForecasterKind,
) -> Result<HuModel> {
    let surface = grid_to_log_mortality(grid)?;
    let raw = &surface.log_m;
    let (n, p) = raw.shape();
    if p < 3 {
        return Err(Error::Argument(
            "smoothing needs at least three rate ages".into(),
        ));
    }
    let spectrum = penalty_spectrum(p);
    let mut smoothed = DMatrix::zeros(n, p);
    let mut lambdas = Vec::with_capacity(n);
    for t in 0..n {
        let y: Vec<f64> = raw.row(t).iter().copied().collect();
        let (lambda, s) = match smoothing {
            Smoothing::Fixed(l) if l >= 0.0 => (l, whittaker_smooth(&y, l)?),
            Smoothing::Fixed(l) => {
                return Err(Error::Argument(format!("negative smoothing weight {l}")))
            }
            Smoothing::Gcv => gcv_smooth(&y, &spectrum)?,
        };
        lambdas.push(lambda);
        smoothed.row_mut(t).copy_from_slice(&s);
    }

    let mean: Vec<f64> = (0..p).map(|x| smoothed.column(x).mean()).collect();
    let centred = DMatrix::from_fn(n, p, |t, x| smoothed[(t, x)] - mean[x]);
    let basis = fit_pca(&centred, ncomp)?;
    let forecasters = (0..ncomp)
        .map(|l| ScoreForecaster::fit(kind, &basis.score_series(l)))
        .collect::<Result<Vec<_>>>()?;
    let fitted = &basis.scores * &basis.components;
    let residuals = DMatrix::from_fn(n, p, |t, x| raw[(t, x)] - mean[x] - fitted[(t, x)]);
    Ok(HuModel {
        lambdas,
        smoothed,
        model: LogRateModel {
            mean,
            components: basis.components,
            forecasters,
            residuals,
            radix: surface.radix,
        },
    })
}

/// Solves `(I + lambda D'D) s = y` with `D` the second-difference operator,
/// through a banded Cholesky factorisation.
pub fn whittaker_smooth(y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n < 3 || lambda == 0.0 {
        return Ok(y.to_vec());
    }
    // band[i][k] holds A[i][i - k]
    let mut band = vec![[0.0f64; 3]; n];
    for row in &mut band {
        row[0] = 1.0;
    }
    for r in 0..n - 2 {
        let d = [1.0, -2.0, 1.0];
        for a in 0..3 {
            for b in 0..=a {
                band[r + a][a - b] += lambda * d[a] * d[b];
            }
        }
    }
    // lower Cholesky factor in the same layout
    let mut l = vec![[0.0f64; 3]; n];
    for i in 0..n {
        for k in (0..=2.min(i)).rev() {
            let j = i - k;
            let mut sum = band[i][k];
            for m in j.saturating_sub(2).max(i.saturating_sub(2))..j {
                sum -= l[i][i - m] * l[j][j - m];
            }
            if k == 0 {
                if sum <= 0.0 {
                    return Err(Error::Numeric(
                        "smoother system is not positive definite".into(),
                    ));
                }
                l[i][0] = sum.sqrt();
            } else {
                l[i][k] = sum / l[j][0];
            }
        }
    }
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut sum = y[i];
        for k in 1..=2.min(i) {
            sum -= l[i][k] * w[i - k];
        }
        w[i] = sum / l[i][0];
    }
    let mut s = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = w[i];
        for k in 1..=2 {
            if i + k < n {
                sum -= l[i + k][k] * s[i + k];
            }
        }
        s[i] = sum / l[i][0];
    }
    Ok(s)
}

/// Eigenvalues of `D'D`, used for the hat-matrix trace `sum 1/(1 + lambda mu)`.
fn penalty_spectrum(n: usize) -> Vec<f64> {
    let d = DMatrix::from_fn(n.saturating_sub(2), n, |r, c| match c.wrapping_sub(r) {
        0 | 2 => 1.0,
        1 => -2.0,
        _ => 0.0,
    });
    let dtd = d.transpose() * d;
    dtd.symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|v: &f64| v.max(0.0))
        .collect()
}

fn gcv_smooth(y: &[f64], spectrum: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = y.len() as f64;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for e in -8..=24 {
        let lambda = 10f64.powf(e as f64 * 0.25);
        let s = whittaker_smooth(y, lambda)?;
        let rss: f64 = y.iter().zip(&s).map(|(a, b)| (a - b).powi(2)).sum();
        let trace: f64 = spectrum.iter().map(|mu| 1.0 / (1.0 + lambda * mu)).sum();
        let gcv = n * rss / (n - trace).powi(2);
        if best.as_ref().is_none_or(|(g, _, _)| gcv < *g) {
            best = Some((gcv, lambda, s));
        }
    }
    let (_, lambda, s) = best.expect("weight grid is non-empty");
    Ok((lambda, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dense_solve(y: &[f64], lambda: f64) -> Vec<f64> {
        let n = y.len();
        let mut a = DMatrix::<f64>::identity(n, n);
        for r in 0..n - 2 {
            let mut d = DMatrix::<f64>::zeros(1, n);
            d[(0, r)] = 1.0;
            d[(0, r + 1)] = -2.0;
            d[(0, r + 2)] = 1.0;
            a += lambda * d.transpose() * d;
        }
        let rhs = nalgebra::DVector::from_column_slice(y);
        a.lu().solve(&rhs).unwrap().iter().copied().collect()
    }

    #[test]
    fn banded_matches_dense_solve() {
        let y: Vec<f64> = (0..10)
            .map(|i| ((i * 7 % 5) as f64).sin() + 0.1 * i as f64)
            .collect();
        for lambda in [0.01, 1.0, 37.5, 1e4] {
            let banded = whittaker_smooth(&y, lambda).unwrap();
            let dense = dense_solve(&y, lambda);
            for (a, b) in banded.iter().zip(&dense) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn linear_profile_is_preserved() {
        let y: Vec<f64> = (0..40).map(|x| -9.0 + 0.09 * x as f64).collect();
        for lambda in [1.0, 1e3, 1e6] {
            let s = whittaker_smooth(&y, lambda).unwrap();
            for (a, b) in s.iter().zip(&y) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn penalty_trace_matches_dense_hat_matrix() {
        let n = 9;
        let spectrum = penalty_spectrum(n);
        let lambda = 2.5;
        let trace: f64 = spectrum.iter().map(|mu| 1.0 / (1.0 + lambda * mu)).sum();
        let mut dense = 0.0;
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            dense += dense_solve(&e, lambda)[i];
        }
        assert_abs_diff_eq!(trace, dense, epsilon = 1e-10);
    }

    #[test]
    fn always_six_components() {
        let grid = crate::synthetic::synthetic_grid(30, 8);
        let hu = fit_hu(&grid).unwrap();
        assert_eq!(hu.ncomp(), 6);
        assert_eq!(hu.model.forecasters.len(), 6);
        assert!(hu.lambdas.iter().all(|l| *l > 0.0));
    }

    #[test]
    fn zero_weight_reproduces_unsmoothed_pca() {
        let grid = crate::synthetic::synthetic_grid(20, 6);
        let hu = fit_hu_with(&grid, Smoothing::Fixed(0.0), 6, ForecasterKind::Rwd).unwrap();
        let raw = grid_to_log_mortality(&grid).unwrap().log_m;
        assert_eq!(hu.smoothed, raw);
        let (n, p) = raw.shape();
        let mean: Vec<f64> = (0..p).map(|x| raw.column(x).mean()).collect();
        let centred = DMatrix::from_fn(n, p, |t, x| raw[(t, x)] - mean[x]);
        let s = centred.singular_values();
        let mut sq: Vec<f64> = s.iter().map(|v| v * v).collect();
        sq.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = sq[6..].iter().sum();
        assert_abs_diff_eq!(
            hu.model.residuals.norm_squared(),
            tail,
            epsilon = 1e-8 * sq[0]
        );
    }

    #[test]
    fn forecasts_are_valid_tables() {
        let grid = crate::synthetic::synthetic_grid(30, 2);
        let hu = fit_hu(&grid).unwrap();
        let fc = hu.model.point_forecast(10).unwrap();
        for h in 0..10 {
            assert!(fc.row(h).iter().all(|d| *d > 0.0));
            assert_abs_diff_eq!(fc.row(h).sum(), 100_000.0, epsilon = 1e-6);
        }
    }
}
