use super::UnivariateForecast;
use crate::error::{Error, Result};

/// Random walk, optionally with drift.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalk {
    series: Vec<f64>,
    pub drift: f64,
    /// Innovation variance of the first differences.
    pub sigma2: f64,
}

pub fn fit_rw(series: &[f64], with_drift: bool) -> Result<RandomWalk> {
    let n = series.len();
    let min = if with_drift { 3 } else { 2 };
    if n < min {
        return Err(Error::Argument(format!(
            "random walk{} needs at least {min} observations, got {n}",
            if with_drift { " with drift" } else { "" }
        )));
    }
    if series.iter().any(|y| !y.is_finite()) {
        return Err(Error::Domain("non-finite value in series".into()));
    }
    let drift = if with_drift {
        (series[n - 1] - series[0]) / (n - 1) as f64
    } else {
        0.0
    };
    let dof = if with_drift { n - 2 } else { n - 1 };
    let sigma2 = series
        .windows(2)
        .map(|w| (w[1] - w[0] - drift).powi(2))
        .sum::<f64>()
        / dof as f64;
    Ok(RandomWalk {
        series: series.to_vec(),
        drift,
        sigma2,
    })
}

impl RandomWalk {
    pub fn last(&self) -> f64 {
        *self.series.last().expect("fitted series is non-empty")
    }

    /// Mean `y_n + drift h`, variance `h sigma2`, and the in-sample
    /// `h`-step errors `y_t - (y_{t-h} + drift h)`.
    pub fn forecast(&self, horizon: usize) -> UnivariateForecast {
        let n = self.series.len();
        let last = self.last();
        let mean = (1..=horizon)
            .map(|h| last + self.drift * h as f64)
            .collect();
        let variance = (1..=horizon).map(|h| h as f64 * self.sigma2).collect();
        let insample_errors = (1..=horizon)
            .map(|h| {
                (h..n)
                    .map(|t| self.series[t] - self.series[t - h] - self.drift * h as f64)
                    .collect()
            })
            .collect();
        UnivariateForecast {
            mean,
            variance,
            insample_errors,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ramp() -> Vec<f64> {
        (1..=10).map(f64::from).collect()
    }

    #[test]
    fn drift_extends_ramp() {
        let rw = fit_rw(&ramp(), true).unwrap();
        assert_abs_diff_eq!(rw.drift, 1.0, epsilon = 1e-15);
        let fc = rw.forecast(5);
        for (h, m) in fc.mean.iter().enumerate() {
            assert_abs_diff_eq!(*m, 10.0 + (h + 1) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn no_drift_is_flat() {
        let fc = fit_rw(&ramp(), false).unwrap().forecast(5);
        assert!(fc.mean.iter().all(|m| *m == 10.0));
    }

    #[test]
    fn variance_is_sum_of_increments() {
        let y = [0.0, 1.0, -0.5, 0.7, 0.2, 1.4];
        let rw = fit_rw(&y, false).unwrap();
        // iid increments: Var(sum of h) = h * Var(one)
        let diffs: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let one = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
        let fc = rw.forecast(4);
        for (h, v) in fc.variance.iter().enumerate() {
            assert_abs_diff_eq!(*v, (h + 1) as f64 * one, epsilon = 1e-12);
        }
    }

    #[test]
    fn error_pools_have_n_minus_h() {
        let fc = fit_rw(&ramp(), true).unwrap().forecast(4);
        assert_eq!(fc.insample_errors[3].len(), 6);
        assert!(fc.insample_errors.iter().flatten().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn too_short() {
        assert!(fit_rw(&[1.0], false).is_err());
        assert!(fit_rw(&[1.0, 2.0], true).is_err());
    }
}
