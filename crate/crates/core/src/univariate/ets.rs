//! Additive-error, non-seasonal exponential smoothing state space models
//! (ANN, AAN, AAdN) with AICc model selection.
//!
//! Parameters and initial states are estimated jointly by maximising the
//! Gaussian innovations likelihood, which for additive errors reduces to
//! minimising `n ln(SSE)`.

use super::nelder_mead::{minimize, NelderMeadConfig};
use super::UnivariateForecast;
use crate::error::{Error, Result};

const PARAM_LO: f64 = 1e-4;
const ALPHA_HI: f64 = 0.9999;
const PHI_LO: f64 = 0.8;
const PHI_HI: f64 = 0.98;

/// Below this length only the trend-free model is fitted.
pub const MIN_TRENDED_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trend {
    None,
    Additive,
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EtsSpec {
    pub trend: Trend,
}

impl EtsSpec {
    pub const ANN: EtsSpec = EtsSpec { trend: Trend::None };
    pub const AAN: EtsSpec = EtsSpec {
        trend: Trend::Additive,
    };
    pub const AADN: EtsSpec = EtsSpec {
        trend: Trend::Damped,
    };

    pub fn name(&self) -> &'static str {
        match self.trend {
            Trend::None => "ETS(A,N,N)",
            Trend::Additive => "ETS(A,A,N)",
            Trend::Damped => "ETS(A,Ad,N)",
        }
    }

    /// Free parameters: smoothing weights, initial states and the variance.
    pub fn n_params(&self) -> usize {
        match self.trend {
            Trend::None => 3,
            Trend::Additive => 5,
            Trend::Damped => 6,
        }
    }

    fn has_trend(&self) -> bool {
        self.trend != Trend::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub alpha: f64,
    /// Trend smoothing, `0 < beta < alpha`; zero without trend.
    pub beta: f64,
    /// Damping; 1 for undamped models.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtsFit {
    pub spec: EtsSpec,
    pub params: SmoothingParams,
    pub initial_level: f64,
    pub initial_trend: f64,
    pub sigma2: f64,
    pub loglik: f64,
    pub aicc: f64,
    /// One-step in-sample forecasts `y_{t|t-1}`.
    pub fitted: Vec<f64>,
    series: Vec<f64>,
    /// `(level, trend)` after each observation; index 0 is the initial state.
    states: Vec<(f64, f64)>,
}

/// Fits ANN, AAN and AAdN and returns the candidate with the smallest AICc.
pub fn fit_ets_auto(series: &[f64]) -> Result<EtsFit> {
    let candidates: &[EtsSpec] = if series.len() < MIN_TRENDED_LEN {
        &[EtsSpec::ANN]
    } else {
        &[EtsSpec::ANN, EtsSpec::AAN, EtsSpec::AADN]
    };
    let mut best: Option<EtsFit> = None;
    for spec in candidates {
        match fit_ets(series, *spec) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
                    best = Some(fit);
                }
            }
            Err(e) => log::debug!("{} skipped: {e}", spec.name()),
        }
    }
    best.ok_or_else(|| Error::Numeric("no ETS candidate could be fitted".into()))
}

/// Fits one model specification from three fixed starting points.
pub fn fit_ets(series: &[f64], spec: EtsSpec) -> Result<EtsFit> {
    let n = series.len();
    if n < 3 {
        return Err(Error::Argument(format!(
            "ETS needs at least 3 observations, got {n}"
        )));
    }
    if series.iter().any(|y| !y.is_finite()) {
        return Err(Error::Domain("non-finite value in series".into()));
    }
    let sse_floor = f64::MIN_POSITIVE * n as f64;
    let (level0, trend0) = initial_states(series, spec);
    let scale = series_scale(series);
    let objective = |theta: &[f64]| {
        let (params, l0, b0) = decode(spec, theta);
        let sse = filter_sse(series, spec, &params, l0, b0);
        n as f64 * sse.max(sse_floor).ln()
    };

    let config = NelderMeadConfig::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for alpha_frac in [0.1, 0.5, 0.9] {
        let start = encode(spec, alpha_frac, level0, trend0);
        let steps = steps(spec, scale);
        let m = minimize(objective, &start, &steps, &config);
        if m.value.is_finite() && best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    let (_, theta) = best
        .ok_or_else(|| Error::Numeric(format!("{} likelihood optimisation failed", spec.name())))?;
    let (params, l0, b0) = decode(spec, &theta);
    Ok(build_fit(series, spec, params, l0, b0))
}

fn build_fit(series: &[f64], spec: EtsSpec, params: SmoothingParams, l0: f64, b0: f64) -> EtsFit {
    let n = series.len();
    let mut states = Vec::with_capacity(n + 1);
    let mut fitted = Vec::with_capacity(n);
    let (mut level, mut trend) = (l0, b0);
    states.push((level, trend));
    let mut sse = 0.0;
    for &y in series {
        let forecast = level + params.phi * trend;
        let e = y - forecast;
        sse += e * e;
        fitted.push(forecast);
        (level, trend) = update(spec, &params, level, trend, e);
        states.push((level, trend));
    }
    let nf = n as f64;
    let sigma2 = sse / nf;
    let loglik =
        -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2.max(f64::MIN_POSITIVE)).ln() + 1.0);
    let k = spec.n_params() as f64;
    let aicc = if nf - k - 1.0 > 0.0 {
        -2.0 * loglik + 2.0 * k * nf / (nf - k - 1.0)
    } else {
        // too short for the small-sample correction
        -2.0 * loglik + 2.0 * k
    };
    EtsFit {
        spec,
        params,
        initial_level: l0,
        initial_trend: b0,
        sigma2,
        loglik,
        aicc,
        fitted,
        series: series.to_vec(),
        states,
    }
}

#[inline]
fn update(spec: EtsSpec, p: &SmoothingParams, level: f64, trend: f64, e: f64) -> (f64, f64) {
    if spec.has_trend() {
        (
            level + p.phi * trend + p.alpha * e,
            p.phi * trend + p.beta * e,
        )
    } else {
        (level + p.alpha * e, 0.0)
    }
}

fn filter_sse(series: &[f64], spec: EtsSpec, p: &SmoothingParams, l0: f64, b0: f64) -> f64 {
    let (mut level, mut trend) = (l0, b0);
    let mut sse = 0.0;
    for &y in series {
        let e = y - (level + p.phi * trend);
        sse += e * e;
        (level, trend) = update(spec, p, level, trend, e);
    }
    sse
}

/// Sum `phi + phi^2 + ... + phi^h`.
fn damped_sum(phi: f64, h: usize) -> f64 {
    let mut acc = 0.0;
    let mut pow = 1.0;
    for _ in 0..h {
        pow *= phi;
        acc += pow;
    }
    acc
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn decode(spec: EtsSpec, theta: &[f64]) -> (SmoothingParams, f64, f64) {
    let alpha = PARAM_LO + (ALPHA_HI - PARAM_LO) * sigmoid(theta[0]);
    match spec.trend {
        Trend::None => (
            SmoothingParams {
                alpha,
                beta: 0.0,
                phi: 1.0,
            },
            theta[1],
            0.0,
        ),
        Trend::Additive | Trend::Damped => {
            let beta = PARAM_LO + (alpha - 2.0 * PARAM_LO).max(0.0) * sigmoid(theta[1]);
            let (phi, rest) = if spec.trend == Trend::Damped {
                (PHI_LO + (PHI_HI - PHI_LO) * sigmoid(theta[2]).max(1e-6), 3)
            } else {
                (1.0, 2)
            };
            (
                SmoothingParams { alpha, beta, phi },
                theta[rest],
                theta[rest + 1],
            )
        }
    }
}

fn encode(spec: EtsSpec, alpha_frac: f64, level0: f64, trend0: f64) -> Vec<f64> {
    let mut theta = vec![logit(alpha_frac)];
    if spec.has_trend() {
        theta.push(logit(0.1));
        if spec.trend == Trend::Damped {
            theta.push(logit(0.5));
        }
        theta.push(level0);
        theta.push(trend0);
    } else {
        theta.push(level0);
    }
    theta
}

fn steps(spec: EtsSpec, scale: f64) -> Vec<f64> {
    let mut s = vec![1.0];
    if spec.has_trend() {
        s.push(1.0);
        if spec.trend == Trend::Damped {
            s.push(1.0);
        }
        s.push(scale);
        s.push(0.1 * scale);
    } else {
        s.push(scale);
    }
    s
}

fn series_scale(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let sd = (series.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    let s = 0.5 * sd.max(0.1 * mean.abs());
    if s > 0.0 {
        s
    } else {
        1e-3
    }
}

/// Least-squares line through the first few observations, extrapolated to
/// time zero.
fn initial_states(series: &[f64], spec: EtsSpec) -> (f64, f64) {
    if !spec.has_trend() {
        return (series[0], 0.0);
    }
    let m = series.len().min(10);
    let xs: Vec<f64> = (1..=m).map(|t| t as f64).collect();
    let x_mean = xs.iter().sum::<f64>() / m as f64;
    let y_mean = series[..m].iter().sum::<f64>() / m as f64;
    let sxy: f64 = xs
        .iter()
        .zip(series)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (y_mean - slope * x_mean, slope)
}

impl EtsFit {
    pub fn series(&self) -> &[f64] {
        &self.series
    }

    /// Final `(level, trend)` state.
    pub fn final_state(&self) -> (f64, f64) {
        *self.states.last().expect("at least the initial state")
    }

    fn mean_from(&self, state: (f64, f64), h: usize) -> f64 {
        state.0 + damped_sum(self.params.phi, h) * state.1
    }

    /// Point forecasts, analytic variances and in-sample h-step error pools.
    ///
    /// Error pools replay the final fitted parameters from every origin, so
    /// the pool for horizon `h` holds `n - h` errors.
    pub fn forecast(&self, horizon: usize) -> UnivariateForecast {
        let n = self.series.len();
        let last = self.final_state();
        let p = &self.params;
        let mean = (1..=horizon).map(|h| self.mean_from(last, h)).collect();

        let mut variance = Vec::with_capacity(horizon);
        let mut acc = 1.0;
        for h in 1..=horizon {
            if h > 1 {
                let j = h - 1;
                let c = p.alpha + p.beta * damped_sum(p.phi, j);
                acc += c * c;
            }
            variance.push(self.sigma2 * acc);
        }

        let insample_errors = (1..=horizon)
            .map(|h| {
                (1..=n.saturating_sub(h))
                    .map(|origin| {
                        self.series[origin + h - 1] - self.mean_from(self.states[origin], h)
                    })
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
