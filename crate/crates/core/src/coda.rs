//! Compositional transforms and principal component decomposition.
//!
//! A death grid is de-centred by the age-wise geometric means, closed to unit
//! row sums and mapped to real space with the centred log-ratio. Because the
//! de-centring already removes the column means of the log data, the clr
//! matrix is double-centred and is decomposed by SVD without further centring.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lifetable::DeathGrid;

/// Default cumulative-percentage-of-variance threshold.
pub const DEFAULT_CPV: f64 = 0.85;

/// Age-specific geometric means of the death counts over years.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMeans(Vec<f64>);

impl GeometricMeans {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::Domain(
                "geometric means must be finite and strictly positive".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Centred log-ratio coordinates of the de-centred compositions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClrMatrix {
    z: DMatrix<f64>,
    g: Vec<f64>,
}

impl ClrMatrix {
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Row geometric means of the closed data.
    pub fn row_geometric_means(&self) -> &[f64] {
        &self.g
    }
}

/// Truncated principal component decomposition `z = scores * components + residuals`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    /// `L x K`, orthonormal rows.
    pub components: DMatrix<f64>,
    /// `n x L`.
    pub scores: DMatrix<f64>,
    /// Full spectrum, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `n x K`.
    pub residuals: DMatrix<f64>,
}

impl PcaBasis {
    pub fn ncomp(&self) -> usize {
        self.components.nrows()
    }

    /// Rank-L reconstruction `scores * components`.
    pub fn reconstruction(&self) -> DMatrix<f64> {
        &self.scores * &self.components
    }

    pub fn score_series(&self, l: usize) -> Vec<f64> {
        self.scores.column(l).iter().copied().collect()
    }
}

pub fn geometric_means(grid: &DeathGrid) -> Result<GeometricMeans> {
    let values = grid.values();
    let n = values.nrows() as f64;
    let mut alpha = Vec::with_capacity(values.ncols());
    for col in values.column_iter() {
        if col.iter().any(|d| *d <= 0.0) {
            return Err(Error::Domain("geometric mean of non-positive count".into()));
        }
        alpha.push((col.iter().map(|d| d.ln()).sum::<f64>() / n).exp());
    }
    GeometricMeans::new(alpha)
}

/// De-centres by `means`, closes each row and applies the clr.
pub fn clr_transform(grid: &DeathGrid, means: &GeometricMeans) -> Result<ClrMatrix> {
    let values = grid.values();
    let alpha = means.as_slice();
    if alpha.len() != values.ncols() {
        return Err(Error::Argument(format!(
            "{} geometric means for {} ages",
            alpha.len(),
            values.ncols()
        )));
    }
    let k = values.ncols();
    let mut z = DMatrix::zeros(values.nrows(), k);
    let mut g = Vec::with_capacity(values.nrows());
    for (t, row) in values.row_iter().enumerate() {
        let ratio: Vec<f64> = row.iter().zip(alpha).map(|(d, a)| d / a).collect();
        let total: f64 = ratio.iter().sum();
        let log_f: Vec<f64> = ratio.iter().map(|r| (r / total).ln()).collect();
        let log_g = log_f.iter().sum::<f64>() / k as f64;
        for (x, lf) in log_f.iter().enumerate() {
            z[(t, x)] = lf - log_g;
        }
        g.push(log_g.exp());
    }
    Ok(ClrMatrix { z, g })
}

/// Inverse clr: softmax of `z`, shifted by its maximum for stability.
pub fn inverse_clr(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut f: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = f.iter().sum();
    for v in &mut f {
        *v /= total;
    }
    f
}

/// Re-centres a composition by the geometric means and scales it to `radix`.
pub fn recompose_deaths(composition: &[f64], means: &GeometricMeans, radix: f64) -> Vec<f64> {
    let weighted: Vec<f64> = composition
        .iter()
        .zip(means.as_slice())
        .map(|(f, a)| f * a)
        .collect();
    let total: f64 = weighted.iter().sum();
    weighted.into_iter().map(|w| radix * w / total).collect()
}

/// Death-count rows implied by clr rows (inverse clr then re-centring).
pub fn clr_rows_to_deaths(z: &DMatrix<f64>, means: &GeometricMeans, radix: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(z.nrows(), z.ncols());
    for (t, row) in z.row_iter().enumerate() {
        let zr: Vec<f64> = row.iter().copied().collect();
        let d = recompose_deaths(&inverse_clr(&zr), means, radix);
        out.row_mut(t).copy_from_slice(&d);
    }
    out
}

/// SVD-based principal components of `z` retaining `ncomp` terms.
///
/// Component signs are fixed so that each component's largest-magnitude
/// loading is positive.
pub fn fit_pca(z: &DMatrix<f64>, ncomp: usize) -> Result<PcaBasis> {
    let (n, k) = z.shape();
    let max = n.min(k);
    if ncomp < 1 || ncomp > max {
        return Err(Error::Argument(format!(
            "number of components {ncomp} outside 1..={max}"
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in PCA input".into()));
    }
    let svd = z.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numeric("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD did not return V".into()))?;
    let s = &svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let eigenvalues: Vec<f64> = order.iter().map(|&i| s[i] * s[i] / denom).collect();

    let mut components = DMatrix::zeros(ncomp, k);
    let mut scores = DMatrix::zeros(n, ncomp);
    for (l, &i) in order.iter().take(ncomp).enumerate() {
        let loading = v_t.row(i);
        let pivot = loading
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for x in 0..k {
            components[(l, x)] = sign * loading[x];
        }
        for t in 0..n {
            scores[(t, l)] = sign * u[(t, i)] * s[i];
        }
    }
    let residuals = z - &scores * &components;
    Ok(PcaBasis {
        components,
        scores,
        eigenvalues,
        residuals,
    })
}

/// Smallest `L` whose leading eigenvalues explain at least `delta` of the
/// positive spectrum.
pub fn select_ncomp_cpv(eigenvalues: &[f64], delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Argument(format!(
            "CPV threshold {delta} outside (0, 1]"
        )));
    }
    let total: f64 = eigenvalues.iter().filter(|l| **l > 0.0).sum();
    if total <= 0.0 {
        return Err(Error::Domain("eigenvalue spectrum is all zero".into()));
    }
    let mut cumulative = 0.0;
    for (i, lambda) in eigenvalues.iter().enumerate() {
        if *lambda > 0.0 {
            cumulative += lambda;
        }
        if cumulative / total >= delta - 1e-12 {
            return Ok(i + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// `1 - SSE / SST` with SST taken around the per-age means over years.
pub fn r_squared(observed: &DMatrix<f64>, fitted: &DMatrix<f64>) -> Result<f64> {
    if observed.shape() != fitted.shape() {
        return Err(Error::Argument(format!(
            "shape mismatch {:?} vs {:?}",
            observed.shape(),
            fitted.shape()
        )));
    }
    let col_means: DVector<f64> = observed.row_mean().transpose();
    let mut sse = 0.0;
    let mut sst = 0.0;
    for t in 0..observed.nrows() {
        for x in 0..observed.ncols() {
            let d = observed[(t, x)];
            sse += (d - fitted[(t, x)]).powi(2);
            sst += (d - col_means[x]).powi(2);
        }
    }
    if sst == 0.0 {
        return Err(Error::Domain(
            "R-squared undefined for a constant grid".into(),
        ));
    }
    Ok(1.0 - sse / sst)
}
