//! Cohort survival from forecast life tables and temporary immediate
//! annuity prices with bootstrap intervals.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forecast::{check_gamma, coverage_label, BootstrapForecast};
use crate::resample::central_interval;

pub const DEFAULT_ETA: f64 = 0.03;
pub const QUOTE_AGES: [usize; 10] = [60, 65, 70, 75, 80, 85, 90, 95, 100, 105];
pub const QUOTE_MATURITIES: [usize; 6] = [5, 10, 15, 20, 25, 30];
/// Oldest attained age allowed by a quote: `age + T <= MAX_AGE`.
pub const MAX_AGE: usize = 110;

/// Zero-coupon bond price `exp(-eta tau)`.
pub fn bond_price(eta: f64, tau: f64) -> f64 {
    (-eta * tau).exp()
}

/// Which forecast year supplies the first survival factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// The first forecast year.
    #[default]
    FirstYear,
    /// The second forecast year, for an entry dated one year after the jump-off.
    SecondYear,
}

impl Alignment {
    fn offset(self) -> usize {
        match self {
            Alignment::FirstYear => 0,
            Alignment::SecondYear => 1,
        }
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alignment::FirstYear => "first",
            Alignment::SecondYear => "second",
        })
    }
}

impl FromStr for Alignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "first" => Ok(Alignment::FirstYear),
            "second" => Ok(Alignment::SecondYear),
            other => Err(Error::Argument(format!(
                "unknown alignment `{other}` (expected first or second)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub entry_age: usize,
    /// `probabilities[tau - 1]` is the chance of surviving `tau` more years.
    pub probabilities: Vec<f64>,
}

/// Survival along the cohort diagonal: the `j`-th factor is
/// `1 - d/l` at age `x + j - 1` in forecast year `j` (shifted by the
/// alignment), with `l` rebuilt from that year's deaths.
pub fn cohort_survival(
    forecast: &DMatrix<f64>,
    entry_age: usize,
    maturity: usize,
    alignment: Alignment,
) -> Result<SurvivalCurve> {
    let (years, k) = forecast.shape();
    let offset = alignment.offset();
    if entry_age + maturity > k.saturating_sub(1) {
        return Err(Error::Argument(format!(
            "age {entry_age} plus term {maturity} exceeds the oldest age {}",
            k.saturating_sub(1)
        )));
    }
    if maturity + offset > years {
        return Err(Error::Argument(format!(
            "term {maturity} needs {} forecast years, have {years}",
            maturity + offset
        )));
    }
    let mut probabilities = Vec::with_capacity(maturity);
    let mut survive = 1.0;
    for j in 1..=maturity {
        let row = forecast.row(j - 1 + offset);
        let age = entry_age + j - 1;
        let alive: f64 = row.iter().skip(age).sum();
        if alive <= 0.0 {
            return Err(Error::Domain(format!(
                "no survivors at age {age} in forecast year {}",
                j + offset
            )));
        }
        survive *= 1.0 - row[age] / alive;
        probabilities.push(survive);
    }
    Ok(SurvivalCurve {
        entry_age,
        probabilities,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnuityQuote {
    pub entry_age: usize,
    pub maturity: usize,
    pub eta: f64,
    pub price: f64,
    /// `(gamma, lower, upper)` per requested level.
    pub intervals: Vec<(f64, f64, f64)>,
}

/// `sum_{tau=1}^{T} exp(-eta tau) p_tau`.
pub fn annuity_price(curve: &SurvivalCurve, eta: f64) -> f64 {
    curve
        .probabilities
        .iter()
        .enumerate()
        .map(|(i, p)| bond_price(eta, (i + 1) as f64) * p)
        .sum()
}

/// Price of one annuity on each bootstrap replicate.
pub fn replicate_prices(
    boot: &BootstrapForecast,
    entry_age: usize,
    maturity: usize,
    eta: f64,
    alignment: Alignment,
) -> Result<Vec<f64>> {
    (0..boot.replicates())
        .into_par_iter()
        .map(|r| {
            let curve = cohort_survival(&boot.path(r), entry_age, maturity, alignment)?;
            Ok(annuity_price(&curve, eta))
        })
        .collect()
}

/// Empirical `gamma/2` and `1 - gamma/2` quantiles of replicate prices.
pub fn annuity_interval(
    boot: &BootstrapForecast,
    entry_age: usize,
    maturity: usize,
    eta: f64,
    gamma: f64,
    alignment: Alignment,
) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    let prices = replicate_prices(boot, entry_age, maturity, eta, alignment)?;
    if prices.is_empty() {
        return Err(Error::Argument("bootstrap has no replicates".into()));
    }
    Ok(central_interval(&prices, gamma))
}

/// Loss from selling `n` policies of annual benefit `benefit` at a price
/// that is `pct` percent too low.
pub fn shortfall(n: f64, benefit: f64, price: f64, pct: f64) -> f64 {
    n * benefit * price * pct / 100.0
}

/// Quotes over [`QUOTE_AGES`] x [`QUOTE_MATURITIES`]; `None` where
/// `age + T > 110`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuoteGrid {
    pub eta: f64,
    pub gammas: Vec<f64>,
    pub cells: Vec<Vec<Option<AnnuityQuote>>>,
}

pub fn quote_grid(
    point: &DMatrix<f64>,
    boot: Option<&BootstrapForecast>,
    eta: f64,
    gammas: &[f64],
    alignment: Alignment,
) -> Result<QuoteGrid> {
    let boot_paths: Vec<DMatrix<f64>> = match boot {
        Some(b) => (0..b.replicates()).map(|r| b.path(r)).collect(),
        None => Vec::new(),
    };
    let cells = QUOTE_AGES
        .iter()
        .map(|&age| {
            QUOTE_MATURITIES
                .iter()
                .map(|&t| {
                    if age + t > MAX_AGE {
                        return Ok(None);
                    }
                    let price = annuity_price(&cohort_survival(point, age, t, alignment)?, eta);
                    let mut intervals = Vec::new();
                    if !boot_paths.is_empty() {
                        let prices = boot_paths
                            .par_iter()
                            .map(|p| {
                                Ok(annuity_price(&cohort_survival(p, age, t, alignment)?, eta))
                            })
                            .collect::<Result<Vec<f64>>>()?;
                        for g in gammas {
                            check_gamma(*g)?;
                            let (lo, hi) = central_interval(&prices, *g);
                            intervals.push((*g, lo, hi));
                        }
                    }
                    Ok(Some(AnnuityQuote {
                        entry_age: age,
                        maturity: t,
                        eta,
                        price,
                        intervals,
                    }))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuoteGrid {
        eta,
        gammas: if boot.is_some() {
            gammas.to_vec()
        } else {
            Vec::new()
        },
        cells,
    })
}

impl QuoteGrid {
    pub fn get(&self, age: usize, maturity: usize) -> Option<&AnnuityQuote> {
        let i = QUOTE_AGES.iter().position(|a| *a == age)?;
        let j = QUOTE_MATURITIES.iter().position(|t| *t == maturity)?;
        self.cells[i][j].as_ref()
    }

    pub fn na_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Wide layout: `kind,age,T5,...,T30` with `kind` one of `point`,
    /// `lower95`, `upper95`, ...; `NA` where no quote exists.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,age");
        for t in QUOTE_MATURITIES {
            out.push_str(&format!(",T{t}"));
        }
        out.push('\n');
        let mut kinds: Vec<(String, Box<dyn Fn(&AnnuityQuote) -> f64>)> =
            vec![("point".into(), Box::new(|q: &AnnuityQuote| q.price))];
        for (gi, g) in self.gammas.iter().enumerate() {
            let label = coverage_label(*g);
            kinds.push((
                format!("lower{label}"),
                Box::new(move |q| q.intervals[gi].1),
            ));
            kinds.push((
                format!("upper{label}"),
                Box::new(move |q| q.intervals[gi].2),
            ));
        }
        for (kind, value) in &kinds {
            for (i, age) in QUOTE_AGES.iter().enumerate() {
                out.push_str(&format!("{kind},{age}"));
                for cell in &self.cells[i] {
                    match cell {
                        Some(q) => out.push_str(&format!(",{:.4}", value(q))),
                        None => out.push_str(",NA"),
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}
