//! Period life tables: HMD text ingestion, death-count reconstruction and the
//! canonical `year,age,dx` grid format.
//!
//! HMD 1x1 period tables carry rounded integer `dx` columns, which produce
//! zero counts at the oldest ages. Deaths are therefore rebuilt from `qx` and
//! a fixed radix, which keeps full floating precision and closes every table
//! at the open age group.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default life-table radix.
pub const RADIX: f64 = 100_000.0;

/// Number of single-year ages in an HMD table (0..=109 plus 110+).
pub const HMD_AGES: usize = 111;

/// Deaths below this many persons are floored before log-ratio analysis.
pub const DEATH_FLOOR: f64 = 1e-6;

/// Relative tolerance for the row-sum invariant.
pub const ROW_SUM_RTOL: f64 = 1e-6;

/// One (year, age) row of a period life table.
#[derive(Debug, Clone, PartialEq)]
pub struct LifeTableRecord {
    pub year: i32,
    pub age: usize,
    pub qx: Option<f64>,
    pub lx: Option<f64>,
    pub dx_reported: Option<f64>,
}

/// Year x age matrix of life-table death counts with a constant row total.
#[derive(Debug, Clone, PartialEq)]
pub struct DeathGrid {
    first_year: i32,
    values: DMatrix<f64>,
    radix: f64,
}

impl DeathGrid {
    /// Validates positivity and the per-row radix constraint.
    pub fn new(first_year: i32, values: DMatrix<f64>, radix: f64) -> Result<Self> {
        if !(radix > 0.0 && radix.is_finite()) {
            return Err(Error::Domain(format!(
                "radix must be positive, got {radix}"
            )));
        }
        if values.nrows() == 0 || values.ncols() < 2 {
            return Err(Error::Structure(format!(
                "grid must have at least one year and two ages, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for (t, row) in values.row_iter().enumerate() {
            let year = first_year + t as i32;
            if let Some(x) = row.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Domain(format!(
                    "year {year} age {x}: death count {} is not strictly positive",
                    row[x]
                )));
            }
            let sum: f64 = row.iter().sum();
            if ((sum - radix) / radix).abs() >= ROW_SUM_RTOL {
                return Err(Error::Domain(format!(
                    "year {year}: deaths sum to {sum}, expected {radix}"
                )));
            }
        }
        Ok(Self {
            first_year,
            values,
            radix,
        })
    }

    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.n_years() as i32 - 1
    }

    pub fn years(&self) -> Vec<i32> {
        (0..self.n_years() as i32)
            .map(|t| self.first_year + t)
            .collect()
    }

    pub fn n_years(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.values.ncols()
    }

    pub fn radix(&self) -> f64 {
        self.radix
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.values.row(t).iter().copied().collect()
    }

    /// Grid restricted to the years `first..=last`.
    pub fn slice_years(&self, first: i32, last: i32) -> Result<DeathGrid> {
        if first < self.first_year || last > self.last_year() || first > last {
            return Err(Error::Argument(format!(
                "year range {first}..={last} outside {}..={}",
                self.first_year,
                self.last_year()
            )));
        }
        let start = (first - self.first_year) as usize;
        let len = (last - first + 1) as usize;
        Ok(DeathGrid {
            first_year: first,
            values: self.values.rows(start, len).into_owned(),
            radix: self.radix,
        })
    }

    /// Index of the row for `year`, if covered.
    pub fn year_index(&self, year: i32) -> Option<usize> {
        let idx = year - self.first_year;
        (idx >= 0 && (idx as usize) < self.n_years()).then_some(idx as usize)
    }

    /// Age with the most deaths in year row `t`, ignoring age 0.
    pub fn modal_age(&self, t: usize) -> usize {
        modal_age(&self.row(t))
    }
}

/// Age (index >= 1) of the largest death count.
pub fn modal_age(deaths: &[f64]) -> usize {
    let mut best = 1.min(deaths.len() - 1);
    for (x, d) in deaths.iter().enumerate().skip(1) {
        if *d > deaths[best] {
            best = x;
        }
    }
    best
}

/// Cell floored to [`DEATH_FLOOR`] during reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlooredCell {
    pub year: i32,
    pub age: usize,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub grid: DeathGrid,
    pub floored: Vec<FlooredCell>,
}

/// Parses an HMD 1x1 period life table.
///
/// Leading title/blank lines are skipped up to the `Year Age mx qx ...`
/// column header; every following non-blank line must carry the ten
/// whitespace-separated columns. `.` marks a missing value.
pub fn parse_hmd_table(text: &str) -> Result<Vec<LifeTableRecord>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut header_seen = false;
    for (_, line) in lines.by_ref() {
        let mut tokens = line.split_whitespace();
        if tokens.next() == Some("Year") && tokens.next() == Some("Age") {
            header_seen = true;
            break;
        }
    }
    if !header_seen {
        return Err(Error::parse(1, "missing `Year Age ...` column header"));
    }

    let mut records = Vec::new();
    let mut current_year: Option<i32> = None;
    for (lineno, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 10 {
            return Err(Error::parse(
                lineno,
                format!("expected 10 columns, found {}", tokens.len()),
            ));
        }
        let year = parse_year(tokens[0])
            .ok_or_else(|| Error::parse(lineno, format!("bad year `{}`", tokens[0])))?;
        let age = parse_age(tokens[1])
            .ok_or_else(|| Error::parse(lineno, format!("bad age `{}`", tokens[1])))?;
        let qx = parse_optional(tokens[3], lineno, "qx")?;
        let lx = parse_optional(tokens[5], lineno, "lx")?;
        let dx_reported = parse_optional(tokens[6], lineno, "dx")?;

        match current_year {
            Some(prev) if year == prev => {}
            Some(prev) if prev.checked_add(1) == Some(year) => current_year = Some(year),
            Some(prev) => {
                return Err(Error::Structure(format!(
                    "line {lineno}: year {year} follows {prev}; years must be contiguous"
                )))
            }
            None => current_year = Some(year),
        }
        records.push(LifeTableRecord {
            year,
            age,
            qx,
            lx,
            dx_reported,
        });
    }
    if records.is_empty() {
        return Err(Error::Structure("life table has no data rows".into()));
    }
    Ok(records)
}

fn parse_year(token: &str) -> Option<i32> {
    token.parse().ok().filter(|y| (0..=9999).contains(y))
}

fn parse_age(token: &str) -> Option<usize> {
    let digits = token.strip_suffix('+').unwrap_or(token);
    let age: usize = digits.parse().ok()?;
    (age < HMD_AGES).then_some(age)
}

fn parse_optional(token: &str, line: usize, column: &str) -> Result<Option<f64>> {
    if token == "." {
        return Ok(None);
    }
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::parse(line, format!("bad {column} `{token}`"))),
    }
}

/// Rebuilds death counts from death probabilities.
///
/// Per year: `l_0 = radix`, `d_x = l_x q_x`, `l_{x+1} = l_x - d_x`, with the
/// final age closed at `q = 1`. Missing interior `qx` are linearly
/// interpolated in age; counts below [`DEATH_FLOOR`] are floored and the row
/// renormalized to the radix.
pub fn rebuild_death_grid(records: &[LifeTableRecord], radix: f64) -> Result<Reconstruction> {
    if !(radix > 0.0 && radix.is_finite()) {
        return Err(Error::Domain(format!(
            "radix must be positive, got {radix}"
        )));
    }
    let years = group_by_year(records)?;
    let n_ages = years[0].1.len();
    if n_ages < 2 {
        return Err(Error::Structure(
            "life table needs at least two ages".into(),
        ));
    }

    let mut values = DMatrix::zeros(years.len(), n_ages);
    let mut floored = Vec::new();
    for (t, (year, rows)) in years.iter().enumerate() {
        if rows.len() != n_ages {
            return Err(Error::Structure(format!(
                "year {year} has {} ages, expected {n_ages}",
                rows.len()
            )));
        }
        let q = fill_probabilities(*year, rows)?;
        let mut deaths = deaths_from_q(&q, radix);
        for age in floor_and_normalize(&mut deaths, radix) {
            floored.push(FlooredCell { year: *year, age });
        }
        for (x, d) in deaths.iter().enumerate() {
            values[(t, x)] = *d;
        }
    }
    if !floored.is_empty() {
        log::warn!("{} death counts floored at {DEATH_FLOOR}", floored.len());
    }
    let grid = DeathGrid::new(years[0].0, values, radix)?;
    Ok(Reconstruction { grid, floored })
}

/// Life-table recursion from `q` (last entry treated as 1).
pub fn deaths_from_q(q: &[f64], radix: f64) -> Vec<f64> {
    let mut deaths = Vec::with_capacity(q.len());
    let mut alive = radix;
    for &qx in &q[..q.len() - 1] {
        let d = alive * qx;
        deaths.push(d);
        alive -= d;
    }
    deaths.push(alive);
    deaths
}

/// Floors counts below [`DEATH_FLOOR`] and rescales the row to `radix`.
/// Returns the floored ages.
pub fn floor_and_normalize(deaths: &mut [f64], radix: f64) -> Vec<usize> {
    let mut floored = Vec::new();
    for (age, d) in deaths.iter_mut().enumerate() {
        if !(*d >= DEATH_FLOOR) {
            floored.push(age);
            *d = DEATH_FLOOR;
        }
    }
    let sum: f64 = deaths.iter().sum();
    for d in deaths.iter_mut() {
        *d *= radix / sum;
    }
    floored
}

fn group_by_year(records: &[LifeTableRecord]) -> Result<Vec<(i32, Vec<&LifeTableRecord>)>> {
    let mut years: Vec<(i32, Vec<&LifeTableRecord>)> = Vec::new();
    for rec in records {
        match years.last_mut() {
            Some((y, rows)) if *y == rec.year => rows.push(rec),
            Some((y, _)) if y.checked_add(1) != Some(rec.year) => {
                return Err(Error::Structure(format!(
                    "year {} follows {}; years must be contiguous",
                    rec.year, y
                )))
            }
            _ => years.push((rec.year, vec![rec])),
        }
    }
    if years.is_empty() {
        return Err(Error::Structure("no life-table records".into()));
    }
    for (year, rows) in &years {
        for (expected, rec) in rows.iter().enumerate() {
            if rec.age != expected {
                return Err(Error::Structure(format!(
                    "year {year}: age {} where {expected} expected",
                    rec.age
                )));
            }
        }
    }
    Ok(years)
}

fn fill_probabilities(year: i32, rows: &[&LifeTableRecord]) -> Result<Vec<f64>> {
    let last = rows.len() - 1;
    let mut known: Vec<(usize, f64)> = Vec::with_capacity(rows.len());
    for rec in &rows[..last] {
        if let Some(q) = rec.qx {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::Domain(format!(
                    "year {year} age {}: qx = {q} outside [0, 1]",
                    rec.age
                )));
            }
            known.push((rec.age, q));
        }
    }
    if let Some(q) = rows[last].qx {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!(
                "year {year} age {last}: qx = {q} outside [0, 1]"
            )));
        }
    }
    known.push((last, 1.0));

    let mut q = vec![0.0; rows.len()];
    let mut k = 0;
    for (x, slot) in q.iter_mut().enumerate() {
        while known[k].0 < x {
            k += 1;
        }
        *slot = if known[k].0 == x || k == 0 {
            // exact hit, or leading gap held at the first reported value
            known[k].1
        } else {
            let (x0, q0) = known[k - 1];
            let (x1, q1) = known[k];
            q0 + (q1 - q0) * (x - x0) as f64 / (x1 - x0) as f64
        };
    }
    Ok(q)
}

/// Canonical CSV: `year,age,dx` with deaths printed to 6 decimals.
pub fn write_grid_csv(grid: &DeathGrid) -> String {
    let mut out = String::with_capacity(grid.n_years() * grid.n_ages() * 20);
    out.push_str("year,age,dx\n");
    for (t, year) in grid.years().into_iter().enumerate() {
        for x in 0..grid.n_ages() {
            out.push_str(&format!("{year},{x},{:.6}\n", grid.values[(t, x)]));
        }
    }
    out
}

/// Parses the canonical CSV written by [`write_grid_csv`]. Lines starting with
/// `#` are comments.
pub fn parse_grid_csv(text: &str, radix: f64) -> Result<DeathGrid> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, "year,age,dx")) => {}
        Some((n, other)) => {
            return Err(Error::parse(
                n,
                format!("expected header `year,age,dx`, got `{other}`"),
            ))
        }
        None => return Err(Error::parse(1, "empty grid file")),
    }

    let mut first_year = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in lines {
        let mut fields = line.split(',');
        let (Some(y), Some(a), Some(d), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::parse(n, "expected 3 comma-separated fields"));
        };
        let year = parse_year(y).ok_or_else(|| Error::parse(n, format!("bad year `{y}`")))?;
        let age: usize = a
            .parse()
            .map_err(|_| Error::parse(n, format!("bad age `{a}`")))?;
        let dx: f64 = d
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(n, format!("bad dx `{d}`")))?;

        let first = *first_year.get_or_insert(year);
        let t = year
            .checked_sub(first)
            .filter(|t| *t >= 0)
            .ok_or_else(|| Error::parse(n, format!("year {year} precedes {first}")))?
            as usize;
        if t == rows.len() {
            rows.push(Vec::new());
        }
        if t + 1 != rows.len() {
            return Err(Error::Structure(format!(
                "line {n}: year {year} out of order or non-contiguous"
            )));
        }
        let row = rows.last_mut().expect("row pushed above");
        if age != row.len() {
            return Err(Error::Structure(format!(
                "line {n}: age {age} where {} expected",
                row.len()
            )));
        }
        row.push(dx);
    }
    let Some(first_year) = first_year else {
        return Err(Error::Structure("grid file has no data rows".into()));
    };
    let n_ages = rows[0].len();
    if let Some((t, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_ages) {
        return Err(Error::Structure(format!(
            "year {} has {} ages, expected {n_ages}",
            first_year + t as i32,
            r.len()
        )));
    }
    let values = DMatrix::from_fn(rows.len(), n_ages, |t, x| rows[t][x]);
    DeathGrid::new(first_year, values, radix)
}

/// Renders records in HMD 1x1 layout. Columns not carried by
/// [`LifeTableRecord`] are derived with a mid-year `ax = 0.5` convention.
pub fn format_hmd_table(title: &str, records: &[LifeTableRecord]) -> String {
    let mut out = format!("{title}\n\n");
    out.push_str(
        "   Year          Age         mx       qx    ax      lx      dx      Lx       Tx     ex\n",
    );
    let years = match group_by_year(records) {
        Ok(y) => y,
        Err(_) => return out,
    };
    for (_, rows) in years {
        let lx: Vec<f64> = rows.iter().map(|r| r.lx.unwrap_or(0.0)).collect();
        let dx: Vec<f64> = rows.iter().map(|r| r.dx_reported.unwrap_or(0.0)).collect();
        let big_l: Vec<f64> = lx.iter().zip(&dx).map(|(l, d)| l - 0.5 * d).collect();
        let mut tx = vec![0.0; rows.len()];
        let mut acc = 0.0;
        for x in (0..rows.len()).rev() {
            acc += big_l[x];
            tx[x] = acc;
        }
        let last = rows.len() - 1;
        for (x, rec) in rows.iter().enumerate() {
            let age = if x == last && last + 1 == HMD_AGES {
                format!("{x}+")
            } else {
                x.to_string()
            };
            let fmt_opt = |v: Option<f64>, prec: usize| match v {
                Some(v) => format!("{v:.prec$}"),
                None => ".".to_string(),
            };
            let mx = if big_l[x] > 0.0 {
                dx[x] / big_l[x]
            } else {
                0.0
            };
            let ex = if lx[x] > 0.0 { tx[x] / lx[x] } else { 0.0 };
            out.push_str(&format!(
                "{:>7}{:>13}{:>11.5}{:>9}{:>6.2}{:>8}{:>8}{:>8.0}{:>9.0}{:>7.2}\n",
                rec.year,
                age,
                mx,
                fmt_opt(rec.qx, 5),
                0.5,
                fmt_opt(rec.lx.map(f64::round), 0),
                fmt_opt(rec.dx_reported.map(f64::round), 0),
                big_l[x],
                tx[x],
                ex,
            ));
        }
    }
    out
}
