//! Run configuration: a TOML file merged with command-line overrides, then
//! validated as a whole.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annuity::{Alignment, DEFAULT_ETA};
use crate::coda_forecast::{NcompMode, DEFAULT_REPLICATES};
use crate::error::{Error, Result};
use crate::evaluation::{DEFAULT_GAMMAS, DEFAULT_TRAIN_END};
use crate::lifetable::{parse_grid_csv, parse_hmd_table, rebuild_death_grid, DeathGrid, RADIX};
use crate::methods::Method;
use crate::synthetic::{synthetic_grid_with, SyntheticProfile};
use crate::univariate::ForecasterKind;

/// Years in the bundled synthetic fixtures (1921 onwards).
pub const SYNTHETIC_YEARS: usize = 94;

/// Raw settings; every field optional so files and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub data: Option<String>,
    pub sex: Option<String>,
    pub methods: Option<Vec<String>>,
    pub ncomp: Option<String>,
    pub forecaster: Option<String>,
    pub bootstrap: Option<usize>,
    pub seed: Option<u64>,
    pub gamma: Option<Vec<f64>>,
    pub eta: Option<f64>,
    pub horizon: Option<usize>,
    pub train_end: Option<i32>,
    pub out: Option<String>,
    pub residual_rows: Option<bool>,
    pub joint_score_errors: Option<bool>,
    pub alignment: Option<String>,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            data: over.data.or(self.data),
            sex: over.sex.or(self.sex),
            methods: over.methods.or(self.methods),
            ncomp: over.ncomp.or(self.ncomp),
            forecaster: over.forecaster.or(self.forecaster),
            bootstrap: over.bootstrap.or(self.bootstrap),
            seed: over.seed.or(self.seed),
            gamma: over.gamma.or(self.gamma),
            eta: over.eta.or(self.eta),
            horizon: over.horizon.or(self.horizon),
            train_end: over.train_end.or(self.train_end),
            out: over.out.or(self.out),
            residual_rows: over.residual_rows.or(self.residual_rows),
            joint_score_errors: over.joint_score_errors.or(self.joint_score_errors),
            alignment: over.alignment.or(self.alignment),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// HMD life table or canonical `year,age,dx` CSV.
    File(PathBuf),
    Synthetic {
        male: bool,
        seed: u64,
    },
}

impl DataSource {
    /// `synthetic:female`, `synthetic:male:7` or a file path.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let Some(rest) = s.strip_prefix("synthetic:") else {
            return Ok(DataSource::File(PathBuf::from(s)));
        };
        let mut parts = rest.split(':');
        let male = match parts.next() {
            Some("female") => false,
            Some("male") => true,
            _ => {
                return Err(format!(
                    "bad synthetic source `{s}` (synthetic:female|male[:seed])"
                ))
            }
        };
        let seed = match parts.next() {
            None => 0,
            Some(v) => v
                .parse()
                .map_err(|_| format!("bad synthetic seed in `{s}`"))?,
        };
        if parts.next().is_some() {
            return Err(format!("bad synthetic source `{s}`"));
        }
        Ok(DataSource::Synthetic { male, seed })
    }

    pub fn load(&self) -> Result<DeathGrid> {
        match self {
            DataSource::Synthetic { male, seed } => {
                let profile = if *male {
                    SyntheticProfile::male()
                } else {
                    SyntheticProfile::female()
                };
                Ok(synthetic_grid_with(&profile, SYNTHETIC_YEARS, *seed))
            }
            DataSource::File(path) => {
                let text = std::fs::read_to_string(path)?;
                load_grid_text(&text)
            }
        }
    }
}

impl std::fmt::Display for DataSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataSource::File(p) => write!(f, "{}", p.display()),
            DataSource::Synthetic { male, seed } => write!(
                f,
                "synthetic:{}:{seed}",
                if *male { "male" } else { "female" }
            ),
        }
    }
}

/// Canonical CSV when the first content line is its header, HMD layout
/// otherwise.
pub fn load_grid_text(text: &str) -> Result<DeathGrid> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'));
    if first == Some("year,age,dx") {
        parse_grid_csv(text, RADIX)
    } else {
        let records = parse_hmd_table(text)?;
        Ok(rebuild_death_grid(&records, RADIX)?.grid)
    }
}

/// Validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub sex: String,
    pub methods: Vec<Method>,
    pub ncomp: NcompMode,
    pub forecaster: ForecasterKind,
    pub bootstrap: usize,
    pub seed: u64,
    pub gammas: Vec<f64>,
    pub eta: f64,
    pub horizon: usize,
    pub train_end: i32,
    pub out: PathBuf,
    pub residual_rows: bool,
    pub joint_score_errors: bool,
    pub alignment: Alignment,
}

/// Per-command defaults that differ between commands.
#[derive(Debug, Clone)]
pub struct CommandDefaults {
    pub methods: Vec<String>,
    pub horizon: usize,
}

impl RunConfig {
    /// Checks every field and reports all problems at once.
    pub fn resolve(settings: &Settings, defaults: &CommandDefaults) -> Result<RunConfig> {
        let mut errors = Vec::new();
        let mut check = |r: std::result::Result<(), String>| {
            if let Err(e) = r {
                errors.push(e);
            }
        };

        let data = match settings.data.as_deref() {
            None => {
                check(Err("no data source (set `data` or pass --data)".into()));
                None
            }
            Some(s) => match DataSource::parse(s) {
                Ok(DataSource::File(p)) if !p.exists() => {
                    check(Err(format!("data file {} does not exist", p.display())));
                    None
                }
                Ok(d) => Some(d),
                Err(e) => {
                    check(Err(e));
                    None
                }
            },
        };

        let ncomp = match settings.ncomp.as_deref() {
            None => NcompMode::default(),
            Some(s) => s.parse().unwrap_or_else(|e: Error| {
                check(Err(e.to_string()));
                NcompMode::default()
            }),
        };
        let forecaster = match settings.forecaster.as_deref() {
            None => ForecasterKind::Ets,
            Some(s) => s.parse().unwrap_or_else(|e: Error| {
                check(Err(e.to_string()));
                ForecasterKind::Ets
            }),
        };
        let names = settings
            .methods
            .clone()
            .unwrap_or_else(|| defaults.methods.clone());
        if names.is_empty() {
            check(Err("method list is empty".into()));
        }
        let mut methods = Vec::new();
        for name in &names {
            if name.trim().eq_ignore_ascii_case("coda") {
                methods.push(Method::Coda {
                    kind: forecaster,
                    ncomp,
                });
                continue;
            }
            match name.parse::<Method>() {
                Ok(m) => methods.push(m),
                Err(e) => check(Err(e.to_string())),
            }
        }

        let bootstrap = settings.bootstrap.unwrap_or(DEFAULT_REPLICATES);
        if bootstrap == 0 {
            check(Err("bootstrap replicate count must be at least 1".into()));
        }
        let gammas = settings
            .gamma
            .clone()
            .unwrap_or_else(|| DEFAULT_GAMMAS.to_vec());
        for g in &gammas {
            if !(*g > 0.0 && *g < 1.0) {
                check(Err(format!("gamma {g} outside (0, 1)")));
            }
        }
        let eta = settings.eta.unwrap_or(DEFAULT_ETA);
        if !(eta.is_finite() && eta >= 0.0) {
            check(Err(format!(
                "interest rate {eta} must be finite and non-negative"
            )));
        }
        let horizon = settings.horizon.unwrap_or(defaults.horizon);
        if horizon == 0 {
            check(Err("horizon must be at least 1".into()));
        }
        let alignment = match settings.alignment.as_deref() {
            None => Alignment::default(),
            Some(s) => s.parse().unwrap_or_else(|e: Error| {
                check(Err(e.to_string()));
                Alignment::default()
            }),
        };
        let sex = settings.sex.clone().unwrap_or_else(|| "female".into());
        if sex.is_empty() || sex.contains(['\n', ',']) {
            check(Err(format!("bad sex label `{sex}`")));
        }

        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        Ok(RunConfig {
            data: data.expect("checked above"),
            sex,
            methods,
            ncomp,
            forecaster,
            bootstrap,
            seed: settings.seed.unwrap_or(0),
            gammas,
            eta,
            horizon,
            train_end: settings.train_end.unwrap_or(DEFAULT_TRAIN_END),
            out: PathBuf::from(settings.out.clone().unwrap_or_else(|| "out".into())),
            residual_rows: settings.residual_rows.unwrap_or(false),
            joint_score_errors: settings.joint_score_errors.unwrap_or(false),
            alignment,
        })
    }

    /// Resolved settings as `key=value` lines; the output directory is left
    /// out so relocated runs hash alike.
    pub fn canonical(&self, command: &str) -> String {
        let mut s = String::new();
        let methods: Vec<String> = self.methods.iter().map(|m| m.to_string()).collect();
        let gammas: Vec<String> = self.gammas.iter().map(|g| g.to_string()).collect();
        let _ = writeln!(s, "command={command}");
        let _ = writeln!(s, "data={}", self.data);
        let _ = writeln!(s, "sex={}", self.sex);
        let _ = writeln!(s, "methods={}", methods.join(","));
        let _ = writeln!(s, "ncomp={}", self.ncomp);
        let _ = writeln!(s, "forecaster={}", self.forecaster);
        let _ = writeln!(s, "bootstrap={}", self.bootstrap);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "gamma={}", gammas.join(","));
        let _ = writeln!(s, "eta={}", self.eta);
        let _ = writeln!(s, "horizon={}", self.horizon);
        let _ = writeln!(s, "train_end={}", self.train_end);
        let _ = writeln!(s, "residual_rows={}", self.residual_rows);
        let _ = writeln!(s, "joint_score_errors={}", self.joint_score_errors);
        let _ = writeln!(s, "alignment={}", self.alignment);
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self, command: &str) -> String {
        let digest = Sha256::digest(self.canonical(command).as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn bootstrap_options(&self) -> crate::forecast::BootstrapOptions {
        crate::forecast::BootstrapOptions {
            replicates: self.bootstrap,
            seed: self.seed,
            residual_rows: self.residual_rows,
            joint_score_errors: self.joint_score_errors,
        }
    }
}
