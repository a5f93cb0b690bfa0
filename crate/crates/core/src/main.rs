use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use codamort::annuity::quote_grid;
use codamort::config::{CommandDefaults, RunConfig, Settings};
use codamort::evaluation::{expanding_window_backtest, BacktestConfig};
use codamort::forecast::forecast_csv;
use codamort::lifetable::write_grid_csv;
use codamort::Error;

#[derive(Parser)]
#[command(
    name = "codamort",
    version,
    about = "Forecast life-table death counts and price annuities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rebuild death counts from an HMD life table and write the canonical CSV.
    Ingest(Common),
    /// Point and interval forecasts for each method.
    Forecast(Common),
    /// Expanding-window backtest with MAPE and mean interval scores.
    Backtest(Common),
    /// Annuity quotes over ages 60..105 and terms 5..30.
    Price(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// HMD life-table file, canonical grid CSV or `synthetic:female|male[:seed]`.
    #[arg(long)]
    data: Option<String>,
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Method names, comma separated (coda, coda-ets-L6, lc, hu, rw, rwd, ...).
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    /// `cpv[:delta]` or a fixed component count.
    #[arg(long)]
    ncomp: Option<String>,
    /// Score forecaster for plain `coda`: ets, rw or rwd.
    #[arg(long)]
    forecaster: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long = "bootstrap", value_name = "B")]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Significance levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// Constant interest rate for bond prices.
    #[arg(long)]
    eta: Option<f64>,
    /// Last year of the first backtest training window.
    #[arg(long)]
    train_end: Option<i32>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Result<Settings, Error> {
        let file = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        Ok(file.overlay(Settings {
            data: self.data.clone(),
            methods: self.method.clone(),
            ncomp: self.ncomp.clone(),
            forecaster: self.forecaster.clone(),
            bootstrap: self.bootstrap,
            seed: self.seed,
            gamma: self.gamma.clone(),
            eta: self.eta,
            horizon: self.horizon,
            train_end: self.train_end,
            out: self.out.as_ref().map(|p| p.display().to_string()),
            ..Settings::default()
        }))
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Argument(_) => 2,
        Error::Parse { .. } | Error::Structure(_) | Error::Domain(_) | Error::Io(_) => 3,
        Error::Numeric(_) => 4,
    }
}

/// Writes through a temporary sibling so readers never see partial files.
fn write_atomic(path: &Path, header: &str, body: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(header.as_bytes())?;
        f.write_all(body.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn header(cfg: &RunConfig, command: &str) -> String {
    format!("# config_hash={} seed={}\n", cfg.hash(command), cfg.seed)
}

fn resolve(common: &Common, methods: &[&str], horizon: usize) -> Result<RunConfig, Error> {
    let defaults = CommandDefaults {
        methods: methods.iter().map(|m| m.to_string()).collect(),
        horizon,
    };
    RunConfig::resolve(&common.settings()?, &defaults)
}

/// Reports which input failed before the error itself.
fn load_data(cfg: &RunConfig) -> Result<codamort::DeathGrid, Error> {
    cfg.data.load().inspect_err(|_| eprint!("{}: ", cfg.data))
}

fn file_name(method: &str) -> String {
    method.replace([':', '/'], "_")
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Ingest(c) => {
            let cfg = resolve(&c, &["coda"], 1)?;
            let grid = load_data(&cfg)?;
            let worst = (0..grid.n_years())
                .map(|t| (grid.values().row(t).sum() - grid.radix()).abs() / grid.radix())
                .fold(0.0, f64::max);
            let path = cfg.out.join("grid.csv");
            write_atomic(&path, &header(&cfg, "ingest"), &write_grid_csv(&grid))?;
            println!(
                "{} years × {} ages ({}-{}); max relative row-sum error {:.1e}; wrote {}",
                grid.n_years(),
                grid.n_ages(),
                grid.first_year(),
                grid.last_year(),
                worst,
                path.display()
            );
        }
        Command::Forecast(c) => {
            let cfg = resolve(&c, &["coda"], 20)?;
            let grid = load_data(&cfg)?;
            let opts = cfg.bootstrap_options();
            let head = header(&cfg, "forecast");
            for method in &cfg.methods {
                info!("forecasting with {method}");
                let (fc, _) = method.forecast(&grid, cfg.horizon, &cfg.gammas, &opts)?;
                let path = cfg
                    .out
                    .join(format!("forecast_{}.csv", file_name(&method.to_string())));
                write_atomic(&path, &head, &forecast_csv(&fc))?;
                println!(
                    "{method}: {} x {} forecast -> {}",
                    fc.horizon(),
                    fc.point.ncols(),
                    path.display()
                );
            }
        }
        Command::Backtest(c) => {
            let cfg = resolve(&c, &["coda-ets-L6", "lc", "hu", "rw"], 20)?;
            let grid = load_data(&cfg)?;
            let bt_cfg = BacktestConfig {
                train_end: cfg.train_end,
                horizon: cfg.horizon,
                gammas: cfg.gammas.clone(),
                bootstrap: cfg.bootstrap_options(),
            };
            let table = expanding_window_backtest(&grid, &cfg.methods, &bt_cfg)?.error_table()?;
            let path = cfg.out.join("backtest.csv");
            write_atomic(&path, &header(&cfg, "backtest"), &table.to_csv())?;
            for m in &cfg.methods {
                if let Some(row) = table.overall(m) {
                    println!("{m}: overall MAPE {:.2}", row.mape);
                }
            }
            println!("wrote {}", path.display());
        }
        Command::Price(c) => {
            let cfg = resolve(&c, &["coda"], 50)?;
            let grid = load_data(&cfg)?;
            let opts = cfg.bootstrap_options();
            let head = header(&cfg, "price");
            for method in &cfg.methods {
                let (fc, boot) = method.forecast(&grid, cfg.horizon, &cfg.gammas, &opts)?;
                let quotes = quote_grid(
                    &fc.point,
                    boot.as_ref(),
                    cfg.eta,
                    &cfg.gammas,
                    cfg.alignment,
                )?;
                let name = if cfg.methods.len() == 1 {
                    "annuity.csv".to_string()
                } else {
                    format!("annuity_{}.csv", file_name(&method.to_string()))
                };
                let path = cfg.out.join(name);
                write_atomic(&path, &head, &quotes.to_csv())?;
                println!("{method}: quotes -> {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
