use std::path::Path;
use std::process::{Command, Output};

use codamort::lifetable::format_hmd_table;
use codamort::synthetic::{synthetic_records, SyntheticProfile};

fn codamort(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codamort"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

/// Data lines of a CSV written by the CLI, header comment stripped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn forecast_rows_close_at_the_radix() {
    let dir = tempfile::tempdir().unwrap();
    let out = codamort(
        &["forecast", "--data", "synthetic:female", "--horizon", "50", "--bootstrap", "50"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&dir.path().join("forecast_coda-ets-cpv.csv"));
    assert_eq!(rows.len(), 50 * 111);
    for h in 1..=50 {
        let total: f64 = rows
            .iter()
            .filter(|r| r[0] == h.to_string())
            .map(|r| r[2].parse::<f64>().unwrap())
            .sum();
        assert!((total - 100_000.0).abs() < 1e-3, "h={h}: {total}");
    }
}

#[test]
fn female_modal_age_does_not_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let grid = codamort::config::DataSource::parse("synthetic:female").unwrap().load().unwrap();
    let last_mode = grid.modal_age(grid.n_years() - 1);
    let out = codamort(
        &["forecast", "--data", "synthetic:female", "--horizon", "1", "--bootstrap", "20"],
        dir.path(),
    );
    assert!(out.status.success());
    let point: Vec<f64> = rows(&dir.path().join("forecast_coda-ets-cpv.csv"))
        .iter()
        .map(|r| r[2].parse().unwrap())
        .collect();
    let mode = codamort::lifetable::modal_age(&point);
    assert!(mode + 1 >= last_mode, "forecast mode {mode}, last observed {last_mode}");
}

#[test]
fn backtest_table_has_one_block_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = codamort(
        &["backtest", "--data", "synthetic:male", "--bootstrap", "30", "--seed", "5"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("backtest.csv")).unwrap();
    assert!(text.starts_with("# config_hash="));
    let rows = rows(&dir.path().join("backtest.csv"));
    for method in ["coda-ets-L6", "lc", "hu", "rw"] {
        let block: Vec<_> = rows.iter().filter(|r| r[0] == method).collect();
        assert_eq!(block.len(), 21, "{method}");
        assert_eq!(block.last().unwrap()[3], "overall");
        for r in block {
            assert!(r[4].parse::<f64>().unwrap() > 0.0);
        }
    }
}

#[test]
fn price_grid_marks_unreachable_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = codamort(
        &["price", "--data", "synthetic:female", "--bootstrap", "50"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&dir.path().join("annuity.csv"));
    let point: Vec<_> = rows.iter().filter(|r| r[0] == "point").collect();
    assert_eq!(point.len(), 10);
    let na = point.iter().flat_map(|r| r.iter()).filter(|v| *v == "NA").count();
    assert_eq!(na, 15);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["forecast", "--data", "synthetic:male:4", "--bootstrap", "40", "--seed", "9", "--method", "coda,lc,hu"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(codamort(&args, &a).status.success());
    assert!(codamort(&args, &b).status.success());
    for name in ["forecast_coda-ets-cpv.csv", "forecast_lc.csv", "forecast_hu.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn ingest_round_trips_through_hmd_text() {
    let dir = tempfile::tempdir().unwrap();
    let records = synthetic_records(&SyntheticProfile::female(), 12, 1);
    let hmd = dir.path().join("table.txt");
    std::fs::write(&hmd, format_hmd_table("Synthetic, Life tables (period 1x1)", &records)).unwrap();
    let out = codamort(&["ingest", "--data", hmd.to_str().unwrap()], &dir.path().join("o"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("12 years × 111 ages"), "{stdout}");
    let grid = dir.path().join("o/grid.csv");
    let forecast = codamort(
        &["forecast", "--data", grid.to_str().unwrap(), "--bootstrap", "10", "--horizon", "2"],
        &dir.path().join("f"),
    );
    assert!(forecast.status.success(), "{}", String::from_utf8_lossy(&forecast.stderr));
}

#[test]
fn corrupt_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "Australia\n\n   Year Age qx\n   1921 0 abc\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = codamort(&["forecast", "--data", bad.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.txt") && stderr.contains("line 4"), "{stderr}");
    assert!(!out_dir.exists() || std::fs::read_dir(&out_dir).unwrap().next().is_none());
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| codamort(args, dir.path()).status.code();
    assert_eq!(code(&["forecast", "--data", "synthetic:female", "--method", "arima"]), Some(2));
    assert_eq!(code(&["forecast", "--data", "synthetic:female", "--gamma", "1.5"]), Some(2));
    assert_eq!(code(&["forecast", "--data", "/nonexistent/table.txt"]), Some(2));
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "bootstrapp = 10\n").unwrap();
    assert_eq!(code(&["forecast", "--config", config.to_str().unwrap()]), Some(2));
}
