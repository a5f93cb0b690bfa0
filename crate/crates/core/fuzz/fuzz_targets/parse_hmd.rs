#![no_main]

use codamort::lifetable::{parse_hmd_table, rebuild_death_grid, RADIX};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = parse_hmd_table(text) {
        if let Ok(rebuilt) = rebuild_death_grid(&records, RADIX) {
            let grid = rebuilt.grid;
            for t in 0..grid.n_years() {
                let sum: f64 = grid.values().row(t).sum();
                assert!((sum - RADIX).abs() <= 1e-6 * RADIX, "row {t} sums to {sum}");
            }
        }
    }
});
