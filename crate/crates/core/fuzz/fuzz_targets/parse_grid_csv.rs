#![no_main]

use codamort::config::load_grid_text;
use codamort::lifetable::{parse_grid_csv, write_grid_csv, RADIX};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = load_grid_text(text);
    if let Ok(grid) = parse_grid_csv(text, RADIX) {
        let again = parse_grid_csv(&write_grid_csv(&grid), RADIX).expect("own output parses");
        assert_eq!(again.first_year(), grid.first_year());
        assert_eq!(again.values().shape(), grid.values().shape());
    }
});
