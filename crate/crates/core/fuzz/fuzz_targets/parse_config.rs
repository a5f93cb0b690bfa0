#![no_main]

use codamort::config::{DataSource, Settings};
use codamort::methods::Method;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = DataSource::parse(text);
    let _ = text.parse::<Method>();
    if let Ok(settings) = Settings::from_toml(text) {
        for m in settings.methods.iter().flatten() {
            let _ = m.parse::<Method>();
        }
    }
});
