#![no_main]

use std::path::Path;

use crs_core::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::parse(text, Path::new("/nonexistent")) {
        let _ = cfg.hash();
    }
});
