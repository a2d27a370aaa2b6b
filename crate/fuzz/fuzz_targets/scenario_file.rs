#![no_main]

use crs_core::Scenario;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = Scenario::from_config_str(text) {
        let again =
            Scenario::from_config_str(&s.to_config_string()).expect("written scenario parses");
        assert_eq!(s, again);
    }
});
