#![no_main]

use ergolevy_harness::config::parse_measure;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(spec) = parse_measure(s) {
            let _ = spec.build();
        }
    }
});
