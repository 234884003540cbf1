#![no_main]

use ergolevy_harness::config::Document;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(doc) = Document::parse(s) {
            let _ = doc.flattened();
        }
    }
});
