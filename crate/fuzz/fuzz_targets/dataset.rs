#![no_main]
use libfuzzer_sys::fuzz_target;

use wfrecon::space::parse_dataset;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pairs) = parse_dataset(text) {
        for p in pairs {
            assert!(!p.task.is_empty() && !p.target.is_empty());
        }
    }
});
