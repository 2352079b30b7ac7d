#![no_main]
use libfuzzer_sys::fuzz_target;

use wfrecon::bench::BenchSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = BenchSpec::from_toml_str(text) {
        assert!(!spec.seeds.is_empty() && !spec.variants.is_empty());
    }
});
