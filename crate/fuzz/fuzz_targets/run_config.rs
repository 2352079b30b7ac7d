#![no_main]
use libfuzzer_sys::fuzz_target;

use wfrecon::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        assert!(cfg.search.validate().is_ok());
        assert!(cfg.metric.validate().is_ok());
    }
});
