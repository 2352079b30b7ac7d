#![no_main]
use libfuzzer_sys::fuzz_target;

use std::path::Path;
use wfrecon::execution::SimWorld;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // relative paths resolve into a directory that does not exist
    if let Ok(world) = SimWorld::from_toml_str(text, Path::new("/nonexistent/wfrecon-fuzz")) {
        let target = world.hidden_target();
        for pair in world.tasks() {
            let out = world.execute_workflow(&target, &pair.task).unwrap();
            assert!(out.failed_at.is_none());
        }
    }
});
