#![no_main]
use libfuzzer_sys::fuzz_target;

use wfrecon::space::PrimitiveSpace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(space) = PrimitiveSpace::from_toml_str(text) {
        assert!(space.branching() >= 1);
        for i in 0..space.branching() {
            assert_eq!(space.index_of(space.id(i)), Some(i));
        }
    }
});
