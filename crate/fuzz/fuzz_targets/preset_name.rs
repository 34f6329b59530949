#![no_main]

use libfuzzer_sys::fuzz_target;
use pdmcount::study::{preset, preset_names};

fuzz_target!(|data: &[u8]| {
    let Ok(name) = std::str::from_utf8(data) else { return };
    let known = preset_names().iter().any(|n| n == name);
    assert_eq!(preset(name).is_ok(), known, "{name}");
});
