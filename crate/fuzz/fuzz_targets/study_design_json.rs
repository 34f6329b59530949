#![no_main]

use libfuzzer_sys::fuzz_target;
use pdmcount::study::StudyDesign;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(design) = StudyDesign::from_json(text) {
        let _ = design.labels();
        let _ = design.sim.profile();
    }
});
