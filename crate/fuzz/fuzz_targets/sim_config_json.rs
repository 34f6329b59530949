#![no_main]

use libfuzzer_sys::fuzz_target;
use pdmcount::simulation::{simulate, SimConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(config) = serde_json::from_slice::<SimConfig>(data) else { return };
    // Keep each input cheap: simulation is linear in n.
    if config.n <= 2_000 && config.validate().is_ok() {
        if let Ok(sim) = simulate(&config) {
            assert_eq!(sim.series.n(), config.n);
        }
    }
});
