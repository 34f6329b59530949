#![no_main]

use libfuzzer_sys::fuzz_target;
use pdmcount::latent::latent_moments;
use pdmcount::LatentSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = LatentSpec::from_json(text) {
        if let Ok(m) = latent_moments(&spec, 3) {
            if m.sigma_alpha_sq.is_finite() {
                assert!(m.sigma_alpha_sq >= -1e-12, "{spec:?}");
            }
        }
    }
});
