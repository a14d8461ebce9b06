#![no_main]

use equiwave::profiles::{MetricProfile, ProfileSpec, TargetProfile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = serde_json::from_slice::<ProfileSpec>(data) {
        if let Ok(p) = MetricProfile::from_spec(&spec) {
            let _ = p.value(1.0);
        }
        let _ = TargetProfile::from_spec(&spec);
    }
});
