#![no_main]

use libfuzzer_sys::fuzz_target;

use ecomix_core::discovery::BandPlan;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(plan) = text.parse::<BandPlan>() {
        let back: BandPlan = plan.to_string().parse().unwrap();
        assert_eq!(back, plan);
    }
});
