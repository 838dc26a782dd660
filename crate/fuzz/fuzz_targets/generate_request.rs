#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(req) = ecomix_service::requests::parse_generate(data) {
        assert!(req.strength_target_mpa.is_finite());
    }
});
