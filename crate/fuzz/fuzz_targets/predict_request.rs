#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(req) = ecomix_service::requests::parse_predict(data) {
        assert!(req.formula.to_array().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
});
