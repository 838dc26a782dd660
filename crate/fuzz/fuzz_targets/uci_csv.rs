#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = ecomix_core::dataset::parse_uci_csv(data) {
        for r in records {
            assert!(r.age_days > 0 && r.strength_mpa.is_finite());
        }
    }
});
