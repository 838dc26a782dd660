#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = ecomix_core::dataset::parse_labeled_csv(data);
});
