#![no_main]

use libfuzzer_sys::fuzz_target;

use ecomix_core::nn::NetworkCheckpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = NetworkCheckpoint::from_json(data) {
        // whatever validates must survive a round trip
        let again = NetworkCheckpoint::from_json(ck.to_json().unwrap().as_bytes()).unwrap();
        assert_eq!(again.to_json().unwrap(), ck.to_json().unwrap());
    }
});
