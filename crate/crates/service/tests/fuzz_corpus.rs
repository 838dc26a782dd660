use std::fs;
use std::path::Path;

use ecomix_service::requests::{parse_generate, parse_predict};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn request_seeds_parse_only_when_well_formed() {
    for (target, parse) in [
        ("predict_request", (|b: &[u8]| parse_predict(b).is_ok()) as fn(&[u8]) -> bool),
        ("generate_request", |b: &[u8]| parse_generate(b).is_ok()),
    ] {
        let seeds = seeds(target);
        assert!(seeds.len() >= 3);
        for (name, bytes) in seeds {
            let well_formed = name == "valid" || name == "targets";
            assert_eq!(parse(&bytes), well_formed, "{target}/{name}");
        }
    }
}
