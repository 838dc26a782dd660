//! Replays the checked-in fuzz seeds through the parsers so they stay
//! meaningful: seeds named as well-formed must parse, the rest must be
//! rejected with an error rather than a panic.

use std::fs;
use std::path::Path;

use ecomix_core::cvae::CvaeCheckpoint;
use ecomix_core::dataset::{parse_labeled_csv, parse_uci_csv, FactorTable};
use ecomix_core::discovery::BandPlan;
use ecomix_core::nn::NetworkCheckpoint;
use ecomix_core::predictors::PredictorCheckpoint;

const WELL_FORMED: &[&str] = &["valid", "example", "small", "trained", "impact", "strength_d28", "standard", "half_widths", "header_only"];

fn replay(target: &str, parse: impl Fn(&[u8]) -> bool) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let ok = parse(&fs::read(&path).unwrap());
        assert_eq!(ok, WELL_FORMED.contains(&name.as_str()), "{target}/{name}");
        seen += 1;
    }
    assert!(seen >= 2, "{target} corpus is thin");
}

#[test]
fn uci_csv_seeds() {
    replay("uci_csv", |b| parse_uci_csv(b).is_ok());
}

#[test]
fn labeled_csv_seeds() {
    replay("labeled_csv", |b| parse_labeled_csv(b).is_ok());
}

#[test]
fn factor_table_seeds() {
    replay("factor_table", |b| FactorTable::from_json(b).is_ok());
}

#[test]
fn checkpoint_seeds() {
    replay("network_checkpoint", |b| NetworkCheckpoint::from_json(b).is_ok());
    replay("predictor_checkpoint", |b| PredictorCheckpoint::from_json(b).is_ok());
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/cvae_checkpoint");
    let bytes = fs::read(dir.join("trained")).unwrap();
    CvaeCheckpoint::from_json(&bytes).unwrap();
    assert!(CvaeCheckpoint::from_json(&bytes[..bytes.len() / 2]).is_err());
}

#[test]
fn band_spec_seeds() {
    replay("band_spec", |b| std::str::from_utf8(b).unwrap().parse::<BandPlan>().is_ok());
}

fn all_seeds() -> Vec<Vec<u8>> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let mut out = Vec::new();
    for t in ["uci_csv", "labeled_csv", "factor_table", "network_checkpoint", "predictor_checkpoint", "band_spec"] {
        for e in fs::read_dir(root.join(t)).unwrap() {
            out.push(fs::read(e.unwrap().path()).unwrap());
        }
    }
    out
}

proptest::proptest! {
    #![proptest_config(proptest::test_runner::Config::with_cases(300))]

    #[test]
    fn mutated_seeds_never_panic(
        pick in 0usize..1000,
        edits in proptest::collection::vec((0usize..100_000, proptest::num::u8::ANY, 0u8..3), 1..8),
    ) {
        let seeds = all_seeds();
        let mut bytes = seeds[pick % seeds.len()].clone();
        for (at, byte, op) in edits {
            let at = at % (bytes.len() + 1);
            match op {
                0 if at < bytes.len() => bytes[at] = byte,
                1 => bytes.insert(at, byte),
                _ => bytes.truncate(at),
            }
        }
        let _ = parse_uci_csv(&bytes);
        let _ = parse_labeled_csv(&bytes);
        let _ = FactorTable::from_json(&bytes);
        let _ = NetworkCheckpoint::from_json(&bytes);
        let _ = PredictorCheckpoint::from_json(&bytes);
        let _ = CvaeCheckpoint::from_json(&bytes);
        if let Ok(text) = std::str::from_utf8(&bytes) {
            if let Ok(plan) = text.parse::<BandPlan>() {
                proptest::prop_assert_eq!(plan.to_string().parse::<BandPlan>().unwrap(), plan);
            }
        }
    }
}
