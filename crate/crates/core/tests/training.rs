use std::fs;
use std::path::Path;

use ecomix_core::cvae::{self, CvaeHyper};
use ecomix_core::dataset::{parse_uci_csv, Dataset, FactorTable};

#[test]
fn default_cvae_trace_settles_over_the_second_half() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let raw = parse_uci_csv(&fs::read(data.join("concrete.csv")).unwrap()).unwrap();
    let factors = FactorTable::from_json(&fs::read(data.join("factors.example.json")).unwrap()).unwrap();
    let dataset = Dataset::build(&raw, &factors, 0.2, 42).unwrap();
    let trace = cvae::train(&dataset, &CvaeHyper::default()).unwrap().trace;
    assert_eq!(trace.len(), 500);
    assert!(trace.iter().all(|e| e.loss.is_finite() && e.reconstruction_mse.is_finite() && e.kl.is_finite()));

    let loss: Vec<f64> = trace.iter().map(|e| e.loss).collect();
    let ma: Vec<f64> = loss.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    let second_half = &ma[ma.len() / 2..];
    // minibatch noise at a fixed learning rate makes the average wobble by a
    // fraction of a percent, so each step may rise by at most 1%
    for (i, w) in second_half.windows(2).enumerate() {
        assert!(w[1] <= w[0] * 1.01, "moving average rose {:.3}% at step {i}", 100.0 * (w[1] / w[0] - 1.0));
    }
    assert!(second_half.last().unwrap() < second_half.first().unwrap());
}
