use std::collections::BTreeMap;

use crate::cvae::{CvaeNets, CvaeParams};
use crate::dataset::{AgeBucket, Dataset, FactorTable, Formula, RawRecord};
use crate::discovery::ModelSet;
use crate::nn::init_params;
use crate::predictors::{regressor_specs, ImpactPredictor, StrengthPredictorSet};

pub fn toy_factors() -> FactorTable {
    let mut f = FactorTable::zero();
    f.constituents.cement.gwp = 0.9;
    f.constituents.cement.ap = 0.002;
    f.constituents.water.cbw = 0.001;
    f.constituents.fly_ash.ap = 0.01;
    f.overhead.gwp = 3.0;
    f.overhead.ap = 0.01;
    f.overhead.cbw = 0.02;
    f
}

/// 120 deterministic records spread over all six buckets.
pub fn toy_dataset() -> Dataset {
    let raw: Vec<RawRecord> = (0..120)
        .map(|i| {
            let t = i as f64;
            RawRecord {
                formula: Formula::from_array([
                    100.0 + (t * 7.0) % 400.0,
                    (t * 13.0) % 200.0,
                    (t * 3.0) % 100.0,
                    150.0 + (t * 5.0) % 60.0,
                    (t * 0.7) % 20.0,
                    900.0 + (t * 11.0) % 200.0,
                    700.0 + (t * 17.0) % 150.0,
                ]),
                age_days: [3, 7, 14, 28, 56, 90][i % 6],
                strength_mpa: 10.0 + (t * 1.3) % 50.0,
            }
        })
        .collect();
    Dataset::build(&raw, &toy_factors(), 0.2, 42).unwrap()
}

/// Freshly initialised (untrained) models over `dataset`'s normalisation.
pub fn toy_models(dataset: &Dataset, seed: u64) -> ModelSet {
    let spec = dataset.normalization().clone();
    let strength: BTreeMap<_, _> = AgeBucket::ALL
        .iter()
        .map(|b| (*b, init_params(&regressor_specs(1), seed + 10 + b.index() as u64).unwrap()))
        .collect();
    ModelSet {
        cvae: CvaeParams {
            nets: CvaeNets::init(seed).unwrap(),
            normalization: spec.clone(),
        },
        impact: ImpactPredictor {
            network: init_params(&regressor_specs(3), seed + 1).unwrap(),
            normalization: spec.clone(),
        },
        strength: StrengthPredictorSet::new(strength, spec).unwrap(),
    }
}
