use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvae::{generate, Condition, LatentCode};
use crate::dataset::{AgeBucket, Column, Formula, ImpactVector, NormalizationSpec};
use crate::predictors::{predict_impacts, predict_strength};
use crate::{rng, Result};

use super::ModelSet;

pub const DEFAULT_CANDIDATES: usize = 60_000;

/// A generated formula with its predicted properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub formula: Formula,
    pub condition_used: Condition,
    pub predicted_strength: f64,
    pub predicted_impacts: ImpactVector,
    pub bucket: AgeBucket,
}

/// Normalised age of a bucket's representative day count.
pub fn bucket_age01(spec: &NormalizationSpec, bucket: AgeBucket) -> f64 {
    spec.normalize(bucket.center_days() as f64, Column::Age)
}

/// Uniform strength and impact conditions with the age fixed to the bucket.
pub fn sample_conditions(
    n: usize,
    bucket: AgeBucket,
    spec: &NormalizationSpec,
    seed: u64,
) -> Vec<Condition> {
    let mut rng = rng::seeded(seed);
    let age01 = bucket_age01(spec, bucket);
    (0..n)
        .map(|_| Condition {
            strength01: rng.random(),
            age01,
            gwp01: rng.random(),
            ap01: rng.random(),
            cbw01: rng.random(),
        })
        .collect()
}

/// Conditions with a fixed physical strength target; impact components use
/// the given physical targets where present and uniform draws otherwise.
pub fn targeted_conditions(
    n: usize,
    bucket: AgeBucket,
    spec: &NormalizationSpec,
    strength_mpa: f64,
    impact_targets: [Option<f64>; 3],
    seed: u64,
) -> Vec<Condition> {
    let mut rng = rng::seeded(seed);
    let age01 = bucket_age01(spec, bucket);
    let strength01 = spec.normalize(strength_mpa, Column::Strength);
    let fixed: [Option<f64>; 3] =
        std::array::from_fn(|d| impact_targets[d].map(|v| spec.normalize(v, Column::IMPACTS[d])));
    (0..n)
        .map(|_| {
            let [gwp01, ap01, cbw01] = fixed.map(|f| f.unwrap_or_else(|| rng.random()));
            Condition {
                strength01,
                age01,
                gwp01,
                ap01,
                cbw01,
            }
        })
        .collect()
}

/// Latent draw for candidate `index`; independent of how work is sharded.
pub fn latent_for(seed: u64, index: usize) -> LatentCode {
    let mut rng = rng::substream(seed, index as u64);
    LatentCode([rng.sample(StandardNormal), rng.sample(StandardNormal)])
}

pub fn evaluate(models: &ModelSet, formula: Formula, condition: Condition, bucket: AgeBucket) -> Result<Candidate> {
    Ok(Candidate {
        formula,
        condition_used: condition,
        predicted_strength: predict_strength(&models.strength, &formula, bucket)?.strength_mpa,
        predicted_impacts: predict_impacts(&models.impact, &formula)?.impacts,
        bucket,
    })
}

/// Decodes every condition with a seeded latent code and evaluates the result.
/// Runs on the current rayon pool; output order follows `conditions`.
pub fn generate_candidates(
    models: &ModelSet,
    conditions: &[Condition],
    bucket: AgeBucket,
    seed: u64,
) -> Result<Vec<Candidate>> {
    models.validate()?;
    conditions
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let formula = generate(&models.cvae, c, &latent_for(seed, i))?;
            evaluate(models, formula, *c, bucket)
        })
        .collect()
}
