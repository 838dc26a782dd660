use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cvae::{generate, Condition, LatentCode};
use crate::dataset::{AgeBucket, Column, Dataset};
use crate::predictors::predict_strength;
use crate::{rng, Error, Result};

use super::{bucket_age01, ModelSet};

pub const DEFAULT_PROGRESSION_SAMPLES: usize = 10_000;

/// How interpolation weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    /// α drawn uniformly from [0, 1].
    #[default]
    Random,
    /// α = i/(n−1), so both endpoints are hit exactly.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressionPoint {
    pub alpha: f64,
    pub desired: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressionReport {
    pub schema: String,
    pub bucket: AgeBucket,
    pub seed: u64,
    pub mode: AlphaMode,
    pub x_min: f64,
    pub x_max: f64,
    pub rmse: f64,
    pub points: Vec<ProgressionPoint>,
}

impl ProgressionReport {
    pub const SCHEMA: &'static str = "progression/v1";
}

/// Desired strength for an interpolation weight.
pub fn interpolate(x_min: f64, x_max: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * x_min + alpha * x_max
}

/// Training-split strength range of one bucket.
pub fn training_strength_range(dataset: &Dataset, bucket: AgeBucket) -> Result<(f64, f64)> {
    dataset
        .train()
        .filter(|r| r.bucket == bucket)
        .map(|r| r.raw.strength_mpa)
        .fold(None, |acc: Option<(f64, f64)>, s| {
            Some(acc.map_or((s, s), |(lo, hi)| (lo.min(s), hi.max(s))))
        })
        .ok_or_else(|| Error::Empty(format!("no training records in bucket {bucket}")))
}

/// Mean of each impact column over the training split, in normalised space.
pub fn training_impact_means01(dataset: &Dataset) -> [f64; 3] {
    let spec = dataset.normalization();
    let n = dataset.train().count().max(1) as f64;
    std::array::from_fn(|d| {
        let c = Column::IMPACTS[d];
        dataset.train().map(|r| spec.normalize(r.column(c), c)).sum::<f64>() / n
    })
}

/// Conditions the generator on strengths interpolated across the bucket's
/// training range and reports how closely predicted strength follows.
pub fn progression_experiment(
    models: &ModelSet,
    dataset: &Dataset,
    bucket: AgeBucket,
    n: usize,
    seed: u64,
    mode: AlphaMode,
) -> Result<ProgressionReport> {
    models.validate()?;
    if n == 0 {
        return Err(Error::Domain("progression needs at least one sample".into()));
    }
    let (x_min, x_max) = training_strength_range(dataset, bucket)?;
    let spec = &models.cvae.normalization;
    let [gwp01, ap01, cbw01] = training_impact_means01(dataset);
    let age01 = bucket_age01(spec, bucket);
    let mut rng = rng::seeded(seed);
    let mut points = Vec::with_capacity(n);
    let mut sse = 0.0;
    for i in 0..n {
        let alpha = match mode {
            AlphaMode::Random => rng.random::<f64>(),
            AlphaMode::Grid if n == 1 => 0.0,
            AlphaMode::Grid => i as f64 / (n - 1) as f64,
        };
        let desired = interpolate(x_min, x_max, alpha);
        let condition = Condition {
            strength01: spec.normalize(desired, Column::Strength),
            age01,
            gwp01,
            ap01,
            cbw01,
        };
        let z = LatentCode([rng.sample(StandardNormal), rng.sample(StandardNormal)]);
        let formula = generate(&models.cvae, &condition, &z)?;
        let predicted = predict_strength(&models.strength, &formula, bucket)?.strength_mpa;
        sse += (predicted - desired).powi(2);
        points.push(ProgressionPoint {
            alpha,
            desired,
            predicted,
        });
    }
    Ok(ProgressionReport {
        schema: ProgressionReport::SCHEMA.into(),
        bucket,
        seed,
        mode,
        x_min,
        x_max,
        rmse: (sse / n as f64).sqrt(),
        points,
    })
}
