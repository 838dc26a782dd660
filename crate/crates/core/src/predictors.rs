//! Neural property predictors and regression metrics.
//!
//! One 7→32→16→3 network maps normalised constituents to normalised
//! GWP/AP/CBW; six 7→32→16→1 networks, one per age bucket, map them to
//! normalised compressive strength. All use ReLU hidden layers, a linear
//! output, MSE loss and Adam.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AgeBucket, Column, Dataset, Formula, ImpactVector, NormalizationSpec};
use crate::nn::{
    adam_step, backward, chain, forward, init_params, mse_loss, Activation, AdamConfig,
    AdamState, Gradients, LayerSpec, Network, FORMAT_VERSION,
};
use crate::{rng, Error, Result};

pub const HIDDEN_WIDTHS: [usize; 2] = [32, 16];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for PredictorHyper {
    fn default() -> Self {
        PredictorHyper {
            lr: 1e-3,
            batch_size: 10,
            epochs: 500,
            seed: 42,
        }
    }
}

pub fn regressor_specs(outputs: usize) -> Vec<LayerSpec> {
    chain(
        &[7, HIDDEN_WIDTHS[0], HIDDEN_WIDTHS[1], outputs],
        Activation::Relu,
        Activation::Identity,
    )
}

/// Mini-batch Adam on mean squared error.
fn fit_regressor(
    specs: &[LayerSpec],
    inputs: &[[f64; 7]],
    targets: &[Vec<f64>],
    hyper: &PredictorHyper,
    seed: u64,
) -> Result<Network> {
    if !(hyper.lr > 0.0) || hyper.batch_size == 0 {
        return Err(Error::Config("lr must be > 0 and batch_size >= 1".into()));
    }
    let mut net = init_params(specs, seed)?;
    let mut state = AdamState::new(
        &net,
        AdamConfig {
            lr: hyper.lr,
            ..AdamConfig::default()
        },
    );
    let mut rng = rng::substream(seed, 100);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            let mut acc = Gradients::zeros_like(&net);
            for &i in batch {
                let trace = forward(&net, &inputs[i])?;
                let (loss, dl) = mse_loss(trace.output(), &targets[i])?;
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        message: format!("loss {loss}"),
                    });
                }
                acc.add_assign(&backward(&net, &trace, &dl)?.grads);
            }
            acc.scale(1.0 / batch.len() as f64);
            adam_step(&mut net, &acc, &mut state).map_err(|e| Error::Diverged {
                epoch,
                message: e.to_string(),
            })?;
        }
    }
    Ok(net)
}

/// Normalised inputs, clamped into the training range.
fn formula_input(spec: &NormalizationSpec, formula: &Formula) -> [f64; 7] {
    let a = formula.to_array();
    std::array::from_fn(|i| spec.normalize(a[i], Column::Constituent(i as u8)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactPredictor {
    pub network: Network,
    pub normalization: NormalizationSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactPrediction {
    pub impacts: ImpactVector,
    /// True when a negative value was clamped to zero.
    pub clamped: bool,
}

pub fn train_impact_predictor(dataset: &Dataset, hyper: &PredictorHyper) -> Result<ImpactPredictor> {
    let spec = dataset.normalization();
    let (inputs, targets): (Vec<_>, Vec<_>) = dataset
        .train()
        .map(|r| {
            let t = Column::IMPACTS
                .iter()
                .map(|c| spec.normalize(r.column(*c), *c))
                .collect::<Vec<_>>();
            (formula_input(spec, &r.raw.formula), t)
        })
        .unzip();
    if inputs.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    let network = fit_regressor(&regressor_specs(3), &inputs, &targets, hyper, hyper.seed)?;
    Ok(ImpactPredictor {
        network,
        normalization: spec.clone(),
    })
}

pub fn predict_impacts(predictor: &ImpactPredictor, formula: &Formula) -> Result<ImpactPrediction> {
    let spec = &predictor.normalization;
    let out = predictor.network.predict(&formula_input(spec, formula))?;
    let mut clamped = false;
    let v: [f64; 3] = std::array::from_fn(|d| {
        let x = spec.denormalize(out[d], Column::IMPACTS[d]);
        if x < 0.0 {
            clamped = true;
            0.0
        } else {
            x
        }
    });
    Ok(ImpactPrediction {
        impacts: ImpactVector::from_array(v),
        clamped,
    })
}

/// Six per-bucket strength networks sharing one normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthPredictorSet {
    models: BTreeMap<AgeBucket, Network>,
    pub normalization: NormalizationSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthPrediction {
    pub strength_mpa: f64,
    /// True when a non-positive value was raised to the training minimum.
    pub clamped: bool,
}

impl StrengthPredictorSet {
    pub fn new(models: BTreeMap<AgeBucket, Network>, normalization: NormalizationSpec) -> Result<Self> {
        for b in AgeBucket::ALL {
            let net = models
                .get(&b)
                .ok_or_else(|| Error::Shape(format!("missing strength model for {b}")))?;
            if net.specs() != regressor_specs(1) {
                return Err(Error::Shape(format!("strength model {b} has the wrong architecture")));
            }
        }
        Ok(StrengthPredictorSet {
            models,
            normalization,
        })
    }

    pub fn model(&self, bucket: AgeBucket) -> Result<&Network> {
        self.models
            .get(&bucket)
            .ok_or_else(|| Error::Domain(format!("no strength model for bucket {bucket}")))
    }

    pub fn models(&self) -> &BTreeMap<AgeBucket, Network> {
        &self.models
    }
}

/// Indices of the training rows of `bucket`.
pub fn bucket_training_rows(dataset: &Dataset, bucket: AgeBucket) -> Vec<usize> {
    dataset
        .records()
        .iter()
        .zip(dataset.roles())
        .enumerate()
        .filter(|(_, (r, role))| r.bucket == bucket && **role == crate::dataset::SplitRole::Train)
        .map(|(i, _)| i)
        .collect()
}

/// Trains the six bucket models in parallel; each sees only its own rows.
pub fn train_strength_predictors(
    dataset: &Dataset,
    hyper: &PredictorHyper,
) -> Result<StrengthPredictorSet> {
    let spec = dataset.normalization();
    let trained: Vec<(AgeBucket, Network)> = AgeBucket::ALL
        .par_iter()
        .map(|&bucket| {
            let rows = bucket_training_rows(dataset, bucket);
            if rows.is_empty() {
                return Err(Error::Empty(format!("no training records in bucket {bucket}")));
            }
            let (inputs, targets): (Vec<_>, Vec<_>) = rows
                .iter()
                .map(|&i| {
                    let r = &dataset.records()[i];
                    (
                        formula_input(spec, &r.raw.formula),
                        vec![spec.normalize(r.raw.strength_mpa, Column::Strength)],
                    )
                })
                .unzip();
            let seed = rng::derive_seed(hyper.seed, bucket.index() as u64);
            Ok((bucket, fit_regressor(&regressor_specs(1), &inputs, &targets, hyper, seed)?))
        })
        .collect::<Result<_>>()?;
    StrengthPredictorSet::new(trained.into_iter().collect(), spec.clone())
}

pub fn predict_strength(
    set: &StrengthPredictorSet,
    formula: &Formula,
    bucket: AgeBucket,
) -> Result<StrengthPrediction> {
    let spec = &set.normalization;
    let out = set.model(bucket)?.predict(&formula_input(spec, formula))?;
    let v = spec.denormalize(out[0], Column::Strength);
    if v > 0.0 {
        Ok(StrengthPrediction {
            strength_mpa: v,
            clamped: false,
        })
    } else {
        Ok(StrengthPrediction {
            strength_mpa: spec.range(Column::Strength).min,
            clamped: true,
        })
    }
}

/// MAE, RMSE and R² of a set of predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    /// RMSE divided by the range of the targets; absent for constant targets.
    pub rmse_normalized: Option<f64>,
    /// Absent when the targets have zero variance.
    pub r2: Option<f64>,
}

pub fn metrics(predictions: &[f64], targets: &[f64]) -> Result<RegressionMetrics> {
    if predictions.len() != targets.len() || targets.is_empty() {
        return Err(Error::Shape(format!(
            "metrics over {} predictions and {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let (mut abs, mut sse, mut sst) = (0.0, 0.0, 0.0);
    for (p, t) in predictions.iter().zip(targets) {
        let e = p - t;
        abs += e.abs();
        sse += e * e;
        sst += (t - mean) * (t - mean);
    }
    let mae = abs / n;
    // rmse >= mae by Jensen; rounding can only cost an ulp or two
    let rmse = (sse / n).sqrt().max(mae);
    let (lo, hi) = targets
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(*t), hi.max(*t)));
    let r2 = (sst > 0.0).then(|| {
        let r = 1.0 - sse / sst;
        if sse > 0.0 {
            r.min(1.0 - f64::EPSILON / 2.0)
        } else {
            r
        }
    });
    Ok(RegressionMetrics {
        n: targets.len(),
        mae,
        rmse,
        rmse_normalized: (hi > lo).then(|| rmse / (hi - lo)),
        r2,
    })
}

/// Held-out metrics of the impact predictor, one entry per GWP/AP/CBW.
pub fn evaluate_impacts(predictor: &ImpactPredictor, dataset: &Dataset) -> Result<[RegressionMetrics; 3]> {
    let mut preds: [Vec<f64>; 3] = Default::default();
    let mut targets: [Vec<f64>; 3] = Default::default();
    for r in dataset.test() {
        let p = predict_impacts(predictor, &r.raw.formula)?.impacts.to_array();
        for d in 0..3 {
            preds[d].push(p[d]);
            targets[d].push(r.impacts.to_array()[d]);
        }
    }
    Ok([
        metrics(&preds[0], &targets[0])?,
        metrics(&preds[1], &targets[1])?,
        metrics(&preds[2], &targets[2])?,
    ])
}

/// Held-out strength metrics per bucket.
pub fn evaluate_strength(
    set: &StrengthPredictorSet,
    dataset: &Dataset,
) -> Result<BTreeMap<AgeBucket, RegressionMetrics>> {
    let mut out = BTreeMap::new();
    for b in AgeBucket::ALL {
        let (p, t): (Vec<f64>, Vec<f64>) = dataset
            .test()
            .filter(|r| r.bucket == b)
            .map(|r| {
                predict_strength(set, &r.raw.formula, b).map(|s| (s.strength_mpa, r.raw.strength_mpa))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        if !t.is_empty() {
            out.insert(b, metrics(&p, &t)?);
        }
    }
    Ok(out)
}

/// Metric rows × named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub schema: String,
    pub title: String,
    pub columns: Vec<(String, RegressionMetrics)>,
}

impl MetricsTable {
    pub const SCHEMA: &'static str = "metrics-table/v1";

    pub fn new(title: &str, columns: Vec<(String, RegressionMetrics)>) -> Self {
        MetricsTable {
            schema: Self::SCHEMA.into(),
            title: title.into(),
            columns,
        }
    }

    /// `metric,<col>,<col>,...` with rows MAE, RMSE, RMSE_normalized, R2 and N.
    /// Absent values are written as empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for (name, _) in &self.columns {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        type Row = (&'static str, fn(&RegressionMetrics) -> Option<f64>);
        let rows: [Row; 4] = [
            ("MAE", |m| Some(m.mae)),
            ("RMSE", |m| Some(m.rmse)),
            ("RMSE_normalized", |m| m.rmse_normalized),
            ("R2", |m| m.r2),
        ];
        for (label, get) in rows {
            out.push_str(label);
            for (_, m) in &self.columns {
                let _ = write!(out, ",{}", opt(get(m)));
            }
            out.push('\n');
        }
        out.push('N');
        for (_, m) in &self.columns {
            let _ = write!(out, ",{}", m.n);
        }
        out.push('\n');
        out
    }
}

/// On-disk predictor checkpoint. `bucket` is present for strength models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorCheckpoint {
    pub format_version: u32,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<AgeBucket>,
    pub seed: u64,
    pub hyper: PredictorHyper,
    pub normalization: NormalizationSpec,
    pub network: Network,
}

impl PredictorCheckpoint {
    pub const IMPACT_KIND: &'static str = "impact_predictor";
    pub const STRENGTH_KIND: &'static str = "strength_predictor";

    pub fn impact(p: &ImpactPredictor, hyper: &PredictorHyper) -> Self {
        PredictorCheckpoint {
            format_version: FORMAT_VERSION,
            kind: Self::IMPACT_KIND.into(),
            bucket: None,
            seed: hyper.seed,
            hyper: *hyper,
            normalization: p.normalization.clone(),
            network: p.network.clone(),
        }
    }

    pub fn strength(set: &StrengthPredictorSet, bucket: AgeBucket, hyper: &PredictorHyper) -> Result<Self> {
        Ok(PredictorCheckpoint {
            format_version: FORMAT_VERSION,
            kind: Self::STRENGTH_KIND.into(),
            bucket: Some(bucket),
            seed: rng::derive_seed(hyper.seed, bucket.index() as u64),
            hyper: *hyper,
            normalization: set.normalization.clone(),
            network: set.model(bucket)?.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let ck: PredictorCheckpoint = serde_json::from_slice(bytes)?;
        let fail = |m: String| Err(Error::Checkpoint(m));
        if ck.format_version != FORMAT_VERSION {
            return fail(format!("unsupported format_version {}", ck.format_version));
        }
        let outputs = match (ck.kind.as_str(), ck.bucket) {
            (Self::IMPACT_KIND, None) => 3,
            (Self::STRENGTH_KIND, Some(_)) => 1,
            (k, b) => return fail(format!("invalid predictor kind {k:?} with bucket {b:?}")),
        };
        ck.normalization
            .validate()
            .and_then(|_| ck.network.validate())
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.network.specs() != regressor_specs(outputs) {
            return fail(format!("{} network has the wrong architecture", ck.kind));
        }
        Ok(ck)
    }

    pub fn into_impact(self) -> Result<ImpactPredictor> {
        if self.kind != Self::IMPACT_KIND {
            return Err(Error::Checkpoint(format!("expected impact predictor, found {}", self.kind)));
        }
        Ok(ImpactPredictor {
            network: self.network,
            normalization: self.normalization,
        })
    }
}
