//! Conditional variational autoencoder over normalised mix formulas.
//!
//! The encoder maps `(x, y)` (5 condition values and 7 formula values) through
//! a 12→25→20 ReLU trunk into two linear heads giving the mean and log-variance
//! of a 2-D Gaussian posterior. The decoder maps `(x, z)` through 7→20→25→7
//! with ReLU hidden layers and a sigmoid output. The prior on `z` is the
//! standard normal. Training minimises squared reconstruction error plus
//! `kl_weight` times the closed-form KL divergence, using one reparameterised
//! sample per record per epoch.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset, Formula, LabeledRecord, NormalizationSpec};
use crate::nn::{
    adam_step, backward, chain, forward, init_params, Activation, AdamConfig, AdamState,
    Gradients, LayerSpec, Network, FORMAT_VERSION,
};
use crate::{rng, Error, Result};

pub const CONDITION_WIDTH: usize = 5;
pub const FORMULA_WIDTH: usize = 7;
pub const LATENT_WIDTH: usize = 2;
pub const ENCODER_WIDTHS: [usize; 3] = [CONDITION_WIDTH + FORMULA_WIDTH, 25, 20];
pub const DECODER_WIDTHS: [usize; 4] = [CONDITION_WIDTH + LATENT_WIDTH, 20, 25, FORMULA_WIDTH];
/// Order of the condition vector.
pub const CONDITION_LAYOUT: [&str; CONDITION_WIDTH] = ["strength", "age", "gwp", "ap", "cbw"];

/// Normalised side information `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub strength01: f64,
    pub age01: f64,
    pub gwp01: f64,
    pub ap01: f64,
    pub cbw01: f64,
}

impl Condition {
    pub fn from_array(a: [f64; CONDITION_WIDTH]) -> Result<Self> {
        if a.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("condition values must lie in [0, 1]: {a:?}")));
        }
        Ok(Condition {
            strength01: a[0],
            age01: a[1],
            gwp01: a[2],
            ap01: a[3],
            cbw01: a[4],
        })
    }

    pub fn to_array(&self) -> [f64; CONDITION_WIDTH] {
        [self.strength01, self.age01, self.gwp01, self.ap01, self.cbw01]
    }

    /// Condition of an extant record under `spec`.
    pub fn of_record(rec: &LabeledRecord, spec: &NormalizationSpec) -> Self {
        Condition {
            strength01: spec.normalize(rec.raw.strength_mpa, Column::Strength),
            age01: spec.normalize(f64::from(rec.raw.age_days), Column::Age),
            gwp01: spec.normalize(rec.impacts.gwp, Column::Gwp),
            ap01: spec.normalize(rec.impacts.ap, Column::Ap),
            cbw01: spec.normalize(rec.impacts.cbw, Column::Cbw),
        }
    }
}

/// Normalised constituent amounts `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulaVector(pub [f64; FORMULA_WIDTH]);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentCode(pub [f64; LATENT_WIDTH]);

/// The four networks of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvaeNets {
    pub encoder_trunk: Network,
    pub encoder_mu: Network,
    pub encoder_logvar: Network,
    pub decoder: Network,
}

impl CvaeNets {
    pub fn specs() -> [Vec<LayerSpec>; 4] {
        let head = vec![LayerSpec::new(ENCODER_WIDTHS[2], LATENT_WIDTH, Activation::Identity)];
        [
            chain(&ENCODER_WIDTHS, Activation::Relu, Activation::Relu),
            head.clone(),
            head,
            chain(&DECODER_WIDTHS, Activation::Relu, Activation::Sigmoid),
        ]
    }

    pub fn init(seed: u64) -> Result<Self> {
        let [t, m, l, d] = Self::specs();
        Ok(CvaeNets {
            encoder_trunk: init_params(&t, rng::derive_seed(seed, 0))?,
            encoder_mu: init_params(&m, rng::derive_seed(seed, 1))?,
            encoder_logvar: init_params(&l, rng::derive_seed(seed, 2))?,
            decoder: init_params(&d, rng::derive_seed(seed, 3))?,
        })
    }

    pub fn zeros() -> Result<Self> {
        let [t, m, l, d] = Self::specs();
        Ok(CvaeNets {
            encoder_trunk: Network::zeros(&t)?,
            encoder_mu: Network::zeros(&m)?,
            encoder_logvar: Network::zeros(&l)?,
            decoder: Network::zeros(&d)?,
        })
    }

    /// Checks the exact layer widths and activations.
    pub fn validate(&self) -> Result<()> {
        let names = ["encoder_trunk", "encoder_mu", "encoder_logvar", "decoder"];
        for ((name, net), want) in names.iter().zip(self.nets()).zip(Self::specs()) {
            net.validate()?;
            if net.specs() != want {
                return Err(Error::Shape(format!("{name} does not have the CVAE architecture")));
            }
        }
        Ok(())
    }

    pub fn nets(&self) -> [&Network; 4] {
        [
            &self.encoder_trunk,
            &self.encoder_mu,
            &self.encoder_logvar,
            &self.decoder,
        ]
    }

    pub fn nets_mut(&mut self) -> [&mut Network; 4] {
        [
            &mut self.encoder_trunk,
            &mut self.encoder_mu,
            &mut self.encoder_logvar,
            &mut self.decoder,
        ]
    }
}

/// Trained networks plus the scaling they were trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct CvaeParams {
    pub nets: CvaeNets,
    pub normalization: NormalizationSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvaeHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub kl_weight: f64,
    pub seed: u64,
}

impl Default for CvaeHyper {
    fn default() -> Self {
        CvaeHyper {
            lr: 1e-3,
            batch_size: 10,
            epochs: 500,
            kl_weight: 1.0,
            seed: 42,
        }
    }
}

/// Gradients for the four networks, in [`CvaeNets::nets`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct CvaeGradients(pub [Gradients; 4]);

impl CvaeGradients {
    fn zeros_like(nets: &CvaeNets) -> Self {
        CvaeGradients(nets.nets().map(Gradients::zeros_like))
    }

    fn add_assign(&mut self, other: &CvaeGradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElboOutput {
    pub loss: f64,
    /// Sum of squared reconstruction errors over the 7 outputs.
    pub reconstruction: f64,
    pub kl: f64,
    pub grads: CvaeGradients,
}

fn concat<const N: usize>(a: &[f64], b: &[f64]) -> [f64; N] {
    debug_assert_eq!(a.len() + b.len(), N);
    std::array::from_fn(|i| if i < a.len() { a[i] } else { b[i - a.len()] })
}

fn pair(v: &[f64]) -> [f64; LATENT_WIDTH] {
    [v[0], v[1]]
}

pub fn encode_nets(nets: &CvaeNets, x: &Condition, y: &FormulaVector) -> Result<([f64; 2], [f64; 2])> {
    let input: [f64; 12] = concat(&x.to_array(), &y.0);
    let h = nets.encoder_trunk.predict(&input)?;
    Ok((pair(&nets.encoder_mu.predict(&h)?), pair(&nets.encoder_logvar.predict(&h)?)))
}

/// Posterior mean and log-variance for `(x, y)`.
pub fn encode(params: &CvaeParams, x: &Condition, y: &FormulaVector) -> Result<([f64; 2], [f64; 2])> {
    encode_nets(&params.nets, x, y)
}

/// `z = mu + exp(logvar / 2) * eps`.
pub fn reparameterize(mu: [f64; 2], logvar: [f64; 2], eps: [f64; 2]) -> LatentCode {
    LatentCode(std::array::from_fn(|d| mu[d] + (0.5 * logvar[d]).exp() * eps[d]))
}

/// KL divergence of `N(mu, diag(exp(logvar)))` from `N(0, I)`.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

pub fn decode_nets(nets: &CvaeNets, x: &Condition, z: &LatentCode) -> Result<FormulaVector> {
    let input: [f64; 7] = concat(&x.to_array(), &z.0);
    let out = nets.decoder.predict(&input)?;
    Ok(FormulaVector(std::array::from_fn(|i| out[i])))
}

pub fn decode(params: &CvaeParams, x: &Condition, z: &LatentCode) -> Result<FormulaVector> {
    decode_nets(&params.nets, x, z)
}

/// Single-sample negative ELBO with gradients for all four networks.
pub fn elbo_loss(
    nets: &CvaeNets,
    x: &Condition,
    y: &FormulaVector,
    eps: [f64; 2],
    kl_weight: f64,
) -> Result<ElboOutput> {
    let enc_in: [f64; 12] = concat(&x.to_array(), &y.0);
    let trunk = forward(&nets.encoder_trunk, &enc_in)?;
    let h = trunk.output();
    let mu_t = forward(&nets.encoder_mu, h)?;
    let lv_t = forward(&nets.encoder_logvar, h)?;
    let (mu, logvar) = (pair(mu_t.output()), pair(lv_t.output()));
    let z = reparameterize(mu, logvar, eps);

    let dec_in: [f64; 7] = concat(&x.to_array(), &z.0);
    let dec = forward(&nets.decoder, &dec_in)?;
    let y_hat = dec.output();

    let mut reconstruction = 0.0;
    let d_out: Vec<f64> = y_hat
        .iter()
        .zip(&y.0)
        .map(|(p, t)| {
            let e = p - t;
            reconstruction += e * e;
            2.0 * e
        })
        .collect();
    let kl = kl_divergence(&mu, &logvar);
    let loss = reconstruction + kl_weight * kl;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("ELBO loss {loss}")));
    }

    let dec_bp = backward(&nets.decoder, &dec, &d_out)?;
    let dz = &dec_bp.input_grad[CONDITION_WIDTH..];
    let mut d_mu = [0.0; 2];
    let mut d_lv = [0.0; 2];
    for d in 0..LATENT_WIDTH {
        let sigma = (0.5 * logvar[d]).exp();
        d_mu[d] = dz[d] + kl_weight * mu[d];
        d_lv[d] = dz[d] * eps[d] * 0.5 * sigma + kl_weight * 0.5 * (logvar[d].exp() - 1.0);
    }
    let mu_bp = backward(&nets.encoder_mu, &mu_t, &d_mu)?;
    let lv_bp = backward(&nets.encoder_logvar, &lv_t, &d_lv)?;
    let d_h: Vec<f64> = mu_bp
        .input_grad
        .iter()
        .zip(&lv_bp.input_grad)
        .map(|(a, b)| a + b)
        .collect();
    let trunk_bp = backward(&nets.encoder_trunk, &trunk, &d_h)?;

    Ok(ElboOutput {
        loss,
        reconstruction,
        kl,
        grads: CvaeGradients([trunk_bp.grads, mu_bp.grads, lv_bp.grads, dec_bp.grads]),
    })
}

/// Per-epoch training means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean negative ELBO per record.
    pub loss: f64,
    /// Mean squared reconstruction error per output value.
    pub reconstruction_mse: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedCvae {
    pub params: CvaeParams,
    pub trace: Vec<EpochLoss>,
    pub hyper: CvaeHyper,
}

/// Training pairs `(x, y)` for the rows of the train split.
pub fn training_pairs(dataset: &Dataset) -> Vec<(Condition, FormulaVector)> {
    let spec = dataset.normalization();
    dataset
        .train()
        .map(|r| {
            (
                Condition::of_record(r, spec),
                FormulaVector(dataset.formula01(&r.raw.formula)),
            )
        })
        .collect()
}

/// Trains on the dataset's training split with shuffled mini-batches and
/// Adam. Deterministic per `hyper.seed`.
pub fn train(dataset: &Dataset, hyper: &CvaeHyper) -> Result<TrainedCvae> {
    if !(hyper.lr > 0.0) || hyper.batch_size == 0 {
        return Err(Error::Config("lr must be > 0 and batch_size >= 1".into()));
    }
    let pairs = training_pairs(dataset);
    if pairs.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    let mut nets = CvaeNets::init(hyper.seed)?;
    let config = AdamConfig {
        lr: hyper.lr,
        ..AdamConfig::default()
    };
    let mut states = nets.nets().map(|n| AdamState::new(n, config));
    let mut rng = rng::substream(hyper.seed, 100);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut trace = Vec::with_capacity(hyper.epochs);

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut rec_sum, mut kl_sum) = (0.0, 0.0, 0.0);
        for batch in order.chunks(hyper.batch_size) {
            let mut acc = CvaeGradients::zeros_like(&nets);
            for &i in batch {
                let eps = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
                let (x, y) = &pairs[i];
                let out = elbo_loss(&nets, x, y, eps, hyper.kl_weight).map_err(|e| {
                    Error::Diverged {
                        epoch,
                        message: e.to_string(),
                    }
                })?;
                loss_sum += out.loss;
                rec_sum += out.reconstruction;
                kl_sum += out.kl;
                acc.add_assign(&out.grads);
            }
            let scale = 1.0 / batch.len() as f64;
            for ((net, g), st) in nets.nets_mut().into_iter().zip(&mut acc.0).zip(&mut states) {
                g.scale(scale);
                adam_step(net, g, st).map_err(|e| Error::Diverged {
                    epoch,
                    message: e.to_string(),
                })?;
            }
        }
        let n = pairs.len() as f64;
        trace.push(EpochLoss {
            epoch,
            loss: loss_sum / n,
            reconstruction_mse: rec_sum / (n * FORMULA_WIDTH as f64),
            kl: kl_sum / n,
        });
    }

    Ok(TrainedCvae {
        params: CvaeParams {
            nets,
            normalization: dataset.normalization().clone(),
        },
        trace,
        hyper: *hyper,
    })
}

/// Decodes `(x, z)` and maps the result back to kg/m³. Amounts are clamped
/// to the training range of each constituent to absorb rounding in the
/// affine inverse.
pub fn generate(params: &CvaeParams, x: &Condition, z: &LatentCode) -> Result<Formula> {
    let y = decode(params, x, z)?;
    let spec = &params.normalization;
    Ok(Formula::from_array(std::array::from_fn(|i| {
        let col = Column::Constituent(i as u8);
        let r = spec.range(col);
        spec.denormalize(y.0[i], col).clamp(r.min, r.max)
    })))
}

/// On-disk CVAE checkpoint: the four networks plus the condition layout and
/// normalisation they were trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvaeCheckpoint {
    pub format_version: u32,
    pub kind: String,
    pub condition_layout: Vec<String>,
    pub latent_width: usize,
    pub seed: u64,
    pub hyper: CvaeHyper,
    pub normalization: NormalizationSpec,
    pub networks: CvaeNets,
}

impl CvaeCheckpoint {
    pub const KIND: &'static str = "cvae";

    pub fn new(trained: &TrainedCvae) -> Self {
        CvaeCheckpoint {
            format_version: FORMAT_VERSION,
            kind: Self::KIND.into(),
            condition_layout: CONDITION_LAYOUT.iter().map(|s| s.to_string()).collect(),
            latent_width: LATENT_WIDTH,
            seed: trained.hyper.seed,
            hyper: trained.hyper,
            normalization: trained.params.normalization.clone(),
            networks: trained.params.nets.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let ck: CvaeCheckpoint = serde_json::from_slice(bytes)?;
        let bad = |m: String| Err(Error::Checkpoint(m));
        if ck.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", ck.format_version));
        }
        if ck.kind != Self::KIND {
            return bad(format!("expected kind {:?}, found {:?}", Self::KIND, ck.kind));
        }
        if ck.condition_layout != CONDITION_LAYOUT || ck.latent_width != LATENT_WIDTH {
            return bad("condition layout or latent width differs from this build".into());
        }
        ck.normalization
            .validate()
            .and_then(|_| ck.networks.validate())
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(ck)
    }

    pub fn params(&self) -> CvaeParams {
        CvaeParams {
            nets: self.networks.clone(),
            normalization: self.normalization.clone(),
        }
    }
}
