//! Dense feed-forward networks with explicit backpropagation.
//!
//! All arithmetic is `f64`. Weight matrices are stored row-major with shape
//! `output_width x input_width`.

mod adam;
mod checkpoint;
mod gradcheck;
mod loss;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{NetworkCheckpoint, FORMAT_VERSION};
pub use gradcheck::{finite_diff_grad, max_relative_error};
pub use loss::mse_loss;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// Largest `f64` below one.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Numerically stable logistic function, kept strictly inside `(0, 1)`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_width: usize, output_width: usize, activation: Activation) -> Self {
        LayerSpec {
            input_width,
            output_width,
            activation,
        }
    }
}

/// Builds a chain of specs from widths, using `hidden` on every layer except
/// the last, which uses `output`.
pub fn chain(widths: &[usize], hidden: Activation, output: Activation) -> Vec<LayerSpec> {
    widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i + 2 == widths.len() { output } else { hidden };
            LayerSpec::new(w[0], w[1], act)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    #[serde(flatten)]
    pub spec: LayerSpec,
    /// Row-major, `output_width x input_width`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn validate(&self) -> Result<()> {
        let s = self.spec;
        if s.input_width == 0 || s.output_width == 0 {
            return Err(Error::Shape("layer widths must be at least 1".into()));
        }
        if self.weights.len() != s.input_width * s.output_width || self.bias.len() != s.output_width
        {
            return Err(Error::Shape(format!(
                "layer {}->{} has {} weights and {} biases",
                s.input_width,
                s.output_width,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        Ok(())
    }
}

/// Parameters of a dense network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Network {
    layers: Vec<Dense>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// `activations[0]` is the input; `activations[k + 1]` the output of layer `k`.
    pub activations: Vec<Vec<f64>>,
    /// Pre-activation values of each layer.
    pub pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Per-layer gradients, shaped like a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

/// Result of [`backward`]: parameter gradients plus the gradient with
/// respect to the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Backprop {
    pub grads: Gradients,
    pub input_grad: Vec<f64>,
}

impl Network {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let net = Network { layers };
        net.validate()?;
        Ok(net)
    }

    /// Zero weights and biases.
    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        check_chain(specs)?;
        Network::from_layers(
            specs
                .iter()
                .map(|s| Dense {
                    spec: *s,
                    weights: vec![0.0; s.input_width * s.output_width],
                    bias: vec![0.0; s.output_width],
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_chain(&self.specs())?;
        self.layers.iter().try_for_each(Dense::validate)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_width
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Mutable reference to parameter `index` in flat order (per layer:
    /// weights then biases).
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            if index < l.weights.len() {
                return &mut l.weights[index];
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                return &mut l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Output only, without keeping intermediates.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for l in &self.layers {
            x = affine(l, &x)
                .into_iter()
                .map(|v| l.spec.activation.apply(v))
                .collect();
        }
        Ok(x)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_width()
            )));
        }
        Ok(())
    }
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Shape("network needs at least one layer".into()));
    }
    for (k, s) in specs.iter().enumerate() {
        if s.input_width == 0 || s.output_width == 0 {
            return Err(Error::Shape(format!("layer {k} has a zero width")));
        }
    }
    for (k, w) in specs.windows(2).enumerate() {
        if w[0].output_width != w[1].input_width {
            return Err(Error::Shape(format!(
                "layer {k} outputs {} values but layer {} takes {}",
                w[0].output_width,
                k + 1,
                w[1].input_width
            )));
        }
    }
    Ok(())
}

#[inline]
fn affine(layer: &Dense, x: &[f64]) -> Vec<f64> {
    let n_in = layer.spec.input_width;
    layer
        .weights
        .chunks_exact(n_in)
        .zip(&layer.bias)
        .map(|(row, b)| row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi))
        .collect()
}

/// Fan-in uniform initialisation: weights ~ U(-b, b) with
/// `b = sqrt(6 / input_width)`, biases zero. Deterministic per seed.
pub fn init_params(specs: &[LayerSpec], seed: u64) -> Result<Network> {
    let mut net = Network::zeros(specs)?;
    let mut rng = rng::seeded(seed);
    for l in &mut net.layers {
        let bound = (6.0 / l.spec.input_width as f64).sqrt();
        for w in &mut l.weights {
            *w = (2.0 * rng.random::<f64>() - 1.0) * bound;
        }
    }
    Ok(net)
}

/// Forward pass retaining every layer's pre- and post-activation values.
pub fn forward(net: &Network, input: &[f64]) -> Result<Trace> {
    net.check_input(input)?;
    let mut activations = Vec::with_capacity(net.layers.len() + 1);
    let mut pre = Vec::with_capacity(net.layers.len());
    activations.push(input.to_vec());
    for l in &net.layers {
        let z = affine(l, activations.last().expect("non-empty"));
        let a = z.iter().map(|v| l.spec.activation.apply(*v)).collect();
        pre.push(z);
        activations.push(a);
    }
    Ok(Trace { activations, pre })
}

/// Backpropagates `output_grad` (dL/d output) through a forward `trace`.
pub fn backward(net: &Network, trace: &Trace, output_grad: &[f64]) -> Result<Backprop> {
    let n = net.layers.len();
    if trace.pre.len() != n || trace.activations.len() != n + 1 {
        return Err(Error::Shape("trace does not match network depth".into()));
    }
    if output_grad.len() != net.output_width() {
        return Err(Error::Shape(format!(
            "output gradient has length {}, network outputs {}",
            output_grad.len(),
            net.output_width()
        )));
    }
    let mut grads = Gradients::zeros_like(net);
    let mut delta_out = output_grad.to_vec();
    for k in (0..n).rev() {
        let l = &net.layers[k];
        let n_in = l.spec.input_width;
        let (z, a, x) = (&trace.pre[k], &trace.activations[k + 1], &trace.activations[k]);
        if z.len() != l.spec.output_width || x.len() != n_in {
            return Err(Error::Shape(format!("trace layer {k} has wrong widths")));
        }
        let delta: Vec<f64> = delta_out
            .iter()
            .zip(z.iter().zip(a))
            .map(|(g, (zi, ai))| g * l.spec.activation.derivative(*zi, *ai))
            .collect();
        let gw = &mut grads.weights[k];
        for (o, d) in delta.iter().enumerate() {
            let row = &mut gw[o * n_in..(o + 1) * n_in];
            for (g, xi) in row.iter_mut().zip(x) {
                *g = d * xi;
            }
        }
        grads.bias[k].copy_from_slice(&delta);
        let mut below = vec![0.0; n_in];
        for (row, d) in l.weights.chunks_exact(n_in).zip(&delta) {
            for (b, w) in below.iter_mut().zip(row) {
                *b += w * d;
            }
        }
        delta_out = below;
    }
    Ok(Backprop {
        grads,
        input_grad: delta_out,
    })
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn matches(&self, net: &Network) -> bool {
        self.weights.len() == net.layers.len()
            && self.bias.len() == net.layers.len()
            && net
                .layers
                .iter()
                .zip(self.weights.iter().zip(&self.bias))
                .all(|(l, (w, b))| w.len() == l.weights.len() && b.len() == l.bias.len())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.values_mut() {
            *v *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Flat iteration in the same order as [`Network::param_mut`].
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b))
            .copied()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .zip(self.bias.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }
}
