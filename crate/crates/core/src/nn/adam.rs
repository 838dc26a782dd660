use serde::{Deserialize, Serialize};

use super::{Gradients, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Gradients,
    pub v: Gradients,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        AdamState {
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            config,
        }
    }
}

/// One bias-corrected Adam update of `net` in place.
///
/// Non-finite gradients are rejected before any parameter is touched.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if !grads.matches(net) || !state.m.matches(net) || !state.v.matches(net) {
        return Err(Error::Shape("gradient/optimizer state shape differs from network".into()));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (k, layer) in net.layers_mut().iter_mut().enumerate() {
        let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
        let g = grads.weights[k].iter().chain(&grads.bias[k]);
        let m = state.m.weights[k].iter_mut().chain(state.m.bias[k].iter_mut());
        let v = state.v.weights[k].iter_mut().chain(state.v.bias[k].iter_mut());
        for (((p, g), m), v) in params.zip(g).zip(m).zip(v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};

    fn scalar_net(w: f64) -> Network {
        let mut net = Network::zeros(&[LayerSpec::new(1, 1, Activation::Identity)]).unwrap();
        net.layers_mut()[0].weights[0] = w;
        net
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            weights: vec![vec![g]],
            bias: vec![vec![0.0]],
        }
    }

    /// Independent scalar Adam written straight from the update rule.
    fn reference_adam(mut w: f64, grads: &[f64]) -> Vec<f64> {
        let (lr, b1, b2, eps) = (1e-3f64, 0.9f64, 0.999f64, 1e-8f64);
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut out = Vec::new();
        for (i, g) in grads.iter().enumerate() {
            let t = (i + 1) as f64;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powf(t));
            let vh = v / (1.0 - b2.powf(t));
            w -= lr * mh / (vh.sqrt() + eps);
            out.push(w);
        }
        out
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut net = scalar_net(0.7);
        let mut st = AdamState::new(&net, AdamConfig::default());
        adam_step(&mut net, &scalar_grad(0.0), &mut st).unwrap();
        assert_eq!(net.layers()[0].weights[0], 0.7);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_bounded_by_lr() {
        for g in [1e-12, 1e-6, 0.3, -2.0, 1e6] {
            let mut net = scalar_net(0.0);
            let mut st = AdamState::new(&net, AdamConfig::default());
            adam_step(&mut net, &scalar_grad(g), &mut st).unwrap();
            let step = net.layers()[0].weights[0].abs();
            assert!(step <= 1e-3 && step > 0.0, "g {g}: step {step}");
        }
    }

    #[test]
    fn three_step_trace_matches_reference() {
        let want = reference_adam(0.5, &[1.0, 1.0, 1.0]);
        let mut net = scalar_net(0.5);
        let mut st = AdamState::new(&net, AdamConfig::default());
        for w in want {
            adam_step(&mut net, &scalar_grad(1.0), &mut st).unwrap();
            assert!((net.layers()[0].weights[0] - w).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_rejected_untouched() {
        let mut net = scalar_net(0.5);
        let mut st = AdamState::new(&net, AdamConfig::default());
        let before = (net.clone(), st.clone());
        assert!(matches!(
            adam_step(&mut net, &scalar_grad(f64::NAN), &mut st),
            Err(Error::NonFinite(_))
        ));
        assert_eq!((net, st), before);
    }
}
