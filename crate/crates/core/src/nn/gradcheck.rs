use super::{Gradients, Network};

/// Central-difference estimate of d loss / d parameter for every parameter
/// of `params`, with step `h`.
pub fn finite_diff_grad<F>(loss_fn: F, params: &Network, h: f64) -> Gradients
where
    F: Fn(&Network) -> f64,
{
    let mut probe = params.clone();
    let mut out = Gradients::zeros_like(params);
    let flat: Vec<&mut f64> = out.values_mut().collect();
    for (i, slot) in flat.into_iter().enumerate() {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + h;
        let up = loss_fn(&probe);
        *probe.param_mut(i) = orig - h;
        let down = loss_fn(&probe);
        *probe.param_mut(i) = orig;
        *slot = (up - down) / (2.0 * h);
    }
    out
}

/// Largest elementwise `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &Gradients, b: &Gradients, floor: f64) -> f64 {
    a.values()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{backward, chain, forward, init_params, mse_loss, Activation, LayerSpec};
    use crate::rng;
    use rand::Rng;

    fn flat(net: &Network) -> Vec<f64> {
        net.layers()
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .copied()
            .collect()
    }

    #[test]
    fn quadratic_loss_gradient_is_params() {
        let net = init_params(&[LayerSpec::new(3, 2, Activation::Relu)], 4).unwrap();
        let g = finite_diff_grad(|n| flat(n).iter().map(|w| w * w).sum::<f64>() / 2.0, &net, 1e-5);
        for (gi, wi) in g.values().zip(flat(&net)) {
            assert!((gi - wi).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_loss_gradient_is_coefficients() {
        let net = init_params(&[LayerSpec::new(2, 2, Activation::Relu)], 4).unwrap();
        let c: Vec<f64> = (0..net.param_count()).map(|i| i as f64 - 2.5).collect();
        let g = finite_diff_grad(
            |n| flat(n).iter().zip(&c).map(|(w, ci)| w * ci).sum::<f64>(),
            &net,
            1e-5,
        );
        for (gi, ci) in g.values().zip(&c) {
            assert!((gi - ci).abs() < 1e-9);
        }
    }

    #[test]
    fn backward_matches_finite_differences_on_mse() {
        let mut r = rng::seeded(11);
        for case in 0..20 {
            let widths = [
                r.random_range(1..=8),
                r.random_range(1..=8),
                r.random_range(1..=8),
            ];
            let net = init_params(&chain(&widths, Activation::Relu, Activation::Sigmoid), case).unwrap();
            let x: Vec<f64> = (0..widths[0]).map(|_| r.random::<f64>()).collect();
            let y: Vec<f64> = (0..widths[2]).map(|_| r.random::<f64>()).collect();
            let loss = |n: &Network| mse_loss(&forward(n, &x).unwrap().activations.last().unwrap().clone(), &y).unwrap().0;
            let trace = forward(&net, &x).unwrap();
            let (_, dl) = mse_loss(trace.output(), &y).unwrap();
            let analytic = backward(&net, &trace, &dl).unwrap().grads;
            // two step sizes must agree with each other and with backprop
            let fd1 = finite_diff_grad(loss, &net, 1e-5);
            let fd2 = finite_diff_grad(loss, &net, 1e-4);
            assert!(max_relative_error(&analytic, &fd1, 1e-6) < 1e-4, "case {case}");
            assert!(max_relative_error(&fd1, &fd2, 1e-6) < 1e-3, "case {case}");
        }
    }
}
