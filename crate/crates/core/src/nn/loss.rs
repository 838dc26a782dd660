use crate::{Error, Result};

/// Mean squared error and its gradient `2 (pred - target) / n`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "mse over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let mut sum = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let e = p - t;
            sum += e * e;
            2.0 * e / n
        })
        .collect();
    Ok((sum / n, grad))
}
