//! Global loss, descent checks and straight-line loss probes.
//!
//! Landscape CSV columns: `lambda,loss`.

use std::io::Write;

use crate::error::{input, Result};
use crate::nn::{loss, loss_and_grad, ModelSpec, ParameterVector};
use crate::protocol::PreparedClient;

fn check_weights(clients: &[PreparedClient], weights: &[f64]) -> Result<()> {
    if clients.is_empty() || clients.len() != weights.len() {
        return input("one weight per client is required");
    }
    Ok(())
}

/// `L(theta) = sum_k w_k l(theta, D_k)` over the clients' full training splits.
pub fn global_loss(
    spec: &ModelSpec,
    params: &ParameterVector,
    clients: &[PreparedClient],
    weights: &[f64],
) -> Result<f64> {
    check_weights(clients, weights)?;
    clients.iter().zip(weights).try_fold(0.0, |acc, (c, &w)| {
        let batch = c.cache.batch(&c.train)?;
        Ok(acc + w * loss(spec, params, &batch, None)?)
    })
}

/// Full-batch gradient of [`global_loss`].
pub fn global_gradient(
    spec: &ModelSpec,
    params: &ParameterVector,
    clients: &[PreparedClient],
    weights: &[f64],
) -> Result<ParameterVector> {
    check_weights(clients, weights)?;
    let mut total = ParameterVector::zeros(params.layout().clone());
    for (c, &w) in clients.iter().zip(weights) {
        let batch = c.cache.batch(&c.train)?;
        let (_, g) = loss_and_grad(spec, params, &batch, None)?;
        total = total.axpy(w, &g)?;
    }
    Ok(total)
}

/// Inner product of `direction` with the global gradient at `initial`.
/// A subtracted direction decreases the loss to first order iff the product
/// is positive.
pub fn descent_check(
    spec: &ModelSpec,
    direction: &ParameterVector,
    initial: &ParameterVector,
    clients: &[PreparedClient],
    weights: &[f64],
) -> Result<(f64, bool)> {
    direction.ensure_same_layout(initial)?;
    let grad = global_gradient(spec, initial, clients, weights)?;
    let inner = direction.dot(&grad)?;
    Ok((inner, inner > 0.0))
}

/// Loss along `(1 - l) a + l b` at `n` evenly spaced `l` in [0, 1].
pub fn loss_landscape_line(
    spec: &ModelSpec,
    a: &ParameterVector,
    b: &ParameterVector,
    clients: &[PreparedClient],
    weights: &[f64],
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return input("need at least two points on the line");
    }
    a.ensure_same_layout(b).map_err(|e| crate::Error::Input(e.to_string()))?;
    (0..n)
        .map(|i| {
            let lambda = i as f64 / (n - 1) as f64;
            let values = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (1.0 - lambda) * x + lambda * y)
                .collect();
            let point = a.with_values(values)?;
            Ok((lambda, global_loss(spec, &point, clients, weights)?))
        })
        .collect()
}

pub fn write_landscape_csv<W: Write>(curve: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "loss"])?;
    for (l, v) in curve {
        w.write_record([l.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
