use super::model::{loss, Batch, ModelSpec, Prox};
use super::params::ParameterVector;
use crate::error::{input, Result};

/// Central-difference gradient of an arbitrary scalar function of the parameters.
pub fn finite_diff_grad_fn<F>(params: &ParameterVector, eps: f64, mut f: F) -> Result<ParameterVector>
where
    F: FnMut(&ParameterVector) -> Result<f64>,
{
    if !(eps > 0.0) {
        return input("finite-difference step must be positive");
    }
    let mut probe = params.clone();
    let mut grad = vec![0.0; params.len()];
    for (i, g) in grad.iter_mut().enumerate() {
        let orig = params.values()[i];
        probe.values_mut()[i] = orig + eps;
        let up = f(&probe)?;
        probe.values_mut()[i] = orig - eps;
        let down = f(&probe)?;
        probe.values_mut()[i] = orig;
        *g = (up - down) / (2.0 * eps);
    }
    params.with_values(grad)
}

/// Central-difference gradient of the segmentation loss.
pub fn finite_diff_grad(
    spec: &ModelSpec,
    params: &ParameterVector,
    batch: &Batch,
    eps: f64,
    prox: Option<Prox<'_>>,
) -> Result<ParameterVector> {
    finite_diff_grad_fn(params, eps, |p| loss(spec, p, batch, prox))
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over all entries.
pub fn max_relative_error(a: &ParameterVector, b: &ParameterVector, floor: f64) -> Result<f64> {
    a.ensure_same_layout(b)?;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max))
}
