use crate::error::{input, Result};
use crate::nn::{forward, Batch, ModelSpec, ParameterVector, ProbMap};

/// Mean of the members' probability maps.
pub fn ensemble_predict(spec: &ModelSpec, models: &[ParameterVector], batch: &Batch) -> Result<ProbMap> {
    let Some(first) = models.first() else {
        return input("ensemble needs at least one model");
    };
    for m in &models[1..] {
        first.ensure_same_layout(m).map_err(|e| crate::Error::Input(e.to_string()))?;
    }
    let mut acc = forward(spec, first, batch)?;
    for m in &models[1..] {
        let p = forward(spec, m, batch)?;
        acc.values.iter_mut().zip(&p.values).for_each(|(a, b)| *a += b);
    }
    let k = models.len() as f64;
    acc.values.iter_mut().for_each(|v| *v /= k);
    Ok(acc)
}
