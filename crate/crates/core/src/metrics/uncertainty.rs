use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::nn::{forward, Batch, ModelSpec, ParameterVector};

/// Per-pixel population standard deviation of ensemble foreground probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl UncertaintyMap {
    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Grid CSV: one line per image row, no header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for row in self.values.chunks(self.width) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One uncertainty map per sample in `batch`; each sample is a `height x width` image.
pub fn uncertainty_map(
    spec: &ModelSpec,
    models: &[ParameterVector],
    batch: &Batch,
    height: usize,
    width: usize,
) -> Result<Vec<UncertaintyMap>> {
    if models.len() < 2 {
        return input("uncertainty needs at least two models");
    }
    if height * width != batch.pixels {
        return input("grid size does not match the batch pixel count");
    }
    let rows = batch.rows();
    // Welford update over ensemble members
    let mut mean = vec![0.0; rows];
    let mut m2 = vec![0.0; rows];
    for (i, m) in models.iter().enumerate() {
        let fg = forward(spec, m, batch)?.foreground();
        let n = (i + 1) as f64;
        for ((mu, s), x) in mean.iter_mut().zip(m2.iter_mut()).zip(fg) {
            let delta = x - *mu;
            *mu += delta / n;
            *s += delta * (x - *mu);
        }
    }
    let k = models.len() as f64;
    let std: Vec<f64> = m2.iter().map(|s| (s.max(0.0) / k).sqrt()).collect();
    Ok(std
        .chunks(batch.pixels)
        .map(|c| UncertaintyMap { height, width, values: c.to_vec() })
        .collect())
}
