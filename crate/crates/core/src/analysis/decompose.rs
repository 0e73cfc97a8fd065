//! Unrolled decomposition of one aggregation round.
//!
//! Writing the local updates `theta_k^{j+1} = theta_k^j - a_j g_k^j` into the
//! weighted average and telescoping gives
//!
//! ```text
//! theta' = theta - sum_k w_k a_1 g_k^1 - sum_k w_k sum_{j>=2} a_j g_k^j
//! ```
//!
//! The middle term is the (stochastic) global gradient step taken at the
//! broadcast point; the last term is evaluated at drifted client iterates.
//!
//! CSV exports:
//! * per-parameter: `index,layer,initial,term2,term3,reconstructed,direct`
//! * summary: `key,value` with `clients`, `local_steps`, `residual_norm`,
//!   `relative_residual`, `term3_descent_cosine` (empty if not computed).

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::trace::LocalTrace;
use crate::error::{input, Result};
use crate::nn::ParameterVector;
use crate::protocol::aggregate_fedavg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub term1: ParameterVector,
    pub term2: ParameterVector,
    pub term3: ParameterVector,
    pub reconstructed: ParameterVector,
    /// Weighted average of the clients' final parameters.
    pub direct: ParameterVector,
    pub residual_norm: f64,
    pub local_steps: usize,
    /// Cosine between `term3` and the global gradient at `term1`, once attached.
    pub term3_descent_cosine: Option<f64>,
}

impl DecompositionReport {
    pub fn relative_residual(&self) -> f64 {
        let scale = self.direct.norm();
        if scale == 0.0 {
            self.residual_norm
        } else {
            self.residual_norm / scale
        }
    }

    /// Records the cosine between `term3` and `global_grad`.
    pub fn attach_descent(&mut self, global_grad: &ParameterVector) -> Result<f64> {
        let dot = self.term3.dot(global_grad)?;
        let denom = self.term3.norm() * global_grad.norm();
        let cos = if denom == 0.0 { 0.0 } else { dot / denom };
        self.term3_descent_cosine = Some(cos);
        Ok(cos)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "layer", "initial", "term2", "term3", "reconstructed", "direct"])?;
        for slot in self.term1.layout().slots() {
            for i in slot.range() {
                w.write_record([
                    i.to_string(),
                    slot.name.clone(),
                    self.term1.values()[i].to_string(),
                    self.term2.values()[i].to_string(),
                    self.term3.values()[i].to_string(),
                    self.reconstructed.values()[i].to_string(),
                    self.direct.values()[i].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, clients: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "value"])?;
        w.write_record(["clients", &clients.to_string()])?;
        w.write_record(["local_steps", &self.local_steps.to_string()])?;
        w.write_record(["residual_norm", &self.residual_norm.to_string()])?;
        w.write_record(["relative_residual", &self.relative_residual().to_string()])?;
        let cos = self.term3_descent_cosine.map(|c| c.to_string()).unwrap_or_default();
        w.write_record(["term3_descent_cosine", &cos])?;
        w.flush()?;
        Ok(())
    }
}

/// Neumaier-compensated elementwise accumulator.
struct Accumulator {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator { sum: vec![0.0; n], comp: vec![0.0; n] }
    }

    fn add_scaled(&mut self, scale: f64, v: &[f64]) {
        for ((s, c), x) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(v) {
            let term = scale * x;
            let t = *s + term;
            *c += if s.abs() >= term.abs() { (*s - t) + term } else { (term - t) + *s };
            *s = t;
        }
    }

    fn finish(self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}

/// Splits one aggregation round into its initial point, first-step term and
/// drift term, and checks the reconstruction against direct averaging.
pub fn eq4_decompose(
    initial: &ParameterVector,
    traces: &[LocalTrace],
    weights: &[f64],
) -> Result<DecompositionReport> {
    if traces.is_empty() {
        return input("no traces to decompose");
    }
    if traces.len() != weights.len() {
        return input("one weight per trace is required");
    }
    let j = traces[0].len();
    if j == 0 {
        return input("traces must contain at least one step");
    }
    for t in traces {
        if t.len() != j {
            return input(format!(
                "inconsistent trace lengths: client {} has {} steps, expected {j}",
                t.client_id,
                t.len()
            ));
        }
        initial.ensure_same_layout(&t.final_params).map_err(|e| crate::Error::Input(e.to_string()))?;
        if t.initial() != initial {
            return input(format!("trace of client {} does not start at the broadcast parameters", t.client_id));
        }
    }
    let n = initial.len();
    let mut term2 = Accumulator::new(n);
    let mut term3 = Accumulator::new(n);
    for (t, &w) in traces.iter().zip(weights) {
        let first = &t.steps[0];
        term2.add_scaled(w * first.lr, first.grad.values());
        for step in &t.steps[1..] {
            term3.add_scaled(w * step.lr, step.grad.values());
        }
    }
    let term2 = initial.with_values(term2.finish())?;
    let term3 = initial.with_values(term3.finish())?;
    let reconstructed = initial.sub(&term2)?.sub(&term3)?;
    let finals: Vec<ParameterVector> = traces.iter().map(|t| t.final_params.clone()).collect();
    let direct = aggregate_fedavg(&finals, weights)?;
    let residual_norm = reconstructed.sub(&direct)?.norm();
    Ok(DecompositionReport {
        term1: initial.clone(),
        term2,
        term3,
        reconstructed,
        direct,
        residual_norm,
        local_steps: j,
        term3_descent_cosine: None,
    })
}
