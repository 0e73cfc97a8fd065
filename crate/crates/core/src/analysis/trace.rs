use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::nn::ParameterVector;

/// One local SGD step: parameters before the step, step size and gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub params: ParameterVector,
    pub lr: f64,
    pub grad: ParameterVector,
}

/// Full record of one client's local training in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTrace {
    pub client_id: usize,
    pub steps: Vec<TraceStep>,
    /// Parameters after the last step.
    pub final_params: ParameterVector,
}

impl LocalTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn initial(&self) -> &ParameterVector {
        self.steps.first().map(|s| &s.params).unwrap_or(&self.final_params)
    }

    /// Largest deviation from `next = params - lr * grad` along the trace.
    pub fn self_consistency_error(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, step) in self.steps.iter().enumerate() {
            let next = self.steps.get(i + 1).map(|s| &s.params).unwrap_or(&self.final_params);
            let predicted = step.params.axpy(-step.lr, &step.grad)?;
            worst = worst.max(predicted.max_abs_diff(next)?);
        }
        Ok(worst)
    }

    pub fn check_consistent(&self, tol: f64) -> Result<()> {
        let err = self.self_consistency_error()?;
        if err > tol {
            return input(format!("trace of client {} is inconsistent by {err:e}", self.client_id));
        }
        Ok(())
    }
}
