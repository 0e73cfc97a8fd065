use serde::{Deserialize, Serialize};

use super::params::{check_finite, ParameterVector};
use crate::error::{input, Error, Result};

/// Poly learning-rate schedule `lr0 * (1 - step/total_steps)^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr0: f64,
    pub total_steps: usize,
    pub power: f64,
}

impl LrSchedule {
    pub fn new(lr0: f64, total_steps: usize, power: f64) -> Self {
        LrSchedule { lr0, total_steps, power }
    }

    pub fn at(&self, step: usize) -> Result<f64> {
        poly_lr(step, self)
    }
}

pub fn poly_lr(step: usize, schedule: &LrSchedule) -> Result<f64> {
    if step > schedule.total_steps {
        return input(format!(
            "step {step} is past the schedule end {}",
            schedule.total_steps
        ));
    }
    if step == schedule.total_steps {
        return Ok(0.0);
    }
    let remaining = 1.0 - step as f64 / schedule.total_steps as f64;
    Ok(schedule.lr0 * remaining.powf(schedule.power))
}

/// Plain SGD update `params - lr * grad`.
pub fn sgd_step(params: &ParameterVector, grad: &ParameterVector, lr: f64) -> Result<ParameterVector> {
    params.ensure_same_layout(grad)?;
    if !(lr >= 0.0) {
        return input("learning rate must be non-negative");
    }
    check_finite(grad.values()).map_err(|e| Error::Numerical(format!("gradient: {e}")))?;
    let mut next = params.clone();
    for (p, g) in next.values_mut().iter_mut().zip(grad.values()) {
        *p -= lr * g;
    }
    check_finite(next.values())?;
    Ok(next)
}
