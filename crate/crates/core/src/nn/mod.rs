//! Minimal differentiable model, losses and SGD machinery.

mod gradcheck;
mod model;
mod optim;
mod params;

pub use gradcheck::{finite_diff_grad, finite_diff_grad_fn, max_relative_error};
pub use model::{
    forward, loss, loss_and_grad, segmentation_loss, Batch, ModelSpec, ProbMap, Prox, DICE_SMOOTH,
};
pub use optim::{poly_lr, sgd_step, LrSchedule};
pub use params::{LayerSlot, Layout, ParameterVector};
