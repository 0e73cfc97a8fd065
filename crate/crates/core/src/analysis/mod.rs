//! Numerical checks of why parameter averaging struggles on non-iid clients:
//! the unrolled round decomposition, descent-direction tests and
//! straight-line loss probes between models.

mod decompose;
mod landscape;
mod trace;

pub use decompose::{eq4_decompose, DecompositionReport};
pub use landscape::{
    descent_check, global_gradient, global_loss, loss_landscape_line, write_landscape_csv,
};
pub use trace::{LocalTrace, TraceStep};
