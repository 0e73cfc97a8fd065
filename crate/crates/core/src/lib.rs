//! Deterministic federated-learning simulator.
//!
//! The crate trains a small per-pixel segmentation network on synthetic,
//! non-iid client datasets under seven training strategies (localized,
//! centralized, FedAvg, FedProx, FedBN, FedCross and FedCrossEns) and
//! provides tooling to inspect why parameter averaging struggles on
//! heterogeneous clients:
//!
//! * [`nn`]: flat parameter vectors, a per-pixel MLP, CE + soft-Dice loss with
//!   exact gradients, SGD and the poly learning-rate schedule.
//! * [`data`]: synthetic federations with per-client intensity/shape shift.
//! * [`protocol`]: client/server round logic, routing and aggregation.
//! * [`analysis`]: unrolled-update decomposition, descent checks and
//!   loss-landscape probes.
//! * [`metrics`]: DSC, ASD, client-balanced averages, paired t-tests and
//!   ensemble uncertainty maps.
//! * [`experiment`]: config-driven comparison and local-epoch sweeps with CSV
//!   reports.

pub mod analysis;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod protocol;
pub(crate) mod seed;

pub use error::{Error, Result};
