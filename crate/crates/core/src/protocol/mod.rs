//! Server/client round logic, routing, aggregation and the seven training
//! strategies.

mod aggregate;
mod client;
mod config;
mod ensemble;
pub mod events;
mod routing;
mod runner;

pub use aggregate::{aggregate_fedavg, aggregate_fedbn};
pub use client::{epoch_order, local_train, ClientState, LocalOutcome, LocalPlan, PreparedClient};
pub use config::{FederationConfig, Selection, Strategy, MAX_SNAPSHOT_PARAMS};
pub use ensemble::ensemble_predict;
pub use events::{Event, EventKind, Node};
pub use routing::{route_schedule, RouteAssignment};
pub use runner::{run_strategy, RoundRecord, TrainingHistory};
