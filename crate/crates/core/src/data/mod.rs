//! Synthetic federated datasets with controllable inter-client shift.

mod features;
mod generate;
pub mod io;

pub use features::{pixel_features, window_features, FeatureCache};
pub use generate::{
    client_weights, make_federation, split_dataset, ClientDataset, ShiftSpec, Split, SplitTag,
};
