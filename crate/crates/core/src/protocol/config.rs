use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::window_features;
use crate::error::{config, Error, Result};
use crate::nn::ModelSpec;

/// The seven training strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    Localized,
    Centralized,
    FedAvg,
    FedProx,
    FedBn,
    FedCross,
    FedCrossEns,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Localized,
        Strategy::Centralized,
        Strategy::FedAvg,
        Strategy::FedProx,
        Strategy::FedBn,
        Strategy::FedCross,
        Strategy::FedCrossEns,
    ];

    /// Strategies compared in the local-epoch sweep.
    pub const SWEEP: [Strategy; 4] =
        [Strategy::FedAvg, Strategy::FedProx, Strategy::FedBn, Strategy::FedCross];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Localized => "LOCALIZED",
            Strategy::Centralized => "CENTRALIZED",
            Strategy::FedAvg => "FEDAVG",
            Strategy::FedProx => "FEDPROX",
            Strategy::FedBn => "FEDBN",
            Strategy::FedCross => "FEDCROSS",
            Strategy::FedCrossEns => "FEDCROSS_ENS",
        }
    }

    pub fn aggregates(self) -> bool {
        matches!(self, Strategy::FedAvg | Strategy::FedProx | Strategy::FedBn)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.name().to_string()
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm || st.name().replace('_', "") == norm)
            .ok_or_else(|| Error::Config(format!("unknown strategy '{s}'")))
    }
}

/// How FedCross picks the active client of each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Independent uniform draw every round.
    #[default]
    Uniform,
    /// Shuffled cycles: every client is visited once before any repeats.
    Cycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub clients: usize,
    /// Total number of epochs each data source is trained for.
    pub budget: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_power: f64,
    pub strategy: Strategy,
    pub prox_mu: f64,
    pub selection: Selection,
    pub seed: u64,
    /// Keep per-round parameter snapshots and local SGD traces.
    pub snapshot: bool,
    pub model: ModelSpec,
    pub window_radius: usize,
}

/// Snapshots keep every local step, so they are limited to small models.
pub const MAX_SNAPSHOT_PARAMS: usize = 100_000;

impl FederationConfig {
    pub fn desk(strategy: Strategy, seed: u64) -> Self {
        FederationConfig {
            clients: 4,
            budget: 64,
            local_epochs: 1,
            batch_size: 4,
            lr0: 0.02,
            lr_power: 0.9,
            strategy,
            prox_mu: if strategy == Strategy::FedProx { 0.01 } else { 0.0 },
            selection: Selection::Uniform,
            seed,
            snapshot: false,
            model: ModelSpec::reference(window_features(1)),
            window_radius: 1,
        }
    }

    pub fn rounds(&self) -> usize {
        self.budget / self.local_epochs.max(1)
    }

    /// Hard errors for invalid settings; returns soft warnings otherwise.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.clients == 0 {
            return config("at least one client is required");
        }
        if self.local_epochs == 0 || self.budget == 0 {
            return config("budget and local epochs must be positive");
        }
        if self.budget % self.local_epochs != 0 {
            return config(format!(
                "epoch budget {} is not divisible by {} local epochs",
                self.budget, self.local_epochs
            ));
        }
        if self.batch_size == 0 {
            return config("batch size must be positive");
        }
        if !(self.lr0 >= 0.0) || !self.lr0.is_finite() || !(self.lr_power > 0.0) {
            return config("learning-rate settings must be finite, lr0 >= 0 and power > 0");
        }
        if !(self.prox_mu >= 0.0) || !self.prox_mu.is_finite() {
            return config("proximal weight must be finite and non-negative");
        }
        self.model.validate()?;
        if self.model.input_dim != window_features(self.window_radius) {
            return config(format!(
                "model expects {} inputs but a radius-{} window yields {}",
                self.model.input_dim,
                self.window_radius,
                window_features(self.window_radius)
            ));
        }
        if self.snapshot && self.model.layout().len() > MAX_SNAPSHOT_PARAMS {
            return config("snapshots are limited to models with at most 1e5 parameters");
        }
        let mut warnings = Vec::new();
        if self.prox_mu != 0.0 && self.strategy != Strategy::FedProx {
            warnings.push(format!(
                "prox_mu = {} is ignored by strategy {}",
                self.prox_mu, self.strategy
            ));
        }
        if self.selection != Selection::Uniform && self.strategy != Strategy::FedCross {
            warnings.push(format!("client selection mode is ignored by strategy {}", self.strategy));
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_parse() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("fedcross-ens".parse::<Strategy>().unwrap(), Strategy::FedCrossEns);
        assert_eq!("FedBN".parse::<Strategy>().unwrap(), Strategy::FedBn);
        assert!("fedsgd".parse::<Strategy>().is_err());
    }

    #[test]
    fn budget_must_divide() {
        let mut c = FederationConfig::desk(Strategy::FedAvg, 0);
        c.budget = 40;
        c.local_epochs = 16;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.local_epochs = 40;
        assert_eq!(c.rounds(), 1);
        assert!(c.validate().unwrap().is_empty());
    }

    #[test]
    fn stray_prox_weight_warns() {
        let mut c = FederationConfig::desk(Strategy::FedAvg, 0);
        c.prox_mu = 0.1;
        assert_eq!(c.validate().unwrap().len(), 1);
    }
}
