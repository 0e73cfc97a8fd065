//! Experiment configuration.
//!
//! A plan is one TOML document with five sections plus an optional
//! `[analysis]` block; every key has a desk-scale default:
//!
//! ```toml
//! [federation]
//! sizes = [19, 48, 30, 61]      # samples per client (split 60/10/30)
//! image_size = 16
//! preset = "strongly_non_iid"   # "strongly_non_iid" | "iid" | "custom"
//! noise_sd = 1.0
//! # shifts = [{ offset = 0.0, scale = 1.0, shape = 1.0, noise_sd = 1.0 }, ...]
//! # data_seed = 7               # fixed federation; default: one per run seed
//! # data_file = "federation.csv"
//!
//! [training]
//! budget = 64                   # epochs per data source
//! local_epochs = 1
//! batch_size = 4
//! lr0 = 0.02
//! lr_power = 0.9
//! hidden = [16, 16]
//! norm_positions = [0]
//! window_radius = 1
//! seeds = [1, 2, 3, 4, 5]
//!
//! [strategy]
//! list = ["LOCALIZED", "CENTRALIZED", "FEDAVG", "FEDPROX", "FEDBN", "FEDCROSS", "FEDCROSS_ENS"]
//! prox_mu = 0.01
//! selection = "uniform"         # FedCross client choice: "uniform" | "cycle"
//!
//! [sweep]
//! local_epochs = [1, 2, 4, 8, 16]
//! strategies = ["FEDAVG", "FEDPROX", "FEDBN", "FEDCROSS"]
//!
//! [output]
//! dir = "out"
//! snapshot = false
//!
//! [analysis]
//! client_size = 20              # equal sizes keep local step counts equal
//! local_epochs = 2
//! landscape_points = 21
//! landscape_epochs = 300 
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{io::read_federation, make_federation, window_features, ClientDataset, ShiftSpec};
use crate::error::{config, Result};
use crate::nn::ModelSpec;
use crate::protocol::{FederationConfig, Selection, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPreset {
    StronglyNonIid,
    Iid,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationSection {
    pub sizes: Vec<usize>,
    pub image_size: usize,
    pub preset: ShiftPreset,
    pub noise_sd: f64,
    pub shifts: Vec<ShiftSpec>,
    pub data_seed: Option<u64>,
    pub data_file: Option<PathBuf>,
}

impl Default for FederationSection {
    fn default() -> Self {
        FederationSection {
            sizes: vec![19, 48, 30, 61],
            image_size: 16,
            preset: ShiftPreset::StronglyNonIid,
            noise_sd: 1.0,
            shifts: vec![],
            data_seed: None,
            data_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub budget: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_power: f64,
    pub hidden: Vec<usize>,
    pub norm_positions: Vec<usize>,
    pub window_radius: usize,
    pub seeds: Vec<u64>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let desk = FederationConfig::desk(Strategy::FedAvg, 0);
        TrainingSection {
            budget: desk.budget,
            local_epochs: desk.local_epochs,
            batch_size: desk.batch_size,
            lr0: desk.lr0,
            lr_power: desk.lr_power,
            hidden: desk.model.hidden.clone(),
            norm_positions: desk.model.norm_positions.clone(),
            window_radius: desk.window_radius,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategySection {
    pub list: Vec<Strategy>,
    pub prox_mu: f64,
    pub selection: Selection,
}

impl Default for StrategySection {
    fn default() -> Self {
        StrategySection { list: Strategy::ALL.to_vec(), prox_mu: 0.01, selection: Selection::Uniform }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub local_epochs: Vec<usize>,
    pub strategies: Vec<Strategy>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { local_epochs: vec![1, 2, 4, 8, 16], strategies: Strategy::SWEEP.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub snapshot: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), snapshot: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub client_size: usize,
    pub local_epochs: usize,
    pub landscape_points: usize,
    pub landscape_epochs: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection { client_size: 20, local_epochs: 2, landscape_points: 21, landscape_epochs: 300 }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub federation: FederationSection,
    pub training: TrainingSection,
    pub strategy: StrategySection,
    pub sweep: SweepSection,
    pub output: OutputSection,
    pub analysis: AnalysisSection,
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = toml::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut plan = ExperimentPlan::from_toml(&text)?;
        // relative data files resolve against the config's directory
        if let (Some(file), Some(dir)) = (&plan.federation.data_file, path.parent()) {
            if file.is_relative() {
                plan.federation.data_file = Some(dir.join(file));
            }
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategy.list.is_empty() {
            return config("strategy.list must not be empty");
        }
        if self.training.seeds.is_empty() {
            return config("training.seeds must not be empty");
        }
        let distinct: HashSet<u64> = self.training.seeds.iter().copied().collect();
        if distinct.len() != self.training.seeds.len() {
            return config("training.seeds must be distinct");
        }
        if self.federation.sizes.is_empty() && self.federation.data_file.is_none() {
            return config("federation.sizes must not be empty");
        }
        if self.federation.preset == ShiftPreset::Custom
            && self.federation.shifts.len() != self.federation.sizes.len()
        {
            return config("custom preset needs one shift per client");
        }
        Ok(())
    }

    pub fn clients(&self) -> usize {
        self.federation.sizes.len()
    }

    pub fn shifts(&self) -> Vec<ShiftSpec> {
        let k = self.clients();
        let mut shifts = match self.federation.preset {
            ShiftPreset::StronglyNonIid => ShiftSpec::strongly_non_iid(k),
            ShiftPreset::Iid => ShiftSpec::iid(k),
            ShiftPreset::Custom => return self.federation.shifts.clone(),
        };
        shifts.iter_mut().for_each(|s| s.noise_sd = self.federation.noise_sd);
        shifts
    }

    /// The federation used with run seed `seed`.
    pub fn federation(&self, seed: u64) -> Result<Vec<ClientDataset>> {
        if let Some(path) = &self.federation.data_file {
            return read_federation(std::fs::File::open(path)?);
        }
        let size = self.federation.image_size;
        let data_seed = self.federation.data_seed.unwrap_or(seed);
        make_federation(&self.federation.sizes, &self.shifts(), size, size, data_seed)
    }

    pub fn model(&self) -> ModelSpec {
        ModelSpec {
            input_dim: window_features(self.training.window_radius),
            hidden: self.training.hidden.clone(),
            classes: 2,
            norm_positions: self.training.norm_positions.clone(),
        }
    }

    /// Federation config of one (strategy, seed, local epochs) cell.
    pub fn config(&self, strategy: Strategy, seed: u64, local_epochs: usize, clients: usize) -> FederationConfig {
        FederationConfig {
            clients,
            budget: self.training.budget,
            local_epochs,
            batch_size: self.training.batch_size,
            lr0: self.training.lr0,
            lr_power: self.training.lr_power,
            strategy,
            prox_mu: if strategy == Strategy::FedProx { self.strategy.prox_mu } else { 0.0 },
            selection: if strategy == Strategy::FedCross { self.strategy.selection } else { Selection::Uniform },
            seed,
            snapshot: self.output.snapshot,
            model: self.model(),
            window_radius: self.training.window_radius,
        }
    }
}
