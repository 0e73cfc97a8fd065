//! Config-driven experiments.

mod eval;
mod plan;
mod run;

pub use eval::{client_models, evaluate_history, test_uncertainty, SPACING};
pub use plan::{
    AnalysisSection, ExperimentPlan, FederationSection, OutputSection, ShiftPreset, StrategySection, SweepSection,
    TrainingSection,
};
pub use run::{
    analysis_federation, run_comparison, run_epoch_sweep, run_eq4, run_landscape, CellResult, ComparisonOutcome,
    Degradation, Eq4Round, LandscapeOutcome, SweepOutcome, SweepPoint,
};
