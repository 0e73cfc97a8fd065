//! Experiment drivers and their CSV reports.
//!
//! `run_comparison` writes into the output directory:
//! * `comparison.csv`: `seed,method`, then per client `k`
//!   `client<k>_dsc_mean,client<k>_dsc_sd,client<k>_asd_mean,client<k>_asd_missing`,
//!   then `global_dsc,global_asd`. DSC is a fraction in [0, 1]; an empty ASD
//!   cell means some prediction was empty.
//! * `ttests.csv`: `seed,method_a,method_b,scope,p_value` against FEDCROSS_ENS,
//!   pooled over all cases and per client.
//! * `uncertainty.csv`: `seed,client,case,mean,max` for FEDCROSS_ENS, plus one
//!   `uncertainty_seed<s>_client<k>.csv` grid of each client's first test case.
//! * `events/<method>_seed<s>.csv`: message log (see `protocol::events`).
//!
//! `run_epoch_sweep` writes `sweep.csv`
//! (`seed,strategy,local_epochs,rounds,global_dsc,centralized_dsc`) and
//! `degradation.csv` (`seed,strategy,e_first,e_last,delta`), where
//! `delta = dsc(e_first) - dsc(e_last)`.
//!
//! `run_eq4` writes `eq4_rounds.csv`
//! (`round,local_steps,residual_norm,relative_residual,term3_inner,term3_cosine,term3_is_descent`)
//! and the per-parameter `eq4_round0.csv` plus `eq4_round0_summary.csv`.
//!
//! `run_landscape` writes `landscape.csv` (`lambda,loss`).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate_history, test_uncertainty};
use super::plan::{ExperimentPlan, ShiftPreset};
use crate::analysis::{descent_check, eq4_decompose, loss_landscape_line, write_landscape_csv, DecompositionReport};
use crate::data::{client_weights, make_federation, ClientDataset, ShiftSpec};
use crate::error::{config, Result};
use crate::metrics::{EvalReport, TTestResult};
use crate::protocol::events::write_events;
use crate::protocol::{run_strategy, PreparedClient, Strategy, TrainingHistory};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Evaluation of one (seed, strategy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub seed: u64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    /// Plan order: seeds outer, strategies inner.
    pub cells: Vec<CellResult>,
    pub ttests: Vec<(u64, TTestResult)>,
}

impl ComparisonOutcome {
    pub fn global_dsc(&self, seed: u64, strategy: Strategy) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.seed == seed && c.report.method == strategy.name())
            .map(|c| c.report.global_dsc)
    }
}

fn train_and_eval(
    plan: &ExperimentPlan,
    federation: &[ClientDataset],
    strategy: Strategy,
    seed: u64,
    local_epochs: usize,
) -> Result<(TrainingHistory, EvalReport)> {
    let cfg = plan.config(strategy, seed, local_epochs, federation.len());
    let history = run_strategy(&cfg, federation)?;
    let report = evaluate_history(&cfg.model, &history, federation, cfg.window_radius)?;
    Ok((history, report))
}

/// Trains every strategy of the plan for every seed at `training.local_epochs`
/// and writes the comparison reports.
pub fn run_comparison(plan: &ExperimentPlan) -> Result<ComparisonOutcome> {
    let dir = &plan.output.dir;
    fs::create_dir_all(dir.join("events"))?;
    let e = plan.training.local_epochs;
    let federations: Vec<Vec<ClientDataset>> =
        plan.training.seeds.iter().map(|&s| plan.federation(s)).collect::<Result<_>>()?;
    let cells: Vec<(usize, Strategy)> = (0..federations.len())
        .flat_map(|i| plan.strategy.list.iter().map(move |&st| (i, st)))
        .collect();
    let results: Vec<(TrainingHistory, EvalReport)> = cells
        .par_iter()
        .map(|&(i, st)| train_and_eval(plan, &federations[i], st, plan.training.seeds[i], e))
        .collect::<Result<_>>()?;

    let mut outcome = ComparisonOutcome { cells: vec![], ttests: vec![] };
    let clients = federations[0].len();
    let mut table = csv::Writer::from_writer(create(dir, "comparison.csv")?);
    let mut header = vec!["seed".to_string(), "method".to_string()];
    for k in 0..clients {
        for col in ["dsc_mean", "dsc_sd", "asd_mean", "asd_missing"] {
            header.push(format!("client{k}_{col}"));
        }
    }
    header.extend(["global_dsc".to_string(), "global_asd".to_string()]);
    table.write_record(&header)?;

    let mut unc = csv::Writer::from_writer(create(dir, "uncertainty.csv")?);
    unc.write_record(["seed", "client", "case", "mean", "max"])?;
    let model = plan.model();

    for (&(i, st), (history, report)) in cells.iter().zip(&results) {
        let seed = plan.training.seeds[i];
        let mut row = vec![seed.to_string(), report.method.clone()];
        for c in &report.per_client {
            row.push(c.mean_dsc.to_string());
            row.push(c.sd_dsc.to_string());
            row.push(opt(c.mean_asd));
            row.push(c.asd_missing.to_string());
        }
        row.push(report.global_dsc.to_string());
        row.push(opt(report.global_asd));
        table.write_record(&row)?;

        let name = format!("{}_seed{seed}.csv", st.name().to_ascii_lowercase());
        write_events(&history.events, create(&dir.join("events"), &name)?)?;

        if st == Strategy::FedCrossEns && history.final_params.len() >= 2 {
            let maps = test_uncertainty(&model, &history.final_params, &federations[i], plan.training.window_radius)?;
            for (k, client_maps) in maps.iter().enumerate() {
                for (case, m) in client_maps.iter().enumerate() {
                    unc.write_record([seed.to_string(), k.to_string(), case.to_string(), m.mean().to_string(), m.max().to_string()])?;
                }
                if let Some(first) = client_maps.first() {
                    first.write_csv(create(dir, &format!("uncertainty_seed{seed}_client{k}.csv"))?)?;
                }
            }
        }
    }
    table.flush()?;
    unc.flush()?;

    let mut tt = csv::Writer::from_writer(create(dir, "ttests.csv")?);
    tt.write_record(["seed", "method_a", "method_b", "scope", "p_value"])?;
    for (i, &seed) in plan.training.seeds.iter().enumerate() {
        let of_seed: Vec<&(TrainingHistory, EvalReport)> =
            cells.iter().zip(&results).filter(|((ci, _), _)| *ci == i).map(|(_, r)| r).collect();
        let reference = of_seed.iter().find(|(h, _)| h.strategy == Strategy::FedCrossEns).map(|(_, r)| r.clone());
        for (h, r) in &of_seed {
            let mut report = r.clone();
            if let Some(reference) = &reference {
                if h.strategy != Strategy::FedCrossEns {
                    report.ttests = report.compare_with(reference)?;
                    for t in &report.ttests {
                        tt.write_record([seed.to_string(), t.method_a.clone(), t.method_b.clone(), t.scope.clone(), opt(t.p_value)])?;
                        outcome.ttests.push((seed, t.clone()));
                    }
                }
            }
            outcome.cells.push(CellResult { seed, report });
        }
    }
    tt.flush()?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub seed: u64,
    pub strategy: Strategy,
    pub local_epochs: usize,
    pub rounds: usize,
    pub global_dsc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub seed: u64,
    pub strategy: Strategy,
    pub e_first: usize,
    pub e_last: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    /// Centralized reference DSC per seed.
    pub centralized: Vec<(u64, f64)>,
    pub degradation: Vec<Degradation>,
}

impl SweepOutcome {
    pub fn delta(&self, seed: u64, strategy: Strategy) -> Option<f64> {
        self.degradation.iter().find(|d| d.seed == seed && d.strategy == strategy).map(|d| d.delta)
    }
}

/// Trains each sweep strategy with every local-epoch count at a fixed budget.
pub fn run_epoch_sweep(plan: &ExperimentPlan) -> Result<SweepOutcome> {
    let e_list = &plan.sweep.local_epochs;
    if e_list.is_empty() || plan.sweep.strategies.is_empty() {
        return config("sweep needs at least one local-epoch value and one strategy");
    }
    for &e in e_list {
        if e == 0 || plan.training.budget % e != 0 {
            return config(format!("epoch budget {} is not divisible by {e} local epochs", plan.training.budget));
        }
    }
    let dir = &plan.output.dir;
    fs::create_dir_all(dir)?;
    let seeds = &plan.training.seeds;
    let federations: Vec<Vec<ClientDataset>> = seeds.iter().map(|&s| plan.federation(s)).collect::<Result<_>>()?;

    // `None` strategy slot marks the centralized reference
    let mut cells: Vec<(usize, Option<Strategy>, usize)> = Vec::new();
    for i in 0..seeds.len() {
        cells.push((i, None, e_list[0]));
        for &st in &plan.sweep.strategies {
            for &e in e_list {
                cells.push((i, Some(st), e));
            }
        }
    }
    let dscs: Vec<f64> = cells
        .par_iter()
        .map(|&(i, st, e)| {
            let st = st.unwrap_or(Strategy::Centralized);
            Ok(train_and_eval(plan, &federations[i], st, seeds[i], e)?.1.global_dsc)
        })
        .collect::<Result<_>>()?;

    let mut outcome = SweepOutcome { points: vec![], centralized: vec![], degradation: vec![] };
    for (&(i, st, e), &dsc) in cells.iter().zip(&dscs) {
        match st {
            None => outcome.centralized.push((seeds[i], dsc)),
            Some(strategy) => outcome.points.push(SweepPoint {
                seed: seeds[i],
                strategy,
                local_epochs: e,
                rounds: plan.training.budget / e,
                global_dsc: dsc,
            }),
        }
    }
    let (e_first, e_last) = (e_list[0], e_list[e_list.len() - 1]);
    for &seed in seeds {
        for &strategy in &plan.sweep.strategies {
            let at = |e: usize| {
                outcome
                    .points
                    .iter()
                    .find(|p| p.seed == seed && p.strategy == strategy && p.local_epochs == e)
                    .map(|p| p.global_dsc)
                    .unwrap_or(f64::NAN)
            };
            outcome.degradation.push(Degradation { seed, strategy, e_first, e_last, delta: at(e_first) - at(e_last) });
        }
    }

    let mut w = csv::Writer::from_writer(create(dir, "sweep.csv")?);
    w.write_record(["seed", "strategy", "local_epochs", "rounds", "global_dsc", "centralized_dsc"])?;
    for p in &outcome.points {
        let central = outcome.centralized.iter().find(|(s, _)| *s == p.seed).map(|(_, d)| *d);
        w.write_record([
            p.seed.to_string(),
            p.strategy.name().to_string(),
            p.local_epochs.to_string(),
            p.rounds.to_string(),
            p.global_dsc.to_string(),
            opt(central),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(create(dir, "degradation.csv")?);
    w.write_record(["seed", "strategy", "e_first", "e_last", "delta"])?;
    for d in &outcome.degradation {
        w.write_record([d.seed.to_string(), d.strategy.name().to_string(), d.e_first.to_string(), d.e_last.to_string(), d.delta.to_string()])?;
    }
    w.flush()?;
    Ok(outcome)
}

/// One decomposed aggregation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eq4Round {
    pub round: usize,
    pub report: DecompositionReport,
    /// `<term3, grad L(theta)>`; positive means the subtracted term descends.
    pub term3_inner: f64,
    pub term3_is_descent: bool,
}

/// Equal-size federation for the analysis runs: `clients` clients with
/// `analysis.client_size` samples each, so every client takes the same number
/// of local steps.
pub fn analysis_federation(plan: &ExperimentPlan, clients: usize, seed: u64) -> Result<Vec<ClientDataset>> {
    let shifts = match plan.federation.preset {
        ShiftPreset::Iid => ShiftSpec::iid(clients),
        _ => ShiftSpec::strongly_non_iid(clients),
    };
    let shifts: Vec<ShiftSpec> = shifts.into_iter().map(|s| ShiftSpec { noise_sd: plan.federation.noise_sd, ..s }).collect();
    let size = plan.federation.image_size;
    let data_seed = plan.federation.data_seed.unwrap_or(seed);
    make_federation(&vec![plan.analysis.client_size; clients], &shifts, size, size, data_seed)
}

/// FedAvg with traces enabled; decomposes every round.
pub fn run_eq4(plan: &ExperimentPlan, seed: u64, out: Option<&Path>) -> Result<Vec<Eq4Round>> {
    let federation = analysis_federation(plan, plan.clients(), seed)?;
    let mut cfg = plan.config(Strategy::FedAvg, seed, plan.analysis.local_epochs, federation.len());
    cfg.snapshot = true;
    let history = run_strategy(&cfg, &federation)?;
    let prepared: Vec<PreparedClient> = federation.iter().map(|d| PreparedClient::new(d, cfg.window_radius)).collect();
    let weights = client_weights(&prepared.iter().map(|c| c.train.len()).collect::<Vec<_>>())?;

    let rounds = history
        .records
        .iter()
        .map(|rec| {
            let initial = rec.traces[0].initial().clone();
            let mut report = eq4_decompose(&initial, &rec.traces, &weights)?;
            let (inner, is_descent) = descent_check(&cfg.model, &report.term3, &initial, &prepared, &weights)?;
            let grad = crate::analysis::global_gradient(&cfg.model, &initial, &prepared, &weights)?;
            report.attach_descent(&grad)?;
            Ok(Eq4Round { round: rec.round, report, term3_inner: inner, term3_is_descent: is_descent })
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_writer(create(dir, "eq4_rounds.csv")?);
        w.write_record(["round", "local_steps", "residual_norm", "relative_residual", "term3_inner", "term3_cosine", "term3_is_descent"])?;
        for r in &rounds {
            w.write_record([
                r.round.to_string(),
                r.report.local_steps.to_string(),
                r.report.residual_norm.to_string(),
                r.report.relative_residual().to_string(),
                r.term3_inner.to_string(),
                opt(r.report.term3_descent_cosine),
                r.term3_is_descent.to_string(),
            ])?;
        }
        w.flush()?;
        if let Some(first) = rounds.first() {
            first.report.write_csv(create(dir, "eq4_round0.csv")?)?;
            first.report.write_summary_csv(federation.len(), create(dir, "eq4_round0_summary.csv")?)?;
        }
    }
    Ok(rounds)
}

/// Loss along the segment between two locally trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeOutcome {
    pub curve: Vec<(f64, f64)>,
}

impl LandscapeOutcome {
    /// Loss at the middle point (the equal-weight aggregate for odd point counts).
    pub fn midpoint(&self) -> f64 {
        self.curve[self.curve.len() / 2].1
    }

    pub fn endpoint_min(&self) -> f64 {
        self.curve[0].1.min(self.curve[self.curve.len() - 1].1)
    }

    pub fn midpoint_is_worse(&self) -> bool {
        self.midpoint() > self.endpoint_min()
    }
}

/// Trains two clients with opposite intensity shifts separately from one
/// initialization and probes the global loss along the segment between them.
pub fn run_landscape(plan: &ExperimentPlan, seed: u64, out: Option<&Path>) -> Result<LandscapeOutcome> {
    let n = plan.analysis.landscape_points;
    if n < 3 || n % 2 == 0 {
        return config("landscape_points must be odd and at least 3");
    }
    let federation = analysis_federation(plan, 2, seed)?;
    let mut cfg = plan.config(Strategy::Localized, seed, 1, 2);
    cfg.budget = plan.analysis.landscape_epochs;
    let history = run_strategy(&cfg, &federation)?;
    let prepared: Vec<PreparedClient> = federation.iter().map(|d| PreparedClient::new(d, cfg.window_radius)).collect();
    let weights = [0.5, 0.5];
    let curve = loss_landscape_line(&cfg.model, &history.final_params[0], &history.final_params[1], &prepared, &weights, n)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_landscape_csv(&curve, create(dir, "landscape.csv")?)?;
    }
    Ok(LandscapeOutcome { curve })
}
