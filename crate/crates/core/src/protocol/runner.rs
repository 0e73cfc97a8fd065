use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_fedavg, aggregate_fedbn};
use super::client::{local_train, ClientState, LocalOutcome, LocalPlan, PreparedClient};
use super::config::{FederationConfig, Selection, Strategy};
use super::events::{Event, EventKind, Node};
use super::routing::{route_schedule, RouteAssignment};
use crate::analysis::LocalTrace;
use crate::data::{client_weights, ClientDataset};
use crate::error::{config, Result};
use crate::nn::{LrSchedule, ParameterVector};

/// Summary of one communication round (or one E-epoch chunk for the
/// non-federated baselines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Active client per model (FedCross family) or all participating clients.
    pub active_clients: Vec<usize>,
    pub loss: f64,
    /// Step size at the first local step of the round.
    pub lr: f64,
    pub steps: usize,
    pub aggregated: bool,
    /// End-of-round parameters, one per model (empty unless snapshotting).
    pub snapshots: Vec<ParameterVector>,
    /// Local SGD traces (empty unless snapshotting).
    pub traces: Vec<LocalTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub strategy: Strategy,
    pub records: Vec<RoundRecord>,
    /// One model for single-model strategies, K for LOCALIZED, FEDBN and FEDCROSS_ENS.
    pub final_params: Vec<ParameterVector>,
    pub events: Vec<Event>,
    pub total_steps: usize,
    pub routes: Option<RouteAssignment>,
    pub warnings: Vec<String>,
}

impl TrainingHistory {
    pub fn aggregation_events(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Aggregate).count()
    }

    pub fn message_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind.is_message()).count()
    }
}

struct Ctx<'a> {
    cfg: &'a FederationConfig,
    clients: Vec<PreparedClient>,
    payload: usize,
}

impl Ctx<'_> {
    fn plan(&self, epochs: usize, schedule: LrSchedule, step_offset: usize, epoch_offset: usize, model: usize) -> LocalPlan {
        LocalPlan {
            epochs,
            batch_size: self.cfg.batch_size,
            schedule,
            step_offset,
            epoch_offset,
            seed: self.cfg.seed,
            model,
            prox_mu: (self.cfg.strategy == Strategy::FedProx).then_some(self.cfg.prox_mu),
            capture_trace: self.cfg.snapshot,
        }
    }

    fn schedule(&self, total_steps: usize) -> LrSchedule {
        LrSchedule::new(self.cfg.lr0, total_steps, self.cfg.lr_power)
    }

    fn steps(&self, k: usize) -> usize {
        self.clients[k].steps_per_epoch(self.cfg.batch_size)
    }

    fn init(&self, model: usize) -> Result<ParameterVector> {
        self.cfg.model.init_params(crate::seed::derive(&[self.cfg.seed, model as u64]))
    }
}

fn message(round: usize, model: usize, sender: Node, receiver: Node, payload: usize, kind: EventKind) -> Event {
    Event { round, model, sender, receiver, payload, kind }
}

/// Trains one strategy on the federation from scratch.
pub fn run_strategy(cfg: &FederationConfig, federation: &[ClientDataset]) -> Result<TrainingHistory> {
    let warnings = cfg.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    if federation.len() != cfg.clients {
        return config(format!(
            "config expects {} clients, federation has {}",
            cfg.clients,
            federation.len()
        ));
    }
    let clients: Vec<PreparedClient> =
        federation.iter().map(|d| PreparedClient::new(d, cfg.window_radius)).collect();
    if let Some(c) = clients.iter().find(|c| c.train.is_empty()) {
        return crate::error::input(format!("client {} has an empty training split", c.client_id));
    }
    let ctx = Ctx { cfg, clients, payload: cfg.model.layout().len() };
    let mut history = match cfg.strategy {
        Strategy::FedAvg | Strategy::FedProx | Strategy::FedBn => run_fedavg_family(&ctx)?,
        Strategy::FedCross => run_fedcross(&ctx)?,
        Strategy::FedCrossEns => run_fedcross_ens(&ctx)?,
        Strategy::Centralized => run_centralized(&ctx)?,
        Strategy::Localized => run_localized(&ctx)?,
    };
    history.warnings = warnings;
    Ok(history)
}

fn run_fedavg_family(ctx: &Ctx<'_>) -> Result<TrainingHistory> {
    let cfg = ctx.cfg;
    let k_count = cfg.clients;
    let e = cfg.local_epochs;
    let sizes: Vec<usize> = ctx.clients.iter().map(|c| c.train.len()).collect();
    let weights = client_weights(&sizes)?;
    let fedbn = cfg.strategy == Strategy::FedBn;

    let mut global = ctx.init(0)?;
    let mut starts = vec![global.clone(); k_count];
    let mut states: Vec<ClientState> = (0..k_count).map(ClientState::new).collect();
    let mut records = Vec::with_capacity(cfg.rounds());
    let mut events = Vec::new();
    let mut total_steps = 0;

    for t in 0..cfg.rounds() {
        let outcomes: Vec<LocalOutcome> = states
            .par_iter_mut()
            .zip(starts.par_iter())
            .enumerate()
            .map(|(k, (state, start))| {
                let s = ctx.steps(k);
                let plan = ctx.plan(e, ctx.schedule(cfg.budget * s), t * e * s, t * e, 0);
                local_train(state, start, &cfg.model, &ctx.clients[k], &plan)
            })
            .collect::<Result<_>>()?;
        for k in 0..k_count {
            events.push(message(t, 0, Node::Server, Node::Client(k), ctx.payload, EventKind::Broadcast));
        }
        for k in 0..k_count {
            events.push(message(t, 0, Node::Client(k), Node::Server, ctx.payload, EventKind::Upload));
        }
        events.push(message(t, 0, Node::Server, Node::Server, 0, EventKind::Aggregate));

        let trained: Vec<ParameterVector> = outcomes.iter().map(|o| o.params.clone()).collect();
        global = aggregate_fedavg(&trained, &weights)?;
        starts = if fedbn {
            aggregate_fedbn(&trained, &weights, &states)?
        } else {
            vec![global.clone(); k_count]
        };
        let steps: usize = outcomes.iter().map(|o| o.steps).sum();
        total_steps += steps;
        records.push(RoundRecord {
            round: t,
            active_clients: (0..k_count).collect(),
            loss: outcomes.iter().map(|o| o.mean_loss).sum::<f64>() / k_count as f64,
            lr: outcomes[0].first_lr,
            steps,
            aggregated: true,
            snapshots: if cfg.snapshot {
                if fedbn { starts.clone() } else { vec![global.clone()] }
            } else {
                vec![]
            },
            traces: outcomes.into_iter().filter_map(|o| o.trace).collect(),
        });
    }
    Ok(TrainingHistory {
        strategy: cfg.strategy,
        records,
        final_params: if fedbn { starts } else { vec![global] },
        events,
        total_steps,
        routes: None,
        warnings: vec![],
    })
}

/// Trains one model sequentially along `route`, `epochs_per_round` epochs per
/// visit. Returns per-round outcomes and the final parameters.
fn run_route(
    ctx: &Ctx<'_>,
    route: &[usize],
    epochs_per_round: usize,
    model: usize,
    init: ParameterVector,
) -> Result<(Vec<LocalOutcome>, ParameterVector)> {
    let total: usize = route.iter().map(|&k| epochs_per_round * ctx.steps(k)).sum();
    let schedule = ctx.schedule(total);
    let mut params = init;
    let mut step = 0;
    let mut outcomes = Vec::with_capacity(route.len());
    for (t, &k) in route.iter().enumerate() {
        let mut state = ClientState::new(k);
        let plan = ctx.plan(epochs_per_round, schedule, step, t * epochs_per_round, model);
        let out = local_train(&mut state, &params, &ctx.cfg.model, &ctx.clients[k], &plan)?;
        step += out.steps;
        params = out.params.clone();
        outcomes.push(out);
    }
    Ok((outcomes, params))
}

fn run_fedcross(ctx: &Ctx<'_>) -> Result<TrainingHistory> {
    let cfg = ctx.cfg;
    let routes = route_schedule(cfg.clients, cfg.rounds(), cfg.seed, false, cfg.selection)?;
    let route = routes.route_of(0);
    let epochs = cfg.local_epochs * cfg.clients;
    let (outcomes, final_params) = run_route(ctx, &route, epochs, 0, ctx.init(0)?)?;
    let mut events = Vec::with_capacity(2 * route.len());
    let mut records = Vec::with_capacity(route.len());
    let mut total_steps = 0;
    for (t, (out, &k)) in outcomes.into_iter().zip(&route).enumerate() {
        events.push(message(t, 0, Node::Server, Node::Client(k), ctx.payload, EventKind::Broadcast));
        events.push(message(t, 0, Node::Client(k), Node::Server, ctx.payload, EventKind::Upload));
        total_steps += out.steps;
        records.push(RoundRecord {
            round: t,
            active_clients: vec![k],
            loss: out.mean_loss,
            lr: out.first_lr,
            steps: out.steps,
            aggregated: false,
            snapshots: if cfg.snapshot { vec![out.params] } else { vec![] },
            traces: out.trace.into_iter().collect(),
        });
    }
    Ok(TrainingHistory {
        strategy: cfg.strategy,
        records,
        final_params: vec![final_params],
        events,
        total_steps,
        routes: Some(routes),
        warnings: vec![],
    })
}

fn run_fedcross_ens(ctx: &Ctx<'_>) -> Result<TrainingHistory> {
    let cfg = ctx.cfg;
    let k_count = cfg.clients;
    let routes = route_schedule(k_count, cfg.rounds(), cfg.seed, true, Selection::Uniform)?;
    let epochs = cfg.local_epochs * k_count;
    let members: Vec<(Vec<LocalOutcome>, ParameterVector)> = (0..k_count)
        .into_par_iter()
        .map(|m| run_route(ctx, &routes.route_of(m), epochs, m, ctx.init(m)?))
        .collect::<Result<_>>()?;

    let mut events = Vec::new();
    let mut records = Vec::with_capacity(cfg.rounds());
    let mut total_steps = 0;
    for t in 0..cfg.rounds() {
        let assignment = &routes.rounds[t];
        for (m, &k) in assignment.iter().enumerate() {
            events.push(message(t, m, Node::Server, Node::Client(k), ctx.payload, EventKind::Broadcast));
            events.push(message(t, m, Node::Client(k), Node::Server, ctx.payload, EventKind::Upload));
        }
        let outs: Vec<&LocalOutcome> = members.iter().map(|(o, _)| &o[t]).collect();
        let steps: usize = outs.iter().map(|o| o.steps).sum();
        total_steps += steps;
        records.push(RoundRecord {
            round: t,
            active_clients: assignment.clone(),
            loss: outs.iter().map(|o| o.mean_loss).sum::<f64>() / k_count as f64,
            lr: outs[0].first_lr,
            steps,
            aggregated: false,
            snapshots: if cfg.snapshot { outs.iter().map(|o| o.params.clone()).collect() } else { vec![] },
            traces: outs.iter().filter_map(|o| o.trace.clone()).collect(),
        });
    }
    Ok(TrainingHistory {
        strategy: cfg.strategy,
        records,
        final_params: members.into_iter().map(|(_, p)| p).collect(),
        events,
        total_steps,
        routes: Some(routes),
        warnings: vec![],
    })
}

/// Trains one model on one data source in E-epoch chunks; the chunking only
/// affects the records, not the trajectory.
fn run_chunked(ctx: &Ctx<'_>, data: &PreparedClient, model_init: ParameterVector) -> Result<Vec<LocalOutcome>> {
    let cfg = ctx.cfg;
    let e = cfg.local_epochs;
    let s = data.steps_per_epoch(cfg.batch_size);
    let schedule = ctx.schedule(cfg.budget * s);
    let mut params = model_init;
    let mut state = ClientState::new(data.client_id);
    (0..cfg.rounds())
        .map(|t| {
            let out = local_train(&mut state, &params, &cfg.model, data, &ctx.plan(e, schedule, t * e * s, t * e, 0))?;
            params = out.params.clone();
            Ok(out)
        })
        .collect()
}

fn chunk_records(per_source: &[Vec<LocalOutcome>], snapshot: bool) -> (Vec<RoundRecord>, usize) {
    let rounds = per_source.first().map_or(0, Vec::len);
    let sources = per_source.len();
    let mut total = 0;
    let records = (0..rounds)
        .map(|t| {
            let outs: Vec<&LocalOutcome> = per_source.iter().map(|o| &o[t]).collect();
            let steps: usize = outs.iter().map(|o| o.steps).sum();
            total += steps;
            RoundRecord {
                round: t,
                active_clients: (0..sources).collect(),
                loss: outs.iter().map(|o| o.mean_loss).sum::<f64>() / sources as f64,
                lr: outs[0].first_lr,
                steps,
                aggregated: false,
                snapshots: if snapshot { outs.iter().map(|o| o.params.clone()).collect() } else { vec![] },
                traces: outs.iter().filter_map(|o| o.trace.clone()).collect(),
            }
        })
        .collect();
    (records, total)
}

fn run_centralized(ctx: &Ctx<'_>) -> Result<TrainingHistory> {
    let pooled = PreparedClient::pooled(&ctx.clients)?;
    let outs = run_chunked(ctx, &pooled, ctx.init(0)?)?;
    let final_params = outs.last().map(|o| o.params.clone()).unwrap_or(ctx.init(0)?);
    let (mut records, total_steps) = chunk_records(&[outs], ctx.cfg.snapshot);
    let all: Vec<usize> = (0..ctx.cfg.clients).collect();
    records.iter_mut().for_each(|r| r.active_clients = all.clone());
    Ok(TrainingHistory {
        strategy: ctx.cfg.strategy,
        records,
        final_params: vec![final_params],
        events: vec![],
        total_steps,
        routes: None,
        warnings: vec![],
    })
}

fn run_localized(ctx: &Ctx<'_>) -> Result<TrainingHistory> {
    let init = ctx.init(0)?;
    let per_client: Vec<Vec<LocalOutcome>> = ctx
        .clients
        .par_iter()
        .map(|c| run_chunked(ctx, c, init.clone()))
        .collect::<Result<_>>()?;
    let final_params = per_client
        .iter()
        .map(|o| o.last().map(|x| x.params.clone()).unwrap_or_else(|| init.clone()))
        .collect();
    let (records, total_steps) = chunk_records(&per_client, ctx.cfg.snapshot);
    Ok(TrainingHistory {
        strategy: ctx.cfg.strategy,
        records,
        final_params,
        events: vec![],
        total_steps,
        routes: None,
        warnings: vec![],
    })
}
