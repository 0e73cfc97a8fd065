use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::analysis::{LocalTrace, TraceStep};
use crate::data::{ClientDataset, FeatureCache};
use crate::error::{input, Result};
use crate::nn::{loss_and_grad, sgd_step, LrSchedule, ModelSpec, ParameterVector, Prox};
use crate::seed;

/// A client's training data prepared for SGD.
#[derive(Debug, Clone)]
pub struct PreparedClient {
    pub client_id: usize,
    pub cache: FeatureCache,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl PreparedClient {
    pub fn new(data: &ClientDataset, window_radius: usize) -> Self {
        PreparedClient {
            client_id: data.client_id,
            cache: FeatureCache::new(data, window_radius),
            train: data.split.train.clone(),
            test: data.split.test.clone(),
        }
    }

    /// All clients' training samples pooled into one source (id 0).
    pub fn pooled(clients: &[PreparedClient]) -> Result<Self> {
        let cache = FeatureCache::pooled(clients.iter().map(|c| &c.cache))?;
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut base = 0;
        for c in clients {
            train.extend(c.train.iter().map(|i| i + base));
            test.extend(c.test.iter().map(|i| i + base));
            base += c.cache.len();
        }
        Ok(PreparedClient { client_id: 0, cache, train, test })
    }

    pub fn steps_per_epoch(&self, batch_size: usize) -> usize {
        self.train.len().div_ceil(batch_size)
    }
}

/// State a client keeps between rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientState {
    pub client_id: usize,
    /// Latest local parameters; under FedBN their normalization layers stay local.
    pub params: Option<ParameterVector>,
    /// Local steps taken in the current round.
    pub step: usize,
}

impl ClientState {
    pub fn new(client_id: usize) -> Self {
        ClientState { client_id, params: None, step: 0 }
    }

    pub fn with_params(client_id: usize, params: ParameterVector) -> Self {
        ClientState { client_id, params: Some(params), step: 0 }
    }
}

/// Everything that fixes one call of [`local_train`].
#[derive(Debug, Clone, Copy)]
pub struct LocalPlan {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    /// Position of the first local step on `schedule`.
    pub step_offset: usize,
    /// Epoch index of the first local epoch along this model's trajectory;
    /// shuffling is keyed by (seed, client, model, epoch).
    pub epoch_offset: usize,
    pub seed: u64,
    pub model: usize,
    pub prox_mu: Option<f64>,
    pub capture_trace: bool,
}

#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub params: ParameterVector,
    pub mean_loss: f64,
    pub steps: usize,
    pub first_lr: f64,
    pub trace: Option<LocalTrace>,
}

/// Sample order of one epoch.
pub fn epoch_order(train: &[usize], seed: u64, client: usize, model: usize, epoch: usize) -> Vec<usize> {
    let mut order = train.to_vec();
    let mut rng = seed::rng(&[seed::tag::SHUFFLE, seed, client as u64, model as u64, epoch as u64]);
    order.shuffle(&mut rng);
    order
}

/// Runs `epochs` passes of minibatch SGD starting from `global`.
pub fn local_train(
    state: &mut ClientState,
    global: &ParameterVector,
    spec: &ModelSpec,
    data: &PreparedClient,
    plan: &LocalPlan,
) -> Result<LocalOutcome> {
    if plan.epochs == 0 {
        return input("local training needs at least one epoch");
    }
    if data.train.is_empty() {
        return input(format!("client {} has an empty training split", data.client_id));
    }
    if let Some(p) = &state.params {
        p.ensure_same_layout(global)?;
    }
    let anchor = global.clone();
    let mut params = global.clone();
    let mut trace_steps = Vec::new();
    let mut loss_sum = 0.0;
    let mut step = 0;
    let mut first_lr = None;
    for e in 0..plan.epochs {
        let order = epoch_order(&data.train, plan.seed, data.client_id, plan.model, plan.epoch_offset + e);
        for chunk in order.chunks(plan.batch_size) {
            let batch = data.cache.batch(chunk)?;
            let prox = plan.prox_mu.map(|mu| Prox { mu, anchor: &anchor });
            let (loss, grad) = loss_and_grad(spec, &params, &batch, prox)?;
            let lr = plan.schedule.at(plan.step_offset + step)?;
            first_lr.get_or_insert(lr);
            let next = sgd_step(&params, &grad, lr)?;
            if plan.capture_trace {
                trace_steps.push(TraceStep { params: std::mem::replace(&mut params, next), lr, grad });
            } else {
                params = next;
            }
            loss_sum += loss;
            step += 1;
        }
    }
    state.step = step;
    state.params = Some(params.clone());
    let trace = plan.capture_trace.then(|| LocalTrace {
        client_id: data.client_id,
        steps: trace_steps,
        final_params: params.clone(),
    });
    Ok(LocalOutcome {
        params,
        mean_loss: loss_sum / step as f64,
        steps: step,
        first_lr: first_lr.unwrap_or(0.0),
        trace,
    })
}
