mod common;

use fedcross_core::data::{client_weights, ClientDataset};
use fedcross_core::nn::*;
use fedcross_core::protocol::*;
use fedcross_core::Error;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn tiny_cfg(strategy: Strategy, clients: usize) -> FederationConfig {
    let mut cfg = FederationConfig::desk(strategy, 9);
    cfg.clients = clients;
    cfg.budget = 4;
    cfg.model.hidden = vec![6];
    cfg
}

fn plan(schedule: LrSchedule, prox_mu: Option<f64>) -> LocalPlan {
    LocalPlan {
        epochs: 1,
        batch_size: 4,
        schedule,
        step_offset: 0,
        epoch_offset: 0,
        seed: 1,
        model: 0,
        prox_mu,
        capture_trace: false,
    }
}

fn client(fed: &[ClientDataset], k: usize) -> PreparedClient {
    PreparedClient::new(&fed[k], 1)
}

#[test]
fn zero_learning_rate_keeps_global() {
    let fed = common::non_iid(&[12], 1);
    let spec = tiny_cfg(Strategy::FedAvg, 1).model;
    let global = spec.init_params(3).unwrap();
    let out = local_train(&mut ClientState::new(0), &global, &spec, &client(&fed, 0), &plan(LrSchedule::new(0.0, 100, 0.9), None)).unwrap();
    assert_eq!(out.params, global);
    assert_eq!(out.steps, 2);
}

#[test]
fn single_step_single_sample() {
    let fed = common::non_iid(&[12], 2);
    let spec = tiny_cfg(Strategy::FedAvg, 1).model;
    let global = spec.init_params(4).unwrap();
    let mut c = client(&fed, 0);
    c.train = vec![5];
    let schedule = LrSchedule::new(0.05, 10, 0.9);
    let out = local_train(&mut ClientState::new(0), &global, &spec, &c, &plan(schedule, None)).unwrap();
    let batch = c.cache.batch(&[5]).unwrap();
    let fd = finite_diff_grad(&spec, &global, &batch, 1e-6, None).unwrap();
    let expect = global.axpy(-0.05, &fd).unwrap();
    assert_eq!(out.steps, 1);
    assert!(out.params.max_abs_diff(&expect).unwrap() < 1e-9);
}

#[test]
fn huge_proximal_weight_anchors_to_global() {
    let fed = common::non_iid(&[30], 3);
    let spec = tiny_cfg(Strategy::FedProx, 1).model;
    let global = spec.init_params(5).unwrap();
    // SGD on mu/2 |x|^2 is stable only for lr * mu < 2
    let schedule = LrSchedule::new(1e-6, 10_000, 0.9);
    let mut p = plan(schedule, Some(1e6));
    p.epochs = 50;
    let c = client(&fed, 0);
    let anchored = local_train(&mut ClientState::new(0), &global, &spec, &c, &p).unwrap();
    p.prox_mu = None;
    let free = local_train(&mut ClientState::new(0), &global, &spec, &c, &p).unwrap();
    let d_anchor = anchored.params.max_abs_diff(&global).unwrap();
    let d_free = free.params.max_abs_diff(&global).unwrap();
    assert!(d_anchor < 1e-3, "{d_anchor}");
    assert!(d_anchor * 10.0 < d_free, "anchored {d_anchor} vs free {d_free}");
}

#[test]
fn fedavg_matches_independent_weighted_mean() {
    let mut r = common::rng(17);
    let spec = ModelSpec { input_dim: 3, hidden: vec![4], classes: 2, norm_positions: vec![0] };
    let params: Vec<ParameterVector> = (0..3).map(|_| common::random_params(&mut r, &spec)).collect();
    let raw: Vec<f64> = (0..3).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let agg = aggregate_fedavg(&params, &w).unwrap();
    for i in 0..agg.len() {
        let expect = (0..3).rev().map(|k| w[k] * params[k].values()[i]).sum::<f64>();
        assert!((agg.values()[i] - expect).abs() < 1e-12);
    }
    assert_eq!(aggregate_fedavg(&[params[0].clone()], &[1.0]).unwrap(), params[0]);
    let same = aggregate_fedavg(&[params[1].clone(), params[1].clone()], &[0.5, 0.5]).unwrap();
    assert!(same.max_abs_diff(&params[1]).unwrap() < 1e-15);
    assert!(matches!(aggregate_fedavg(&params, &[0.5, 0.5, 0.5]), Err(Error::Input(_))));
}

#[test]
fn fedbn_mask_partition() {
    let mut r = common::rng(23);
    let spec = ModelSpec { input_dim: 3, hidden: vec![4, 3], classes: 2, norm_positions: vec![0, 1] };
    let params: Vec<ParameterVector> = (0..3).map(|_| common::random_params(&mut r, &spec)).collect();
    let states: Vec<ClientState> = params.iter().enumerate().map(|(k, p)| ClientState::with_params(k, p.clone())).collect();
    let w = [0.2, 0.3, 0.5];
    let shared = aggregate_fedavg(&params, &w).unwrap();
    let out = aggregate_fedbn(&params, &w, &states).unwrap();
    let mask = shared.layout().norm_mask();
    for (k, o) in out.iter().enumerate() {
        for (i, &is_norm) in mask.iter().enumerate() {
            let expect = if is_norm { params[k].values()[i] } else { shared.values()[i] };
            assert_eq!(o.values()[i], expect);
        }
    }
}

#[test]
fn uniform_routes_pass_chi_square() {
    let routes = route_schedule(4, 10_000, 77, false, Selection::Uniform).unwrap();
    let counts = routes.visit_counts();
    let expected = 2500.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = ChiSquared::new(3.0).unwrap().sf(stat);
    assert!(p > 0.01, "chi2 = {stat}, p = {p}");
}

#[test]
fn route_invariants() {
    let single = route_schedule(1, 20, 3, false, Selection::Uniform).unwrap();
    assert!(single.rounds.iter().all(|r| r == &vec![0]));
    let ens = route_schedule(4, 50, 3, true, Selection::Uniform).unwrap();
    for r in &ens.rounds {
        let mut s = r.clone();
        s.sort_unstable();
        assert_eq!(s, vec![0, 1, 2, 3]);
    }
    let cycle = route_schedule(4, 12, 3, false, Selection::Cycle).unwrap();
    for chunk in cycle.route_of(0).chunks(4) {
        let mut s = chunk.to_vec();
        s.sort_unstable();
        assert_eq!(s, vec![0, 1, 2, 3]);
    }
}

#[test]
fn ensemble_mean_is_order_free() {
    let mut r = common::rng(31);
    let spec = ModelSpec { input_dim: 3, hidden: vec![5], classes: 2, norm_positions: vec![0] };
    let models: Vec<ParameterVector> = (0..4).map(|_| common::random_params(&mut r, &spec)).collect();
    let batch = common::random_batch(&mut r, 3, 2, 6);
    let ens = ensemble_predict(&spec, &models, &batch).unwrap();
    let singles: Vec<Vec<f64>> = models.iter().rev().map(|m| forward(&spec, m, &batch).unwrap().values).collect();
    for i in 0..ens.values.len() {
        let expect = singles.iter().map(|s| s[i]).sum::<f64>() / 4.0;
        assert!((ens.values[i] - expect).abs() < 1e-12);
    }
    for row in 0..12 {
        assert!((ens.row(row).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let same = ensemble_predict(&spec, &[models[0].clone(), models[0].clone()], &batch).unwrap();
    let single = forward(&spec, &models[0], &batch).unwrap();
    assert!(same.values.iter().zip(&single.values).all(|(a, b)| (a - b).abs() < 1e-15));
    assert!(ensemble_predict(&spec, &[], &batch).is_err());
}

fn steps_of(fed: &[ClientDataset], batch: usize) -> Vec<usize> {
    fed.iter().map(|c| c.split.train.len().div_ceil(batch)).collect()
}

#[test]
fn step_budget_parity_and_event_accounting() {
    let fed = common::non_iid(&[10, 14, 12, 20], 6);
    let s = steps_of(&fed, 4);
    let sum_s: usize = s.iter().sum();
    let avg = run_strategy(&tiny_cfg(Strategy::FedAvg, 4), &fed).unwrap();
    assert_eq!(avg.total_steps, 4 * sum_s);
    assert_eq!(avg.records.len(), 4);
    assert_eq!(avg.message_count(), 2 * 4 * 4);
    assert_eq!(avg.aggregation_events(), 4);

    let mut cfg = tiny_cfg(Strategy::FedCross, 4);
    cfg.selection = Selection::Cycle;
    let cross = run_strategy(&cfg, &fed).unwrap();
    assert_eq!(cross.total_steps, avg.total_steps);
    assert_eq!(cross.aggregation_events(), 0);
    assert!(cross.records.iter().all(|r| !r.aggregated && r.active_clients.len() == 1));
    assert_eq!(events::messages_per_round(&cross.events, 4), vec![2; 4]);

    let uni = run_strategy(&tiny_cfg(Strategy::FedCross, 4), &fed).unwrap();
    let route = uni.routes.as_ref().unwrap().route_of(0);
    assert_eq!(uni.total_steps, route.iter().map(|&k| 4 * s[k]).sum::<usize>());

    let ens = run_strategy(&tiny_cfg(Strategy::FedCrossEns, 4), &fed).unwrap();
    assert_eq!(ens.final_params.len(), 4);
    assert_eq!(ens.aggregation_events(), 0);
    assert_eq!(ens.total_steps, 4 * 4 * sum_s);

    let central = run_strategy(&tiny_cfg(Strategy::Centralized, 4), &fed).unwrap();
    let pooled_train: usize = fed.iter().map(|c| c.split.train.len()).sum();
    assert_eq!(central.total_steps, 4 * pooled_train.div_ceil(4));
    let local = run_strategy(&tiny_cfg(Strategy::Localized, 4), &fed).unwrap();
    assert_eq!(local.total_steps, 4 * sum_s);
    assert_eq!(local.final_params.len(), 4);
}

#[test]
fn same_config_same_history() {
    let fed = common::non_iid(&[10, 12], 8);
    for st in Strategy::ALL {
        let cfg = tiny_cfg(st, 2);
        assert_eq!(run_strategy(&cfg, &fed).unwrap(), run_strategy(&cfg, &fed).unwrap(), "{st}");
    }
}

#[test]
fn fedbn_keeps_local_normalization() {
    let fed = common::non_iid(&[10, 12, 14], 9);
    let h = run_strategy(&tiny_cfg(Strategy::FedBn, 3), &fed).unwrap();
    let mask = h.final_params[0].layout().norm_mask();
    let (a, b) = (&h.final_params[0], &h.final_params[1]);
    for (i, &m) in mask.iter().enumerate() {
        if m {
            assert_ne!(a.values()[i], b.values()[i]);
        } else {
            assert_eq!(a.values()[i], b.values()[i]);
        }
    }
}

#[test]
fn config_errors_and_warnings() {
    let fed = common::non_iid(&[10, 12], 8);
    let mut cfg = tiny_cfg(Strategy::FedAvg, 2);
    cfg.local_epochs = 3;
    assert!(matches!(run_strategy(&cfg, &fed), Err(Error::Config(_))));
    cfg.local_epochs = 4;
    assert_eq!(run_strategy(&cfg, &fed).unwrap().records.len(), 1);
    cfg.local_epochs = 1;
    cfg.prox_mu = 0.5;
    assert_eq!(run_strategy(&cfg, &fed).unwrap().warnings.len(), 1);
    cfg.clients = 3;
    assert!(matches!(run_strategy(&cfg, &fed), Err(Error::Config(_))));
}

#[test]
fn all_weights_from_train_sizes() {
    let fed = common::non_iid(&[10, 20], 8);
    let w = client_weights(&fed.iter().map(|c| c.split.train.len()).collect::<Vec<_>>()).unwrap();
    assert_eq!(w, vec![6.0 / 18.0, 12.0 / 18.0]);
}
