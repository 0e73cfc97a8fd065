use crate::error::{input, Result};
use crate::nn::ParameterVector;

use super::client::ClientState;

fn check_inputs(params: &[ParameterVector], weights: &[f64]) -> Result<()> {
    if params.is_empty() {
        return input("nothing to aggregate");
    }
    if params.len() != weights.len() {
        return input("one weight per model is required");
    }
    if let Some(p) = params.iter().find(|p| !p.same_layout(&params[0])) {
        return p.ensure_same_layout(&params[0]).map_err(|e| crate::Error::Input(e.to_string()));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return input(format!("weights must be non-negative and sum to 1 (sum = {sum})"));
    }
    Ok(())
}

/// Weighted parameter average `sum_k w_k theta_k`, reduced in client order with
/// Neumaier-compensated summation.
pub fn aggregate_fedavg(params: &[ParameterVector], weights: &[f64]) -> Result<ParameterVector> {
    check_inputs(params, weights)?;
    let n = params[0].len();
    let mut sum = vec![0.0; n];
    let mut comp = vec![0.0; n];
    for (p, &w) in params.iter().zip(weights) {
        for ((s, c), v) in sum.iter_mut().zip(comp.iter_mut()).zip(p.values()) {
            let term = w * v;
            let t = *s + term;
            if s.abs() >= term.abs() {
                *c += (*s - t) + term;
            } else {
                *c += (term - t) + *s;
            }
            *s = t;
        }
    }
    let values = sum.iter().zip(&comp).map(|(s, c)| s + c).collect();
    params[0].with_values(values)
}

/// FedBN: shared layers averaged as in FedAvg; normalization layers of
/// output `k` are taken from `local_states[k]`.
pub fn aggregate_fedbn(
    params: &[ParameterVector],
    weights: &[f64],
    local_states: &[ClientState],
) -> Result<Vec<ParameterVector>> {
    let shared = aggregate_fedavg(params, weights)?;
    if local_states.len() != params.len() {
        return input("one client state per model is required");
    }
    let mask = shared.layout().norm_mask();
    local_states
        .iter()
        .map(|state| {
            let local = state
                .params
                .as_ref()
                .ok_or_else(|| crate::Error::Input(format!("client {} holds no parameters", state.client_id)))?;
            shared.ensure_same_layout(local).map_err(|e| crate::Error::Input(e.to_string()))?;
            let values = shared
                .values()
                .iter()
                .zip(local.values())
                .zip(&mask)
                .map(|((&s, &l), &is_norm)| if is_norm { l } else { s })
                .collect();
            shared.with_values(values)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::nn::Layout;

    fn pv(v: &[f64]) -> ParameterVector {
        ParameterVector::from_flat(v.to_vec()).unwrap()
    }

    #[test]
    fn simple_average() {
        let out = aggregate_fedavg(&[pv(&[2.0]), pv(&[4.0])], &[0.5, 0.5]).unwrap();
        assert_eq!(out.values(), &[3.0]);
        let one = pv(&[1.5, -2.25]);
        assert_eq!(aggregate_fedavg(&[one.clone()], &[1.0]).unwrap(), one);
    }

    #[test]
    fn rejects_bad_weights_and_layouts() {
        assert!(aggregate_fedavg(&[pv(&[1.0]), pv(&[2.0])], &[0.5, 0.6]).is_err());
        assert!(aggregate_fedavg(&[pv(&[1.0]), pv(&[2.0, 3.0])], &[0.5, 0.5]).is_err());
        assert!(aggregate_fedavg(&[], &[]).is_err());
    }

    #[test]
    fn fedbn_keeps_local_norm_values() {
        let layout = Arc::new(Layout::new([
            ("norm0.scale", vec![1], true),
            ("dense0.weight", vec![2], false),
        ]));
        let a = ParameterVector::new(layout.clone(), vec![1.0, 0.0, 2.0]).unwrap();
        let b = ParameterVector::new(layout, vec![3.0, 4.0, 6.0]).unwrap();
        let states = vec![ClientState::with_params(0, a.clone()), ClientState::with_params(1, b.clone())];
        let out = aggregate_fedbn(&[a, b], &[0.5, 0.5], &states).unwrap();
        assert_eq!(out[0].values(), &[1.0, 2.0, 4.0]);
        assert_eq!(out[1].values(), &[3.0, 2.0, 4.0]);
    }
}
