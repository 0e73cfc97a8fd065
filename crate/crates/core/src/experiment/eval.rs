use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::metrics::{asd, dice, uncertainty_map, CaseScores, EvalReport, UncertaintyMap};
use crate::nn::{forward, ModelSpec, ParameterVector, ProbMap};
use crate::protocol::{ensemble_predict, PreparedClient, Strategy, TrainingHistory};

/// Pixel spacing used for ASD on the synthetic grids.
pub const SPACING: (f64, f64) = (1.0, 1.0);

/// The models that predict for client `k` under `history`'s strategy.
pub fn client_models(history: &TrainingHistory, k: usize) -> &[ParameterVector] {
    match history.strategy {
        Strategy::FedBn | Strategy::Localized => &history.final_params[k..=k],
        Strategy::FedCrossEns => &history.final_params,
        _ => &history.final_params[..1],
    }
}

fn predict(spec: &ModelSpec, models: &[ParameterVector], client: &PreparedClient) -> Result<ProbMap> {
    let batch = client.cache.batch(&client.test)?;
    if models.len() == 1 {
        forward(spec, &models[0], &batch)
    } else {
        ensemble_predict(spec, models, &batch)
    }
}

/// Per-case test DSC and ASD of every client.
pub fn evaluate_history(
    spec: &ModelSpec,
    history: &TrainingHistory,
    federation: &[ClientDataset],
    window_radius: usize,
) -> Result<EvalReport> {
    let cases = federation
        .iter()
        .enumerate()
        .map(|(k, data)| {
            let client = PreparedClient::new(data, window_radius);
            let pred = predict(spec, client_models(history, k), &client)?.hard_mask();
            let pixels = data.pixels();
            let mut scores = CaseScores { client_id: data.client_id, dsc: vec![], asd: vec![] };
            for (p, &i) in pred.chunks(pixels).zip(&client.test) {
                let gt = client.cache.mask(i);
                scores.dsc.push(dice(p, gt)?);
                scores.asd.push(match asd(p, gt, data.height, data.width, SPACING) {
                    Ok(v) => Some(v),
                    Err(Error::UndefinedMetric(_)) => None,
                    Err(e) => return Err(e),
                });
            }
            Ok(scores)
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_cases(history.strategy.name(), cases)
}

/// Ensemble uncertainty over each client's test cases.
pub fn test_uncertainty(
    spec: &ModelSpec,
    models: &[ParameterVector],
    federation: &[ClientDataset],
    window_radius: usize,
) -> Result<Vec<Vec<UncertaintyMap>>> {
    federation
        .iter()
        .map(|data| {
            let client = PreparedClient::new(data, window_radius);
            let batch = client.cache.batch(&client.test)?;
            uncertainty_map(spec, models, &batch, data.height, data.width)
        })
        .collect()
}
