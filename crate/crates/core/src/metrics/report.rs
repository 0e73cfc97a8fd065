use serde::{Deserialize, Serialize};

use super::stats::paired_ttest;
use crate::error::{input, Result};

/// Unweighted mean of per-client means; every client counts equally
/// regardless of its sample size.
pub fn global_average(per_client_means: &[f64]) -> Result<f64> {
    if per_client_means.is_empty() {
        return input("no client means to average");
    }
    Ok(per_client_means.iter().sum::<f64>() / per_client_means.len() as f64)
}

/// Per-case test scores of one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseScores {
    pub client_id: usize,
    pub dsc: Vec<f64>,
    /// `None` where the prediction was empty and ASD is undefined.
    pub asd: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientSummary {
    pub client_id: usize,
    pub cases: usize,
    pub mean_dsc: f64,
    /// Sample standard deviation (0 for a single case).
    pub sd_dsc: f64,
    pub mean_asd: Option<f64>,
    pub asd_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub method_a: String,
    pub method_b: String,
    /// `pooled` over all clients' cases, or `client<k>`.
    pub scope: String,
    /// `None` when the test is undefined (e.g. identical predictions).
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub per_client: Vec<ClientSummary>,
    pub global_dsc: f64,
    pub global_asd: Option<f64>,
    pub ttests: Vec<TTestResult>,
    pub cases: Vec<CaseScores>,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

impl EvalReport {
    pub fn from_cases(method: impl Into<String>, cases: Vec<CaseScores>) -> Result<Self> {
        if cases.is_empty() || cases.iter().any(|c| c.dsc.is_empty()) {
            return input("every client needs at least one test case");
        }
        let per_client: Vec<ClientSummary> = cases
            .iter()
            .map(|c| {
                let (mean_dsc, sd_dsc) = mean_sd(&c.dsc);
                let present: Vec<f64> = c.asd.iter().flatten().copied().collect();
                ClientSummary {
                    client_id: c.client_id,
                    cases: c.dsc.len(),
                    mean_dsc,
                    sd_dsc,
                    mean_asd: (!present.is_empty()).then(|| mean_sd(&present).0),
                    asd_missing: c.asd.len() - present.len(),
                }
            })
            .collect();
        let global_dsc = global_average(&per_client.iter().map(|c| c.mean_dsc).collect::<Vec<_>>())?;
        let asds: Vec<f64> = per_client.iter().filter_map(|c| c.mean_asd).collect();
        let global_asd = if asds.len() == per_client.len() { Some(global_average(&asds)?) } else { None };
        Ok(EvalReport { method: method.into(), per_client, global_dsc, global_asd, ttests: vec![], cases })
    }

    pub fn pooled_dsc(&self) -> Vec<f64> {
        self.cases.iter().flat_map(|c| c.dsc.iter().copied()).collect()
    }

    /// Paired t-tests of this method's DSCs against `reference`, pooled over
    /// all cases and within each client.
    pub fn compare_with(&self, reference: &EvalReport) -> Result<Vec<TTestResult>> {
        if self.cases.len() != reference.cases.len() {
            return input("reports cover different clients");
        }
        let mut out = Vec::with_capacity(self.cases.len() + 1);
        let mut push = |scope: String, a: &[f64], b: &[f64]| -> Result<()> {
            let p = match paired_ttest(a, b) {
                Ok(p) => Some(p),
                Err(crate::Error::UndefinedTest(_)) => None,
                Err(e) => return Err(e),
            };
            out.push(TTestResult {
                method_a: self.method.clone(),
                method_b: reference.method.clone(),
                scope,
                p_value: p,
            });
            Ok(())
        };
        push("pooled".into(), &self.pooled_dsc(), &reference.pooled_dsc())?;
        for (a, b) in self.cases.iter().zip(&reference.cases) {
            push(format!("client{}", a.client_id), &a.dsc, &b.dsc)?;
        }
        Ok(out)
    }
}
