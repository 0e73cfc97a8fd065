use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::Selection;
use crate::error::{input, Result};
use crate::seed;

/// Which client hosts each model in each round: `rounds[t][model] = client`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteAssignment {
    pub clients: usize,
    pub rounds: Vec<Vec<usize>>,
}

impl RouteAssignment {
    pub fn models(&self) -> usize {
        self.rounds.first().map_or(0, Vec::len)
    }

    /// Clients visited by one model, in round order.
    pub fn route_of(&self, model: usize) -> Vec<usize> {
        self.rounds.iter().map(|r| r[model]).collect()
    }

    /// Times each client is visited, summed over models.
    pub fn visit_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.clients];
        self.rounds.iter().flatten().for_each(|&c| counts[c] += 1);
        counts
    }
}

/// Random routes for FedCross (`ensemble = false`, one model) or
/// FedCrossEns (`ensemble = true`, K models on a fresh permutation per round).
pub fn route_schedule(
    clients: usize,
    rounds: usize,
    seed: u64,
    ensemble: bool,
    selection: Selection,
) -> Result<RouteAssignment> {
    if clients == 0 {
        return input("route schedule needs at least one client");
    }
    let mut rng = seed::rng(&[seed::tag::ROUTE, seed, ensemble as u64]);
    let rounds = if ensemble {
        (0..rounds)
            .map(|_| {
                let mut perm: Vec<usize> = (0..clients).collect();
                perm.shuffle(&mut rng);
                perm
            })
            .collect()
    } else {
        match selection {
            Selection::Uniform => (0..rounds).map(|_| vec![rng.gen_range(0..clients)]).collect(),
            Selection::Cycle => {
                let mut out = Vec::with_capacity(rounds);
                while out.len() < rounds {
                    let mut perm: Vec<usize> = (0..clients).collect();
                    perm.shuffle(&mut rng);
                    out.extend(perm.into_iter().map(|c| vec![c]));
                }
                out.truncate(rounds);
                out
            }
        }
    };
    Ok(RouteAssignment { clients, rounds })
}
