//! Method-vs-baseline comparison over a fixed list of games (mean ± SD across games).

use super::stats::{summarize, Summary};
use super::{improvement_stats, ImprovementStats};
use crate::baselines::no_negotiation;
use crate::error::Result;
use crate::model::{Game, PayoffVector};
use crate::par::{self, Execution};
use crate::protocol::{play_with_spec, ProtocolConfig};
use crate::rational::to_f64;
use crate::rng::derive_seed;
use crate::values::ValueSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub game_hash: String,
    pub error: Option<String>,
    pub payoffs: Option<PayoffVector>,
    pub delta: Option<ImprovementStats>,
}

/// One method's improvement over No-Negotiation across the game list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: String,
    pub games: Vec<GameOutcome>,
    /// Mean and standard deviation of `Σ Δ` over games that ran.
    pub delta_sum: Option<Summary>,
    /// Games with `Σ Δ > 0`.
    pub wins: usize,
}

fn run_one(game: &Game, index: usize, spec: &ValueSpec, protocol: &ProtocolConfig) -> GameOutcome {
    let hash = game.content_hash();
    let protocol = ProtocolConfig {
        seed: derive_seed(protocol.seed, &format!("game/{index}")),
        ..protocol.clone()
    };
    let result = no_negotiation(game).and_then(|nn| {
        let trace = play_with_spec(game, spec, &protocol)?;
        let delta = improvement_stats(&trace.terminal, &nn.payoffs)?;
        Ok((trace.terminal, delta))
    });
    match result {
        Ok((payoffs, delta)) => GameOutcome {
            game_hash: hash,
            error: None,
            payoffs: Some(payoffs),
            delta: Some(delta),
        },
        Err(e) => GameOutcome {
            game_hash: hash,
            error: Some(e.to_string()),
            payoffs: None,
            delta: None,
        },
    }
}

pub fn compare_games(games: &[Game], methods: &[ValueSpec], protocol: &ProtocolConfig, exec: Execution) -> Result<Vec<Comparison>> {
    protocol.validate()?;
    let mut out = Vec::with_capacity(methods.len());
    for spec in methods {
        let indexed: Vec<(usize, &Game)> = games.iter().enumerate().collect();
        let outcomes = par::map(exec, &indexed, |&(i, g)| run_one(g, i, spec, protocol));
        let sums: Vec<f64> = outcomes.iter().filter_map(|o| o.delta.as_ref()).map(|d| to_f64(&d.sum)).collect();
        let wins = outcomes
            .iter()
            .filter_map(|o| o.delta.as_ref())
            .filter(|d| d.sum > 0.into())
            .count();
        out.push(Comparison {
            method: spec.label(),
            delta_sum: (!sums.is_empty()).then(|| summarize(&sums)),
            games: outcomes,
            wins,
        });
    }
    Ok(out)
}
