//! The reference gameplay procedure: round-robin proposers, partner selection by
//! tree search, ultimatum offers scored by a value approximation, binding acceptance.

pub mod mcts;
pub mod offer;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::model::{CommitmentState, Game, PayoffVector};
use crate::rng::{stream, stream_rng};
use crate::solvers::exact::ExactConfig;
use crate::values::{ValueApproximation, ValueSpec};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

pub use mcts::mcts_select_partner;
pub use offer::{best_offer, enumerate_feasible_updates, DEFAULT_MAX_CANDIDATES};

/// What the tree search backs up from a leaf.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafEval {
    /// The value approximation at the leaf state.
    #[default]
    ApproxValue,
    /// The raw reward vector at the leaf state.
    RawPayoff,
}

impl std::str::FromStr for LeafEval {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approx" | "approx_value" => Ok(LeafEval::ApproxValue),
            "raw" | "raw_payoff" => Ok(LeafEval::RawPayoff),
            other => Err(Error::validation(format!("unknown leaf evaluation {other:?} (expected approx|raw)"))),
        }
    }
}

fn default_max_candidates() -> usize {
    DEFAULT_MAX_CANDIDATES
}

fn default_max_states() -> usize {
    crate::solvers::SolverLimits::default().max_states
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Proposals per player; the horizon is `rounds * N_P` turns.
    pub proposer_rounds_per_player: u32,
    /// Per-player per-turn commitment budget.
    pub k: usize,
    pub mcts_simulations: usize,
    pub mcts_exploration: f64,
    #[serde(default)]
    pub leaf_eval: LeafEval,
    pub seed: u64,
    #[serde(default = "default_max_candidates")]
    pub max_candidates: usize,
    /// State limit for exact play.
    #[serde(default = "default_max_states")]
    pub max_exact_states: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            proposer_rounds_per_player: 1,
            k: 2,
            mcts_simulations: 200,
            mcts_exploration: 1.414,
            leaf_eval: LeafEval::ApproxValue,
            seed: 0,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            max_exact_states: default_max_states(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::validation("k must be at least 1"));
        }
        if self.mcts_simulations < 1 {
            return Err(Error::validation("mcts_simulations must be at least 1"));
        }
        if !self.mcts_exploration.is_finite() || self.mcts_exploration < 0.0 {
            return Err(Error::validation("mcts_exploration must be a finite non-negative number"));
        }
        Ok(())
    }

    pub fn horizon(&self, game: &Game) -> u32 {
        self.proposer_rounds_per_player * game.num_players() as u32
    }

    /// Exact solver settings matching this protocol on `game`.
    pub fn exact_config(&self, game: &Game) -> ExactConfig {
        let mut cfg = ExactConfig::new(self.horizon(game), self.k);
        cfg.limits.max_candidates = self.max_candidates;
        cfg.limits.max_states = self.max_exact_states;
        cfg
    }
}

/// Additions offered in one deal, as player-local action indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointUpdate {
    pub proposer: Vec<usize>,
    pub partner: Vec<usize>,
}

impl JointUpdate {
    pub fn is_empty(&self) -> bool {
        self.proposer.is_empty() && self.partner.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: u32,
    pub proposer: usize,
    pub partner: Option<usize>,
    pub offer: Option<JointUpdate>,
    pub accepted: bool,
    /// Commitment matrix after the turn, one 0/1 row per player.
    pub state_after: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub game_hash: String,
    pub value: ValueSpec,
    pub config: ProtocolConfig,
    pub turns: Vec<TurnRecord>,
    pub terminal: PayoffVector,
}

impl Trace {
    /// Commitment states after each turn.
    pub fn states(&self, game: &Game) -> Result<Vec<CommitmentState>> {
        self.turns
            .iter()
            .map(|r| game.state_from_rows(&r.state_after, r.turn + 1))
            .collect()
    }

    pub fn final_state(&self, game: &Game) -> Result<CommitmentState> {
        match self.turns.last() {
            Some(r) => game.state_from_rows(&r.state_after, r.turn + 1),
            None => Ok(game.empty_state()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Trace> {
        Ok(serde_json::from_str(text)?)
    }
}

type OfferKey = (Bits, u32, usize, usize);

/// Memoized offers within one playthrough. Approximate values are state functions, so
/// the turn only enters the key in exact mode.
pub(crate) struct OfferCache {
    map: FxHashMap<OfferKey, Option<offer::OfferChoice>>,
    k: usize,
    max_candidates: usize,
}

impl OfferCache {
    pub fn new(config: &ProtocolConfig) -> Self {
        OfferCache {
            map: FxHashMap::default(),
            k: config.k,
            max_candidates: config.max_candidates,
        }
    }

    pub fn get(
        &mut self,
        approx: &ValueApproximation<'_>,
        bits: &Bits,
        turn: u32,
        proposer: usize,
        partner: usize,
    ) -> Result<Option<offer::OfferChoice>> {
        let key = (bits.clone(), if approx.is_exact() { turn } else { 0 }, proposer, partner);
        if let Some(hit) = self.map.get(&key) {
            return Ok(hit.clone());
        }
        let choice = match approx.exact_solver() {
            Some(solver) => solver.borrow_mut().best_offer(bits, turn, proposer, partner)?,
            None => offer::best_offer_scaled(approx, bits, proposer, partner, self.k, self.max_candidates)?,
        };
        self.map.insert(key, choice.clone());
        Ok(choice)
    }
}

/// Plays the full game: `T = rounds * N_P` turns, proposer `t mod N_P`, partner by
/// tree search (exact one-ply choice in exact mode), best offer accepted when it exists.
pub fn play_game(game: &Game, approx: &ValueApproximation<'_>, config: &ProtocolConfig) -> Result<Trace> {
    config.validate()?;
    if !std::ptr::eq(approx.game(), game) && approx.game() != game {
        return Err(Error::validation("value approximation is bound to a different game"));
    }
    let np = game.num_players();
    let horizon = config.horizon(game);
    if let Some(solver) = approx.exact_solver() {
        let have = *solver.borrow().config();
        if have.horizon != horizon || have.k != config.k {
            return Err(Error::validation("exact solver horizon or budget differs from the protocol"));
        }
    }
    let mut bits = game.empty_state().bits;
    let mut cache = OfferCache::new(config);
    let mut turns = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let proposer = t as usize % np;
        let (partner, choice) = match approx.exact_solver() {
            Some(solver) => solver.borrow_mut().choose(&bits, t, proposer)?,
            None => {
                let mut rng = stream_rng(config.seed, stream::PROTOCOL_BASE + t as u64);
                let state = CommitmentState { bits: bits.clone(), turn: t };
                let partner = mcts::select_partner(game, &state, proposer, approx, config, &mut cache, &mut rng)?;
                (Some(partner), cache.get(approx, &bits, t, proposer, partner)?)
            }
        };
        let accepted = choice.is_some();
        let offer = choice.map(|c| {
            bits = c.bits;
            c.update
        });
        turns.push(TurnRecord {
            turn: t,
            proposer,
            partner,
            offer,
            accepted,
            state_after: game.state_rows(&CommitmentState { bits: bits.clone(), turn: t + 1 }),
        });
    }
    let terminal = game.reward_vector(&CommitmentState { bits, turn: horizon })?;
    Ok(Trace {
        game_hash: game.content_hash(),
        value: value_spec_of(approx),
        config: config.clone(),
        turns,
        terminal,
    })
}

fn value_spec_of(approx: &ValueApproximation<'_>) -> ValueSpec {
    let np = approx.game().num_players();
    match approx.kind() {
        Some(kind) => ValueSpec {
            kind,
            per_player: None,
            threat_policy: approx.policy(),
        },
        None => ValueSpec {
            kind: approx.kind_of(0),
            per_player: Some((0..np).map(|p| approx.kind_of(p)).collect()),
            threat_policy: approx.policy(),
        },
    }
}

/// Builds the approximation named in `spec` and plays the game.
pub fn play_with_spec(game: &Game, spec: &ValueSpec, config: &ProtocolConfig) -> Result<Trace> {
    let approx = spec.build(game, config.exact_config(game))?;
    play_game(game, &approx, config)
}

/// Re-plays a trace and checks that it reproduces exactly.
pub fn verify_replay(game: &Game, trace: &Trace) -> Result<bool> {
    if trace.game_hash != game.content_hash() {
        return Err(Error::validation("trace was recorded on a different game"));
    }
    let again = play_with_spec(game, &trace.value, &trace.config)?;
    Ok(again.to_json() == trace.to_json())
}
