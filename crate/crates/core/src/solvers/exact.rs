//! Backward induction over the negotiation tree under the fixed protocol.
//!
//! At turn `t` the proposer is `t mod N_P`. The value of a state is the rejection
//! continuation unless some partner accepts an offer (weakly improving on the
//! partner's rejection value) that strictly improves the proposer. Among
//! improvements the first maximizer in (partner, enumeration) order wins. Values are
//! memoized per turn on the packed commitment bitset.

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::model::{CommitmentState, Game, PayoffVector};
use crate::protocol::offer::{Candidates, OfferChoice};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverLimits {
    /// Maximum number of memoized (state, turn) entries.
    pub max_states: usize,
    /// Maximum candidate updates per (proposer, partner) pair.
    pub max_candidates: usize,
}

impl Default for SolverLimits {
    fn default() -> Self {
        SolverLimits {
            max_states: 8_000_000,
            max_candidates: crate::protocol::offer::DEFAULT_MAX_CANDIDATES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactConfig {
    /// Horizon `T` in turns.
    pub horizon: u32,
    /// Per-player per-turn commitment budget.
    pub k: usize,
    #[serde(default)]
    pub limits: SolverLimits,
}

impl ExactConfig {
    pub fn new(horizon: u32, k: usize) -> Self {
        ExactConfig {
            horizon,
            k,
            limits: SolverLimits::default(),
        }
    }
}

/// Memoized exact solver. Value vectors live in an arena; the memo maps each
/// (turn, state) to an arena slot, and non-terminal entries alias the slot of the
/// chosen successor.
pub struct ExactSolver<'g> {
    game: &'g Game,
    config: ExactConfig,
    memo: Vec<FxHashMap<Bits, u32>>,
    arena: Vec<i64>,
    entries: usize,
}

impl<'g> ExactSolver<'g> {
    pub fn new(game: &'g Game, config: ExactConfig) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        Ok(ExactSolver {
            game,
            config,
            memo: (0..=config.horizon).map(|_| FxHashMap::default()).collect(),
            arena: Vec::new(),
            entries: 0,
        })
    }

    pub fn game(&self) -> &'g Game {
        self.game
    }

    pub fn config(&self) -> &ExactConfig {
        &self.config
    }

    /// Number of memoized (state, turn) entries.
    pub fn states(&self) -> usize {
        self.entries
    }

    #[inline]
    pub fn vector(&self, idx: u32) -> &[i64] {
        let n = self.game.num_players();
        &self.arena[idx as usize * n..(idx as usize + 1) * n]
    }

    #[inline]
    pub fn component(&self, idx: u32, player: usize) -> i64 {
        self.arena[idx as usize * self.game.num_players() + player]
    }

    fn push_terminal(&mut self, bits: &Bits) -> u32 {
        let n = self.game.num_players();
        let idx = (self.arena.len() / n) as u32;
        let start = self.arena.len();
        self.arena.resize(start + n, 0);
        self.game.reward_scaled_all(bits, &mut self.arena[start..]);
        idx
    }

    fn remember(&mut self, turn: u32, bits: &Bits, idx: u32) -> Result<()> {
        self.entries += 1;
        if self.entries > self.config.limits.max_states {
            return Err(Error::tractability(format!(
                "exact solver exceeded {} memoized states",
                self.config.limits.max_states
            )));
        }
        self.memo[turn as usize].insert(bits.clone(), idx);
        Ok(())
    }

    /// Arena slot holding the value vector of (`bits`, `turn`). Turns past the horizon
    /// are terminal.
    pub fn solve(&mut self, bits: &Bits, turn: u32) -> Result<u32> {
        let turn = turn.min(self.config.horizon);
        if let Some(&idx) = self.memo[turn as usize].get(bits) {
            return Ok(idx);
        }
        let idx = if turn == self.config.horizon {
            self.push_terminal(bits)
        } else {
            let rej = self.solve(bits, turn + 1)?;
            let p = (turn as usize) % self.game.num_players();
            let mut best = rej;
            let mut next = bits.clone();
            for m in 0..self.game.num_players() {
                if m == p {
                    continue;
                }
                let cands = Candidates::new(self.game, bits, p, m, self.config.k);
                cands.check_limit(self.config.limits.max_candidates)?;
                let base_m = self.component(rej, m);
                for (i, j) in cands.pairs() {
                    cands.apply(bits, i, j, &mut next);
                    if self.game.violates_exclusions(&next) {
                        continue;
                    }
                    let child = self.solve(&next, turn + 1)?;
                    if self.component(child, m) >= base_m && self.component(child, p) > self.component(best, p) {
                        best = child;
                    }
                }
            }
            best
        };
        self.remember(turn, bits, idx)?;
        Ok(idx)
    }

    /// The proposer's exact best offer to one partner against the rejection continuation.
    pub(crate) fn best_offer(&mut self, bits: &Bits, turn: u32, proposer: usize, partner: usize) -> Result<Option<OfferChoice>> {
        if turn >= self.config.horizon {
            return Ok(None);
        }
        let rej = self.solve(bits, turn + 1)?;
        let cands = Candidates::new(self.game, bits, proposer, partner, self.config.k);
        cands.check_limit(self.config.limits.max_candidates)?;
        let base_m = self.component(rej, partner);
        let mut best_v = self.component(rej, proposer);
        let mut best = None;
        let mut next = bits.clone();
        for (i, j) in cands.pairs() {
            cands.apply(bits, i, j, &mut next);
            if self.game.violates_exclusions(&next) {
                continue;
            }
            let child = self.solve(&next, turn + 1)?;
            let vp = self.component(child, proposer);
            if self.component(child, partner) >= base_m && vp > best_v {
                best_v = vp;
                best = Some((i, j));
            }
        }
        Ok(best.map(|(i, j)| {
            cands.apply(bits, i, j, &mut next);
            OfferChoice {
                update: cands.joint_update(self.game, i, j),
                bits: next,
            }
        }))
    }

    /// The proposer's exact one-ply partner choice: the partner whose best offer gives
    /// the proposer the highest continuation value (lowest index on ties, and only
    /// when it strictly beats rejection). Returns the partner and its offer.
    pub(crate) fn choose(&mut self, bits: &Bits, turn: u32, proposer: usize) -> Result<(Option<usize>, Option<OfferChoice>)> {
        let np = self.game.num_players();
        let mut chosen: Option<(usize, OfferChoice, i64)> = None;
        for m in (0..np).filter(|&m| m != proposer) {
            if let Some(offer) = self.best_offer(bits, turn, proposer, m)? {
                let idx = self.solve(&offer.bits, turn + 1)?;
                let v = self.component(idx, proposer);
                if chosen.as_ref().is_none_or(|c| v > c.2) {
                    chosen = Some((m, offer, v));
                }
            }
        }
        Ok(match chosen {
            Some((m, offer, _)) => (Some(m), Some(offer)),
            None => (None, None),
        })
    }
}

/// Exact value of `state` at its turn.
pub fn exact_value(game: &Game, state: &CommitmentState, config: ExactConfig) -> Result<PayoffVector> {
    game.check_state(state)?;
    let mut solver = ExactSolver::new(game, config)?;
    let idx = solver.solve(&state.bits, state.turn)?;
    Ok(game.to_payoffs(solver.vector(idx)))
}

/// Optimal self-interested terminal payoffs `r*` from the empty state.
pub fn optimal_payoffs(game: &Game, config: ExactConfig) -> Result<PayoffVector> {
    exact_value(game, &game.empty_state(), config)
}
