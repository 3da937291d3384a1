//! Value-function approximations: each maps a commitment state to an estimated
//! terminal payoff per player.
//!
//! * myopic reward: the current reward, ignoring future negotiation;
//! * upper bound: assumes every positively valued goal still gets completed;
//! * lower bound with credible threats: assumes harmful goals get completed by
//!   contributors who do not object to them.
//!
//! All values are exact. The `*_scaled` functions work in the game's common
//! denominator (see [`Game::payoff_denominator`]).

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::model::{CommitmentState, Game, PayoffVector};
use crate::rational::Rational;
use crate::solvers::exact::{ExactConfig, ExactSolver};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueKind {
    #[serde(rename = "reward")]
    MyopicReward,
    #[serde(rename = "upper")]
    UpperBound,
    #[serde(rename = "lower")]
    LowerBoundCt,
    #[serde(rename = "exact")]
    Exact,
}

impl ValueKind {
    pub const APPROXIMATIONS: [ValueKind; 3] =
        [ValueKind::MyopicReward, ValueKind::UpperBound, ValueKind::LowerBoundCt];

    pub fn label(self) -> &'static str {
        match self {
            ValueKind::MyopicReward => "reward",
            ValueKind::UpperBound => "upper",
            ValueKind::LowerBoundCt => "lower",
            ValueKind::Exact => "exact",
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ValueKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reward" | "myopic" | "myopic_reward" => Ok(ValueKind::MyopicReward),
            "upper" | "upper_bound" => Ok(ValueKind::UpperBound),
            "lower" | "lower_ct" | "lower_bound" => Ok(ValueKind::LowerBoundCt),
            "exact" => Ok(ValueKind::Exact),
            other => Err(Error::validation(format!(
                "unknown value approximation {other:?} (expected reward|upper|lower|exact)"
            ))),
        }
    }
}

/// Which goals count as credible threats when only the threatened player can still
/// complete them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreatPolicy {
    /// The quantifier over other pending contributors is vacuously true: such goals count.
    #[default]
    Literal,
    /// Require at least one other player with a pending action for the goal.
    ExcludeSelfOnly,
}

impl FromStr for ThreatPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(ThreatPolicy::Literal),
            "exclude_self_only" | "exclude-self-only" => Ok(ThreatPolicy::ExcludeSelfOnly),
            other => Err(Error::validation(format!(
                "unknown threat policy {other:?} (expected literal|exclude_self_only)"
            ))),
        }
    }
}

/// True when goal `g` is a credible threat to `player` in `bits`.
///
/// The goal must hurt the player, still have something pending, and every other
/// player with a pending required action must value it non-negatively.
pub fn is_credible_threat(game: &Game, bits: &Bits, g: usize, player: usize, policy: ThreatPolicy) -> bool {
    if game.utility(g, player) >= 0 {
        return false;
    }
    let mut any_pending = false;
    let mut other_pending = false;
    for &(slot, owner) in game.goal_members(g) {
        if bits.get(slot) {
            continue;
        }
        any_pending = true;
        if owner != player {
            other_pending = true;
            if game.utility(g, owner) < 0 {
                return false;
            }
        }
    }
    match policy {
        ThreatPolicy::Literal => any_pending,
        ThreatPolicy::ExcludeSelfOnly => other_pending,
    }
}

/// Contribution of goal `g` with utility `v` to a player's value. Every approximation
/// is a sum of such per-goal terms.
#[inline]
pub fn goal_term_scaled(kind: ValueKind, game: &Game, bits: &Bits, g: usize, v: i64, player: usize, policy: ThreatPolicy) -> i64 {
    let l = game.payoff_denominator() / game.utility_scale();
    match kind {
        ValueKind::MyopicReward => v * game.satisfaction_scaled(g, bits),
        ValueKind::UpperBound => {
            if v > 0 {
                v * l
            } else {
                v * game.satisfaction_scaled(g, bits)
            }
        }
        ValueKind::LowerBoundCt => {
            let s = game.satisfaction_scaled(g, bits);
            if v < 0 && is_credible_threat(game, bits, g, player, policy) {
                v * l
            } else {
                v * s
            }
        }
        ValueKind::Exact => panic!("exact values are not a sum of goal terms"),
    }
}

#[inline]
pub fn upper_scaled(game: &Game, bits: &Bits, player: usize) -> i64 {
    approx_scaled(ValueKind::UpperBound, game, bits, player, ThreatPolicy::default())
}

#[inline]
pub fn lower_scaled(game: &Game, bits: &Bits, player: usize, policy: ThreatPolicy) -> i64 {
    approx_scaled(ValueKind::LowerBoundCt, game, bits, player, policy)
}

/// Scaled value of a non-exact approximation.
#[inline]
pub fn approx_scaled(kind: ValueKind, game: &Game, bits: &Bits, player: usize, policy: ThreatPolicy) -> i64 {
    game.player_goals(player)
        .iter()
        .map(|&(g, v)| goal_term_scaled(kind, game, bits, g, v, player, policy))
        .sum()
}

fn check_player(game: &Game, player: usize) -> Result<()> {
    if player >= game.num_players() {
        return Err(Error::validation(format!("player {player} outside the game")));
    }
    Ok(())
}

/// Myopic reward: identical to the reward vector.
pub fn value_reward(game: &Game, state: &CommitmentState) -> Result<PayoffVector> {
    game.reward_vector(state)
}

/// Optimistic completion of every positively valued goal.
pub fn value_upper(game: &Game, state: &CommitmentState, player: usize) -> Result<Rational> {
    game.check_state(state)?;
    check_player(game, player)?;
    Ok(game.to_rational(upper_scaled(game, &state.bits, player)))
}

/// Ids of goals that are credible threats to `player`.
pub fn credible_threats(game: &Game, state: &CommitmentState, player: usize, policy: ThreatPolicy) -> Result<Vec<usize>> {
    game.check_state(state)?;
    check_player(game, player)?;
    Ok((0..game.num_goals())
        .filter(|&g| is_credible_threat(game, &state.bits, g, player, policy))
        .map(|g| game.goals()[g].id)
        .collect())
}

/// Reward plus the pending damage of every credible threat.
pub fn value_lower(game: &Game, state: &CommitmentState, player: usize, policy: ThreatPolicy) -> Result<Rational> {
    game.check_state(state)?;
    check_player(game, player)?;
    Ok(game.to_rational(lower_scaled(game, &state.bits, player, policy)))
}

/// Serializable choice of value approximation for a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueSpec {
    pub kind: ValueKind,
    /// Per-player override; off by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_player: Option<Vec<ValueKind>>,
    #[serde(default)]
    pub threat_policy: ThreatPolicy,
}

impl ValueSpec {
    pub fn new(kind: ValueKind) -> Self {
        ValueSpec {
            kind,
            per_player: None,
            threat_policy: ThreatPolicy::default(),
        }
    }

    pub fn label(&self) -> String {
        match &self.per_player {
            None => self.kind.label().to_string(),
            Some(kinds) => kinds.iter().map(|k| k.label()).collect::<Vec<_>>().join(","),
        }
    }

    /// Binds the spec to a game. Exact values use `exact` for the horizon and budget.
    pub fn build<'g>(&self, game: &'g Game, exact: ExactConfig) -> Result<ValueApproximation<'g>> {
        match (&self.per_player, self.kind) {
            (Some(kinds), _) => ValueApproximation::per_player(game, kinds.clone(), self.threat_policy),
            (None, ValueKind::Exact) => ValueApproximation::exact(game, exact),
            (None, kind) => ValueApproximation::new(game, kind, self.threat_policy),
        }
    }
}

/// A value approximation bound to one game, optionally heterogeneous across players.
///
/// Exact values delegate to an [`ExactSolver`] whose memo table persists across calls,
/// so one instance should be reused for a whole playthrough.
pub struct ValueApproximation<'g> {
    game: &'g Game,
    kinds: Vec<ValueKind>,
    policy: ThreatPolicy,
    exact: Option<RefCell<ExactSolver<'g>>>,
}

impl<'g> ValueApproximation<'g> {
    /// Same non-exact approximation for every player.
    pub fn new(game: &'g Game, kind: ValueKind, policy: ThreatPolicy) -> Result<Self> {
        if kind == ValueKind::Exact {
            return Err(Error::validation("exact values need solver limits; use ValueApproximation::exact"));
        }
        Ok(ValueApproximation {
            game,
            kinds: vec![kind; game.num_players()],
            policy,
            exact: None,
        })
    }

    /// One approximation per player. Exact is not allowed in a mix.
    pub fn per_player(game: &'g Game, kinds: Vec<ValueKind>, policy: ThreatPolicy) -> Result<Self> {
        if kinds.len() != game.num_players() {
            return Err(Error::validation("need one value approximation per player"));
        }
        if kinds.contains(&ValueKind::Exact) {
            return Err(Error::validation("exact values cannot be mixed with approximations"));
        }
        Ok(ValueApproximation {
            game,
            kinds,
            policy,
            exact: None,
        })
    }

    /// Exact continuation values under the fixed protocol.
    pub fn exact(game: &'g Game, config: ExactConfig) -> Result<Self> {
        let solver = ExactSolver::new(game, config)?;
        Ok(ValueApproximation {
            game,
            kinds: vec![ValueKind::Exact; game.num_players()],
            policy: ThreatPolicy::default(),
            exact: Some(RefCell::new(solver)),
        })
    }

    pub fn game(&self) -> &'g Game {
        self.game
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// The approximation used by every player, if homogeneous.
    pub fn kind(&self) -> Option<ValueKind> {
        let k = self.kinds[0];
        self.kinds.iter().all(|&x| x == k).then_some(k)
    }

    pub fn kind_of(&self, player: usize) -> ValueKind {
        self.kinds[player]
    }

    pub fn policy(&self) -> ThreatPolicy {
        self.policy
    }

    pub fn exact_solver(&self) -> Option<&RefCell<ExactSolver<'g>>> {
        self.exact.as_ref()
    }

    /// Change in `player`'s scaled value from `from` to `to`, given the goals whose
    /// state differs. Only valid for non-exact approximations.
    #[inline]
    pub fn delta_scaled(&self, from: &Bits, to: &Bits, touched: &[usize], player: usize) -> i64 {
        let kind = self.kinds[player];
        touched
            .iter()
            .map(|&g| {
                let v = self.game.utility(g, player);
                if v == 0 {
                    0
                } else {
                    goal_term_scaled(kind, self.game, to, g, v, player, self.policy)
                        - goal_term_scaled(kind, self.game, from, g, v, player, self.policy)
                }
            })
            .sum()
    }

    /// Scaled value of `player` at (`bits`, `turn`).
    #[inline]
    pub fn value_scaled(&self, bits: &Bits, turn: u32, player: usize) -> Result<i64> {
        match &self.exact {
            Some(solver) => {
                let mut s = solver.borrow_mut();
                let idx = s.solve(bits, turn)?;
                Ok(s.component(idx, player))
            }
            None => Ok(approx_scaled(self.kinds[player], self.game, bits, player, self.policy)),
        }
    }

    /// Scaled values of every player, written into `out`.
    pub fn vector_scaled(&self, bits: &Bits, turn: u32, out: &mut [i64]) -> Result<()> {
        match &self.exact {
            Some(solver) => {
                let mut s = solver.borrow_mut();
                let idx = s.solve(bits, turn)?;
                out.copy_from_slice(s.vector(idx));
            }
            None => {
                if self.kinds.iter().all(|&k| k == ValueKind::MyopicReward) {
                    self.game.reward_scaled_all(bits, out);
                } else {
                    for (p, o) in out.iter_mut().enumerate() {
                        *o = approx_scaled(self.kinds[p], self.game, bits, p, self.policy);
                    }
                }
            }
        }
        Ok(())
    }
}

/// The chosen approximation for every player at `state`.
pub fn evaluate(approx: &ValueApproximation<'_>, game: &Game, state: &CommitmentState) -> Result<PayoffVector> {
    if !std::ptr::eq(approx.game(), game) && approx.game() != game {
        return Err(Error::validation("value approximation is bound to a different game"));
    }
    game.check_state(state)?;
    let mut out = vec![0i64; game.num_players()];
    approx.vector_scaled(&state.bits, state.turn, &mut out)?;
    Ok(game.to_payoffs(&out))
}
