//! Game formalization: players, binding commitment state, goals and terminal reward.
//!
//! Payoffs are exact. Internally every game carries a common denominator
//! `D = utility_scale * L`, where `L` is the lcm of all linear goal sizes, so
//! satisfaction-weighted utilities become plain `i64` arithmetic. Public
//! results are reported as reduced [`Rational`]s.

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::generator::GeneratorConfig;
use crate::rational::{self, Rational};
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// A commitment slot: action `action` of player `player`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Slot {
    pub player: usize,
    pub action: usize,
}

impl Slot {
    pub fn new(player: usize, action: usize) -> Self {
        Slot { player, action }
    }
}

impl From<(usize, usize)> for Slot {
    fn from((player, action): (usize, usize)) -> Self {
        Slot { player, action }
    }
}

impl From<Slot> for (usize, usize) {
    fn from(s: Slot) -> Self {
        (s.player, s.action)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    Linear,
    AllOrNothing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub id: usize,
    pub kind: GoalKind,
    pub required: Vec<Slot>,
}

/// Integer utilities, one row per goal and one column per player.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoalUtilityMatrix {
    num_goals: usize,
    num_players: usize,
    values: Vec<i64>,
}

impl GoalUtilityMatrix {
    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        let num_goals = rows.len();
        let num_players = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != num_players) {
            return Err(Error::validation("utility rows have unequal lengths"));
        }
        Ok(GoalUtilityMatrix {
            num_goals,
            num_players,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn zeros(num_goals: usize, num_players: usize) -> Self {
        GoalUtilityMatrix {
            num_goals,
            num_players,
            values: vec![0; num_goals * num_players],
        }
    }

    #[inline]
    pub fn get(&self, goal: usize, player: usize) -> i64 {
        self.values[goal * self.num_players + player]
    }

    pub fn set(&mut self, goal: usize, player: usize, value: i64) {
        self.values[goal * self.num_players + player] = value;
    }

    pub fn num_goals(&self) -> usize {
        self.num_goals
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn row(&self, goal: usize) -> &[i64] {
        &self.values[goal * self.num_players..(goal + 1) * self.num_players]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.num_goals).map(|g| self.row(g).to_vec()).collect()
    }

    pub fn min(&self) -> i64 {
        self.values.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> i64 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    pub fn push_row(&mut self, row: Vec<i64>) {
        assert_eq!(row.len(), self.num_players);
        self.values.extend(row);
        self.num_goals += 1;
    }
}

/// Where a game came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Generator {
        seed: u64,
        config_hash: String,
        config: Box<GeneratorConfig>,
        /// Unordered player pairs that already received an injected poison pill.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        poison_pairs: Vec<(usize, usize)>,
    },
    Topfile {
        id: String,
    },
    Manual {
        label: String,
    },
}

/// Plain description of a game; [`Game::new`] validates it and builds the lookup tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameDef {
    pub num_players: usize,
    pub actions_per_player: Vec<usize>,
    pub goals: Vec<Goal>,
    pub utilities: Vec<Vec<i64>>,
    /// Utilities are stored as integers divided by this scale (1 for generated games).
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub utility_scale: i64,
    /// Sets of slots that may never all be committed together.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclusions: Vec<Vec<Slot>>,
    pub provenance: Provenance,
}

fn one() -> i64 {
    1
}

fn is_one(v: &i64) -> bool {
    *v == 1
}

/// Precomputed per-goal data for fast evaluation.
#[derive(Clone, Debug)]
struct GoalIndex {
    mask: Bits,
    size: u32,
    kind: GoalKind,
    /// Scaled satisfaction contributed by each committed slot (linear goals).
    unit: i64,
    /// Flat slot index and owning player of every required slot.
    members: Vec<(usize, usize)>,
}

/// A validated game with lookup tables for fast scaled evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GameDef", into = "GameDef")]
pub struct Game {
    def: GameDef,
    utilities: GoalUtilityMatrix,
    offsets: Vec<usize>,
    total_slots: usize,
    slot_owner: Vec<usize>,
    goals: Vec<GoalIndex>,
    /// lcm of linear goal sizes.
    lcm: i64,
    /// Non-zero utilities per player: (goal, value).
    player_goals: Vec<Vec<(usize, i64)>>,
    /// Goals requiring each slot.
    slot_goals: Vec<Vec<usize>>,
    exclusion_masks: Vec<Bits>,
}

impl PartialEq for Game {
    fn eq(&self, other: &Self) -> bool {
        self.def == other.def
    }
}

impl TryFrom<GameDef> for Game {
    type Error = Error;
    fn try_from(def: GameDef) -> Result<Self> {
        Game::new(def)
    }
}

impl From<Game> for GameDef {
    fn from(g: Game) -> Self {
        g.def
    }
}

fn checked_lcm(a: i64, b: i64) -> Option<i64> {
    (a / a.gcd(&b)).checked_mul(b)
}

impl Game {
    pub fn new(def: GameDef) -> Result<Self> {
        let np = def.num_players;
        if np < 2 {
            return Err(Error::validation(format!("a game needs at least 2 players, got {np}")));
        }
        if def.actions_per_player.len() != np {
            return Err(Error::validation(format!(
                "actions_per_player has {} entries for {np} players",
                def.actions_per_player.len()
            )));
        }
        if def.goals.is_empty() {
            return Err(Error::validation("a game needs at least 1 goal"));
        }
        if def.utility_scale < 1 {
            return Err(Error::validation("utility_scale must be positive"));
        }
        let utilities = GoalUtilityMatrix::from_rows(def.utilities.clone())?;
        if utilities.num_goals() != def.goals.len() || utilities.num_players() != np {
            return Err(Error::validation(format!(
                "utility matrix is {}x{}, expected {}x{np}",
                utilities.num_goals(),
                utilities.num_players(),
                def.goals.len()
            )));
        }

        let mut offsets = Vec::with_capacity(np);
        let mut total = 0usize;
        let mut slot_owner = Vec::new();
        for (p, &a) in def.actions_per_player.iter().enumerate() {
            offsets.push(total);
            total += a;
            slot_owner.extend(std::iter::repeat(p).take(a));
        }
        if total == 0 {
            return Err(Error::validation("a game needs at least one action slot"));
        }

        let resolve = |s: &Slot, what: &str| -> Result<usize> {
            if s.player >= np || s.action >= def.actions_per_player[s.player] {
                return Err(Error::validation(format!(
                    "{what} references slot ({}, {}) outside the game",
                    s.player, s.action
                )));
            }
            Ok(offsets[s.player] + s.action)
        };

        let mut ids = HashSet::new();
        let mut lcm = 1i64;
        let mut goals = Vec::with_capacity(def.goals.len());
        for goal in &def.goals {
            if !ids.insert(goal.id) {
                return Err(Error::validation(format!("duplicate goal id {}", goal.id)));
            }
            let what = format!("goal {}", goal.id);
            if goal.required.is_empty() {
                return Err(Error::validation(format!("{what} has no required commitments")));
            }
            if goal.kind == GoalKind::AllOrNothing && goal.required.len() < 2 {
                return Err(Error::validation(format!(
                    "{what} is all-or-nothing but requires fewer than 2 commitments"
                )));
            }
            let mut mask = Bits::zeros(total);
            let mut members = Vec::with_capacity(goal.required.len());
            for s in &goal.required {
                let idx = resolve(s, &what)?;
                if mask.get(idx) {
                    return Err(Error::validation(format!(
                        "{what} lists slot ({}, {}) twice",
                        s.player, s.action
                    )));
                }
                mask.set(idx);
                members.push((idx, s.player));
            }
            let size = goal.required.len() as i64;
            if goal.kind == GoalKind::Linear {
                lcm = checked_lcm(lcm, size)
                    .ok_or_else(|| Error::validation("goal sizes overflow the common denominator"))?;
            }
            goals.push(GoalIndex {
                mask,
                size: size as u32,
                kind: goal.kind,
                unit: 0,
                members,
            });
        }
        for g in &mut goals {
            g.unit = match g.kind {
                GoalKind::Linear => lcm / g.size as i64,
                GoalKind::AllOrNothing => lcm,
            };
        }

        // Every scaled payoff is bounded by sum |G| * L; keep well inside i64.
        let mut player_goals = vec![Vec::new(); np];
        for p in 0..np {
            let mut bound: i128 = 0;
            for g in 0..goals.len() {
                let v = utilities.get(g, p);
                bound += (v as i128).abs() * lcm as i128;
                if v != 0 {
                    player_goals[p].push((g, v));
                }
            }
            if bound > (i64::MAX / 8) as i128 {
                return Err(Error::validation(
                    "utility magnitudes times goal-size lcm overflow exact payoff arithmetic",
                ));
            }
        }

        let mut slot_goals = vec![Vec::new(); total];
        for (g, goal) in goals.iter().enumerate() {
            for &(slot, _) in &goal.members {
                slot_goals[slot].push(g);
            }
        }

        let mut exclusion_masks = Vec::with_capacity(def.exclusions.len());
        for (i, set) in def.exclusions.iter().enumerate() {
            if set.len() < 2 {
                return Err(Error::validation(format!("exclusion set {i} has fewer than 2 members")));
            }
            let mut mask = Bits::zeros(total);
            for s in set {
                let idx = resolve(s, &format!("exclusion set {i}"))?;
                mask.set(idx);
            }
            exclusion_masks.push(mask);
        }

        Ok(Game {
            def,
            utilities,
            offsets,
            total_slots: total,
            slot_owner,
            goals,
            lcm,
            player_goals,
            slot_goals,
            exclusion_masks,
        })
    }

    pub fn def(&self) -> &GameDef {
        &self.def
    }

    pub fn num_players(&self) -> usize {
        self.def.num_players
    }

    pub fn num_goals(&self) -> usize {
        self.def.goals.len()
    }

    pub fn actions_per_player(&self) -> &[usize] {
        &self.def.actions_per_player
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.def.actions_per_player[player]
    }

    pub fn goals(&self) -> &[Goal] {
        &self.def.goals
    }

    pub fn utilities(&self) -> &GoalUtilityMatrix {
        &self.utilities
    }

    #[inline]
    pub fn utility(&self, goal: usize, player: usize) -> i64 {
        self.utilities.get(goal, player)
    }

    pub fn utility_scale(&self) -> i64 {
        self.def.utility_scale
    }

    pub fn provenance(&self) -> &Provenance {
        &self.def.provenance
    }

    pub fn exclusions(&self) -> &[Vec<Slot>] {
        &self.def.exclusions
    }

    pub fn total_slots(&self) -> usize {
        self.total_slots
    }

    #[inline]
    pub fn slot_index(&self, player: usize, action: usize) -> usize {
        self.offsets[player] + action
    }

    pub fn slot_of(&self, index: usize) -> Slot {
        let p = self.slot_owner[index];
        Slot::new(p, index - self.offsets[p])
    }

    pub fn slot_owner(&self, index: usize) -> usize {
        self.slot_owner[index]
    }

    pub fn player_slots(&self, player: usize) -> std::ops::Range<usize> {
        let start = self.offsets[player];
        start..start + self.def.actions_per_player[player]
    }

    /// Denominator turning scaled payoffs into real payoffs.
    pub fn payoff_denominator(&self) -> i64 {
        self.def.utility_scale * self.lcm
    }

    pub fn goal_mask(&self, goal: usize) -> &Bits {
        &self.goals[goal].mask
    }

    pub fn goal_members(&self, goal: usize) -> &[(usize, usize)] {
        &self.goals[goal].members
    }

    /// Non-zero utilities of a player as (goal, integer utility).
    pub fn player_goals(&self, player: usize) -> &[(usize, i64)] {
        &self.player_goals[player]
    }

    /// Goals that require slot `index`.
    pub fn slot_goals(&self, index: usize) -> &[usize] {
        &self.slot_goals[index]
    }

    pub fn exclusion_masks(&self) -> &[Bits] {
        &self.exclusion_masks
    }

    /// True when `bits` fully commits some mutually exclusive set.
    #[inline]
    pub fn violates_exclusions(&self, bits: &Bits) -> bool {
        self.exclusion_masks.iter().any(|m| m.is_subset_of(bits))
    }

    /// Spread between the largest and smallest utility, in real payoff units.
    pub fn utility_span(&self) -> f64 {
        ((self.utilities.max() - self.utilities.min()) as f64 / self.def.utility_scale as f64).max(1.0)
    }

    pub fn empty_state(&self) -> CommitmentState {
        CommitmentState {
            bits: Bits::zeros(self.total_slots),
            turn: 0,
        }
    }

    /// The state with every slot committed.
    pub fn full_state(&self) -> CommitmentState {
        let mut bits = Bits::zeros(self.total_slots);
        for i in 0..self.total_slots {
            bits.set(i);
        }
        CommitmentState { bits, turn: 0 }
    }

    pub fn state_from_slots(&self, slots: &[Slot], turn: u32) -> Result<CommitmentState> {
        let mut bits = Bits::zeros(self.total_slots);
        for s in slots {
            if s.player >= self.num_players() || s.action >= self.num_actions(s.player) {
                return Err(Error::validation(format!("slot ({}, {}) outside the game", s.player, s.action)));
            }
            bits.set(self.slot_index(s.player, s.action));
        }
        Ok(CommitmentState { bits, turn })
    }

    /// Commitment matrix as one 0/1 row per player.
    pub fn state_rows(&self, state: &CommitmentState) -> Vec<Vec<u8>> {
        (0..self.num_players())
            .map(|p| self.player_slots(p).map(|i| state.bits.get(i) as u8).collect())
            .collect()
    }

    pub fn state_from_rows(&self, rows: &[Vec<u8>], turn: u32) -> Result<CommitmentState> {
        if rows.len() != self.num_players() {
            return Err(Error::validation("state has the wrong number of player rows"));
        }
        let mut bits = Bits::zeros(self.total_slots);
        for (p, row) in rows.iter().enumerate() {
            if row.len() != self.num_actions(p) {
                return Err(Error::validation(format!("state row {p} has the wrong length")));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => bits.set(self.slot_index(p, j)),
                    _ => return Err(Error::validation("state entries must be 0 or 1")),
                }
            }
        }
        Ok(CommitmentState { bits, turn })
    }

    pub fn check_state(&self, state: &CommitmentState) -> Result<()> {
        let words = self.total_slots.div_ceil(64).max(1);
        if state.bits.words().len() != words {
            return Err(Error::validation("state dimensions do not match the game"));
        }
        if state.bits.ones().any(|i| i >= self.total_slots) {
            return Err(Error::validation("state sets entries outside the game's slots"));
        }
        Ok(())
    }

    /// Satisfaction of goal `g` scaled by `L`.
    #[inline]
    pub fn satisfaction_scaled(&self, g: usize, bits: &Bits) -> i64 {
        let goal = &self.goals[g];
        let c = bits.count_and(&goal.mask);
        match goal.kind {
            GoalKind::Linear => c as i64 * goal.unit,
            GoalKind::AllOrNothing => {
                if c == goal.size {
                    goal.unit
                } else {
                    0
                }
            }
        }
    }

    /// Scaled reward of one player.
    #[inline]
    pub fn reward_scaled(&self, bits: &Bits, player: usize) -> i64 {
        self.player_goals[player]
            .iter()
            .map(|&(g, v)| v * self.satisfaction_scaled(g, bits))
            .sum()
    }

    /// Scaled rewards of all players, written into `out`.
    pub fn reward_scaled_all(&self, bits: &Bits, out: &mut [i64]) {
        out.iter_mut().for_each(|v| *v = 0);
        for g in 0..self.goals.len() {
            let s = self.satisfaction_scaled(g, bits);
            if s == 0 {
                continue;
            }
            for (p, o) in out.iter_mut().enumerate() {
                *o += self.utilities.get(g, p) * s;
            }
        }
    }

    pub fn to_rational(&self, scaled: i64) -> Rational {
        Rational::new(scaled as i128, self.payoff_denominator() as i128)
    }

    pub fn to_payoffs(&self, scaled: &[i64]) -> PayoffVector {
        PayoffVector::new(scaled.iter().map(|&v| self.to_rational(v)).collect())
    }

    /// Fraction of required commitments made (linear) or 0/1 (all-or-nothing).
    pub fn goal_satisfaction(&self, g: usize, state: &CommitmentState) -> Result<Rational> {
        self.check_state(state)?;
        if g >= self.goals.len() {
            return Err(Error::validation(format!("goal index {g} outside the game")));
        }
        Ok(Rational::new(
            self.satisfaction_scaled(g, &state.bits) as i128,
            self.lcm as i128,
        ))
    }

    pub fn satisfaction_vector(&self, state: &CommitmentState) -> Result<Vec<Rational>> {
        self.check_state(state)?;
        Ok((0..self.goals.len())
            .map(|g| Rational::new(self.satisfaction_scaled(g, &state.bits) as i128, self.lcm as i128))
            .collect())
    }

    /// `R(C) = G^T S(C)`.
    pub fn reward_vector(&self, state: &CommitmentState) -> Result<PayoffVector> {
        self.check_state(state)?;
        let mut out = vec![0i64; self.num_players()];
        self.reward_scaled_all(&state.bits, &mut out);
        Ok(self.to_payoffs(&out))
    }

    /// Canonical JSON serialization.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.def).expect("game serializes");
        s.push('\n');
        s
    }

    /// Hex SHA-256 of the canonical JSON, truncated to 16 hex digits.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(&Sha256::digest(self.to_json().as_bytes())[..8])
    }

    pub fn from_json(text: &str) -> Result<Game> {
        let def: GameDef = serde_json::from_str(text)?;
        Game::new(def)
    }
}

/// Binding commitment state `C^(t)`: a packed player-by-action 0/1 matrix and the turn index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CommitmentState {
    pub bits: Bits,
    pub turn: u32,
}

impl CommitmentState {
    pub fn is_committed(&self, game: &Game, player: usize, action: usize) -> bool {
        self.bits.get(game.slot_index(player, action))
    }

    /// Actions of `player` not yet committed.
    pub fn free_actions(&self, game: &Game, player: usize) -> Vec<usize> {
        (0..game.num_actions(player))
            .filter(|&j| !self.is_committed(game, player, j))
            .collect()
    }

    /// True when every entry set in `self` is also set in `later`.
    pub fn precedes(&self, later: &CommitmentState) -> bool {
        self.bits.is_subset_of(&later.bits)
    }
}

/// Per-player terminal payoffs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PayoffVector {
    #[serde(with = "rational::vec_as_strings")]
    values: Vec<Rational>,
}

impl PayoffVector {
    pub fn new(values: Vec<Rational>) -> Self {
        PayoffVector { values }
    }

    pub fn zeros(n: usize) -> Self {
        PayoffVector {
            values: vec![Rational::from_integer(0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn get(&self, n: usize) -> Rational {
        self.values[n]
    }

    pub fn total(&self) -> Rational {
        self.values.iter().sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(rational::to_f64).collect()
    }
}

impl std::ops::Index<usize> for PayoffVector {
    type Output = Rational;
    fn index(&self, i: usize) -> &Rational {
        &self.values[i]
    }
}
