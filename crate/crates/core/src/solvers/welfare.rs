//! One-shot welfare optima over all binary commitment assignments.
//!
//! A central planner picks the final commitment matrix directly. Utilitarian welfare
//! maximizes the payoff sum (exact, scaled integers); Nash welfare maximizes the sum of
//! log payoffs subject to every payoff being at least `delta`. Ties go to the higher
//! payoff sum, then to the lexicographically smallest assignment (slot order, 0 < 1).
//! All-or-nothing goals are handled by branching, not linearization.

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::model::{CommitmentState, Game, GoalKind, PayoffVector};
use crate::rational::{self, Rational};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

pub const DEFAULT_DELTA: f64 = 1e-6;

/// Number of slots up to which the exhaustive reference is practical.
pub const EXHAUSTIVE_MAX_SLOTS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WelfareObjective {
    Utilitarian,
    Nash,
}

impl std::str::FromStr for WelfareObjective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "utilitarian" | "sum" => Ok(WelfareObjective::Utilitarian),
            "nash" => Ok(WelfareObjective::Nash),
            other => Err(Error::validation(format!("unknown welfare objective {other:?} (expected utilitarian|nash)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    ProvedOptimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelfareSolution {
    pub objective: WelfareObjective,
    pub certificate: Certificate,
    /// Commitment matrix, one 0/1 row per player. Absent when infeasible.
    pub assignment: Option<Vec<Vec<u8>>>,
    #[serde(with = "rational::vec_as_strings")]
    pub satisfaction: Vec<Rational>,
    pub payoffs: Option<PayoffVector>,
    /// Payoff sum at the optimum.
    #[serde(with = "opt_rational")]
    pub utilitarian_value: Option<Rational>,
    /// Sum of natural-log payoffs at the Nash optimum.
    pub nash_log_value: Option<f64>,
    /// Search nodes visited.
    pub nodes: u64,
}

mod opt_rational {
    use crate::rational::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|r| format_rational(&r)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Per-goal tables shared by both search paths.
struct Tables<'g> {
    game: &'g Game,
    np: usize,
    l: i64,
    /// (slot, goal) memberships per slot.
    slot_goals: Vec<Vec<usize>>,
    sizes: Vec<usize>,
    kinds: Vec<GoalKind>,
    units: Vec<i64>,
    /// Column sums of the utility matrix.
    goal_weight: Vec<i64>,
    delta_scaled: f64,
}

impl<'g> Tables<'g> {
    fn new(game: &'g Game, delta: f64) -> Tables<'g> {
        let mut slot_goals = vec![Vec::new(); game.total_slots()];
        let l = game.payoff_denominator() / game.utility_scale();
        let mut sizes = Vec::new();
        let mut kinds = Vec::new();
        let mut units = Vec::new();
        for (g, goal) in game.goals().iter().enumerate() {
            for &(slot, _) in game.goal_members(g) {
                slot_goals[slot].push(g);
            }
            let n = goal.required.len();
            sizes.push(n);
            kinds.push(goal.kind);
            units.push(match goal.kind {
                GoalKind::Linear => l / n as i64,
                GoalKind::AllOrNothing => l,
            });
        }
        let goal_weight = (0..game.num_goals()).map(|g| game.utilities().row(g).iter().sum()).collect();
        Tables {
            game,
            np: game.num_players(),
            l,
            slot_goals,
            sizes,
            kinds,
            units,
            goal_weight,
            delta_scaled: delta * game.payoff_denominator() as f64,
        }
    }

    #[inline]
    fn sat(&self, g: usize, committed: usize) -> i64 {
        match self.kinds[g] {
            GoalKind::Linear => committed as i64 * self.units[g],
            GoalKind::AllOrNothing => {
                if committed == self.sizes[g] {
                    self.l
                } else {
                    0
                }
            }
        }
    }

    fn payoffs(&self, counts: &[usize], out: &mut [i64]) {
        out.iter_mut().for_each(|v| *v = 0);
        for (g, &c) in counts.iter().enumerate() {
            let s = self.sat(g, c);
            if s != 0 {
                for (p, o) in out.iter_mut().enumerate() {
                    *o += self.game.utility(g, p) * s;
                }
            }
        }
    }

    fn nash_log(&self, y: &[i64]) -> Option<f64> {
        if y.iter().any(|&v| (v as f64) < self.delta_scaled) {
            return None;
        }
        let d = self.game.payoff_denominator() as f64;
        Some(y.iter().map(|&v| (v as f64 / d).ln()).sum())
    }
}

/// Incumbent comparison: objective, then payoff sum. Earlier assignments win exact ties.
#[derive(Clone, Debug)]
struct Score {
    nash: f64,
    sum: i64,
}

fn nash_tolerance(a: f64) -> f64 {
    1e-12 * a.abs().max(1.0)
}

fn better(objective: WelfareObjective, new: &Score, old: Option<&Score>) -> bool {
    let Some(old) = old else { return true };
    match objective {
        WelfareObjective::Utilitarian => new.sum > old.sum,
        WelfareObjective::Nash => {
            let tol = nash_tolerance(old.nash);
            if new.nash > old.nash + tol {
                true
            } else if new.nash < old.nash - tol {
                false
            } else {
                new.sum > old.sum
            }
        }
    }
}

struct Search<'t, 'g> {
    t: &'t Tables<'g>,
    objective: WelfareObjective,
    assign: Bits,
    counts: Vec<usize>,
    remaining: Vec<usize>,
    best: Option<(Score, Bits)>,
    y: Vec<i64>,
    nodes: u64,
}

impl Search<'_, '_> {
    /// Optimistic per-goal satisfaction bounds for the current partial assignment.
    fn sat_bounds(&self, g: usize) -> (i64, i64) {
        let c = self.counts[g];
        (self.t.sat(g, c), self.t.sat(g, c + self.remaining[g]))
    }

    fn prune(&self) -> bool {
        let t = self.t;
        match self.objective {
            WelfareObjective::Utilitarian => {
                let Some((best, _)) = &self.best else { return false };
                let bound: i64 = (0..t.kinds.len())
                    .map(|g| {
                        let (lo, hi) = self.sat_bounds(g);
                        let w = t.goal_weight[g];
                        if w > 0 {
                            w * hi
                        } else {
                            w * lo
                        }
                    })
                    .sum();
                bound <= best.sum
            }
            WelfareObjective::Nash => {
                let mut opt = vec![0i64; t.np];
                for g in 0..t.kinds.len() {
                    let (lo, hi) = self.sat_bounds(g);
                    for (p, o) in opt.iter_mut().enumerate() {
                        let u = t.game.utility(g, p);
                        *o += if u > 0 { u * hi } else { u * lo };
                    }
                }
                let Some(bound) = t.nash_log(&opt) else { return true };
                match &self.best {
                    Some((best, _)) => bound < best.nash - nash_tolerance(best.nash),
                    None => false,
                }
            }
        }
    }

    fn leaf(&mut self) {
        self.t.payoffs(&self.counts, &mut self.y);
        let sum = self.y.iter().sum();
        let nash = match self.objective {
            WelfareObjective::Utilitarian => 0.0,
            WelfareObjective::Nash => match self.t.nash_log(&self.y) {
                Some(v) => v,
                None => return,
            },
        };
        let score = Score { nash, sum };
        if better(self.objective, &score, self.best.as_ref().map(|b| &b.0)) {
            self.best = Some((score, self.assign.clone()));
        }
    }

    fn dfs(&mut self, slot: usize) {
        self.nodes += 1;
        if slot == self.t.game.total_slots() {
            self.leaf();
            return;
        }
        if self.prune() {
            return;
        }
        for &g in &self.t.slot_goals[slot] {
            self.remaining[g] -= 1;
        }
        self.dfs(slot + 1);
        self.assign.set(slot);
        if !self.t.game.violates_exclusions(&self.assign) {
            for &g in &self.t.slot_goals[slot] {
                self.counts[g] += 1;
            }
            self.dfs(slot + 1);
            for &g in &self.t.slot_goals[slot] {
                self.counts[g] -= 1;
            }
        }
        self.assign.clear(slot);
        for &g in &self.t.slot_goals[slot] {
            self.remaining[g] += 1;
        }
    }
}

fn check_delta(objective: WelfareObjective, delta: f64) -> Result<()> {
    if objective == WelfareObjective::Nash && !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::validation("Nash welfare needs a positive finite delta"));
    }
    Ok(())
}

fn finish(game: &Game, objective: WelfareObjective, best: Option<(Score, Bits)>, nodes: u64) -> Result<WelfareSolution> {
    let Some((score, bits)) = best else {
        return Ok(WelfareSolution {
            objective,
            certificate: Certificate::Infeasible,
            assignment: None,
            satisfaction: vec![],
            payoffs: None,
            utilitarian_value: None,
            nash_log_value: None,
            nodes,
        });
    };
    let state = CommitmentState { bits, turn: 0 };
    Ok(WelfareSolution {
        objective,
        certificate: Certificate::ProvedOptimal,
        assignment: Some(game.state_rows(&state)),
        satisfaction: game.satisfaction_vector(&state)?,
        payoffs: Some(game.reward_vector(&state)?),
        utilitarian_value: Some(game.to_rational(score.sum)),
        nash_log_value: (objective == WelfareObjective::Nash).then_some(score.nash),
        nodes,
    })
}

/// Exact welfare optimum by depth-first branch-and-bound.
pub fn solve_welfare(game: &Game, objective: WelfareObjective, delta: f64) -> Result<WelfareSolution> {
    check_delta(objective, delta)?;
    let t = Tables::new(game, delta);
    let mut search = Search {
        t: &t,
        objective,
        assign: Bits::zeros(game.total_slots()),
        counts: vec![0; game.num_goals()],
        remaining: t.sizes.clone(),
        best: None,
        y: vec![0; game.num_players()],
        nodes: 0,
    };
    search.dfs(0);
    let (best, nodes) = (search.best, search.nodes);
    finish(game, objective, best, nodes)
}

/// Reference optimum by enumerating every assignment in lexicographic order.
pub fn solve_welfare_exhaustive(game: &Game, objective: WelfareObjective, delta: f64) -> Result<WelfareSolution> {
    check_delta(objective, delta)?;
    let n = game.total_slots();
    if n > EXHAUSTIVE_MAX_SLOTS {
        return Err(Error::tractability(format!(
            "exhaustive welfare search over {n} slots exceeds {EXHAUSTIVE_MAX_SLOTS}"
        )));
    }
    let t = Tables::new(game, delta);
    let mut best: Option<(Score, Bits)> = None;
    let mut y = vec![0i64; game.num_players()];
    for code in 0u64..(1u64 << n) {
        // Slot 0 is the most significant position.
        let mut bits = Bits::zeros(n);
        for i in 0..n {
            if code >> (n - 1 - i) & 1 == 1 {
                bits.set(i);
            }
        }
        if game.violates_exclusions(&bits) {
            continue;
        }
        let counts: Vec<usize> = (0..game.num_goals()).map(|g| bits.count_and(game.goal_mask(g)) as usize).collect();
        t.payoffs(&counts, &mut y);
        let sum: i64 = y.iter().sum();
        let nash = match objective {
            WelfareObjective::Utilitarian => 0.0,
            WelfareObjective::Nash => match t.nash_log(&y) {
                Some(v) => v,
                None => continue,
            },
        };
        let score = Score { nash, sum };
        if better(objective, &score, best.as_ref().map(|b| &b.0)) {
            best = Some((score, bits));
        }
    }
    finish(game, objective, best, 1u64 << n)
}

impl WelfareSolution {
    /// Compares the parts that define the optimum, ignoring search statistics.
    pub fn same_optimum(&self, other: &WelfareSolution) -> bool {
        self.certificate == other.certificate
            && self.assignment == other.assignment
            && self.payoffs == other.payoffs
            && match (self.nash_log_value, other.nash_log_value) {
                (Some(a), Some(b)) => a.partial_cmp(&b) == Some(Ordering::Equal),
                (None, None) => true,
                _ => false,
            }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::poison_pill;
    use crate::model::{GameDef, Goal, Provenance, Slot};

    #[test]
    fn poison_pill_welfare() {
        let game = poison_pill();
        let u = solve_welfare(&game, WelfareObjective::Utilitarian, DEFAULT_DELTA).unwrap();
        assert_eq!(u.utilitarian_value, Some(Rational::from_integer(60)));
        assert_eq!(u.assignment, Some(vec![vec![1], vec![1, 0]]));
        let n = solve_welfare(&game, WelfareObjective::Nash, DEFAULT_DELTA).unwrap();
        assert_eq!(n.assignment, Some(vec![vec![1], vec![1, 0]]));
        assert!((n.nash_log_value.unwrap() - 900f64.ln()).abs() < 1e-9);
        for obj in [WelfareObjective::Utilitarian, WelfareObjective::Nash] {
            let a = solve_welfare(&game, obj, DEFAULT_DELTA).unwrap();
            let b = solve_welfare_exhaustive(&game, obj, DEFAULT_DELTA).unwrap();
            assert!(a.same_optimum(&b));
        }
    }

    #[test]
    fn all_negative_is_nash_infeasible() {
        let game = Game::new(GameDef {
            num_players: 2,
            actions_per_player: vec![1, 1],
            goals: vec![Goal {
                id: 0,
                kind: GoalKind::Linear,
                required: vec![Slot::new(0, 0), Slot::new(1, 0)],
            }],
            utilities: vec![vec![-3, -2]],
            utility_scale: 1,
            exclusions: vec![],
            provenance: Provenance::Manual { label: "neg".into() },
        })
        .unwrap();
        let n = solve_welfare(&game, WelfareObjective::Nash, DEFAULT_DELTA).unwrap();
        assert_eq!(n.certificate, Certificate::Infeasible);
        let u = solve_welfare(&game, WelfareObjective::Utilitarian, DEFAULT_DELTA).unwrap();
        assert_eq!(u.utilitarian_value, Some(Rational::from_integer(0)));
        assert!(solve_welfare(&game, WelfareObjective::Nash, 0.0).is_err());
    }
}
