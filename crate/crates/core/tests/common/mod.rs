//! Independent reference implementations used as test oracles. Everything here works on
//! the plain `GameDef` with exact rationals and never calls the library's evaluators.
#![allow(dead_code)]

use negobench::generator::{generate_game, ActionCounts, Alignment, GeneratorConfig, PayoffRegime};
use negobench::{CommitmentState, Game, GameDef, GoalKind, Rational};
use rand::Rng;

pub type Rows = Vec<Vec<bool>>;

pub fn r(n: i128) -> Rational {
    Rational::from_integer(n)
}

pub fn empty_rows(def: &GameDef) -> Rows {
    def.actions_per_player.iter().map(|&a| vec![false; a]).collect()
}

pub fn rows_of(game: &Game, state: &CommitmentState) -> Rows {
    game.state_rows(state)
        .into_iter()
        .map(|row| row.into_iter().map(|x| x == 1).collect())
        .collect()
}

pub fn state_of(game: &Game, rows: &Rows, turn: u32) -> CommitmentState {
    let raw: Vec<Vec<u8>> = rows.iter().map(|row| row.iter().map(|&b| b as u8).collect()).collect();
    game.state_from_rows(&raw, turn).unwrap()
}

pub fn satisfaction(def: &GameDef, g: usize, rows: &Rows) -> Rational {
    let goal = &def.goals[g];
    let done = goal.required.iter().filter(|s| rows[s.player][s.action]).count() as i128;
    let size = goal.required.len() as i128;
    match goal.kind {
        GoalKind::Linear => Rational::new(done, size),
        GoalKind::AllOrNothing => r((done == size) as i128),
    }
}

pub fn utility(def: &GameDef, g: usize, n: usize) -> Rational {
    Rational::new(def.utilities[g][n] as i128, def.utility_scale as i128)
}

pub fn reward(def: &GameDef, rows: &Rows, n: usize) -> Rational {
    (0..def.goals.len()).map(|g| utility(def, g, n) * satisfaction(def, g, rows)).sum()
}

pub fn rewards(def: &GameDef, rows: &Rows) -> Vec<Rational> {
    (0..def.num_players).map(|n| reward(def, rows, n)).collect()
}

/// `Σ_{G>0} G + Σ_{G<0} S·G`.
pub fn upper_second_form(def: &GameDef, rows: &Rows, n: usize) -> Rational {
    let mut total = r(0);
    for g in 0..def.goals.len() {
        let u = utility(def, g, n);
        if u > r(0) {
            total += u;
        } else if u < r(0) {
            total += satisfaction(def, g, rows) * u;
        }
    }
    total
}

/// `R_n + Σ_{G>0} (1 − S)·G`.
pub fn upper_first_form(def: &GameDef, rows: &Rows, n: usize) -> Rational {
    let mut total = reward(def, rows, n);
    for g in 0..def.goals.len() {
        let u = utility(def, g, n);
        if u > r(0) {
            total += (r(1) - satisfaction(def, g, rows)) * u;
        }
    }
    total
}

pub fn credible_threat(def: &GameDef, rows: &Rows, g: usize, n: usize, exclude_self_only: bool) -> bool {
    if def.utilities[g][n] >= 0 {
        return false;
    }
    let pending: Vec<usize> = def.goals[g]
        .required
        .iter()
        .filter(|s| !rows[s.player][s.action])
        .map(|s| s.player)
        .collect();
    if pending.is_empty() {
        return false;
    }
    let others: Vec<usize> = pending.into_iter().filter(|&m| m != n).collect();
    if exclude_self_only && others.is_empty() {
        return false;
    }
    others.iter().all(|&m| def.utilities[g][m] >= 0)
}

pub fn lower_naive(def: &GameDef, rows: &Rows, n: usize, exclude_self_only: bool) -> Rational {
    let mut total = reward(def, rows, n);
    for g in 0..def.goals.len() {
        if credible_threat(def, rows, g, n, exclude_self_only) {
            total += (r(1) - satisfaction(def, g, rows)) * utility(def, g, n);
        }
    }
    total
}

pub fn violates_exclusions(def: &GameDef, rows: &Rows) -> bool {
    def.exclusions
        .iter()
        .any(|set| set.iter().all(|s| rows[s.player][s.action]))
}

/// All subsets of `items` with at most `k` elements, as sorted tuples in lexicographic order.
pub fn subsets_upto(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    fn rec(items: &[usize], start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            out.push(cur.clone());
            rec(items, i + 1, k, cur, out);
            cur.pop();
        }
    }
    rec(items, 0, k, &mut vec![], &mut out);
    let mut sorted = out.clone();
    sorted.sort();
    assert_eq!(sorted, out, "subset enumeration is lexicographic");
    out
}

pub fn free_actions(rows: &Rows, player: usize) -> Vec<usize> {
    (0..rows[player].len()).filter(|&a| !rows[player][a]).collect()
}

pub fn random_regime<R: Rng>(rng: &mut R) -> PayoffRegime {
    PayoffRegime::ALL[rng.random_range(0..4)]
}

/// A random generator configuration for small games.
pub fn small_config<R: Rng>(rng: &mut R, players: (usize, usize), actions: (usize, usize), goals: (usize, usize)) -> GeneratorConfig {
    let aon = [0.0, 0.15, 0.3, 0.5, 1.0][rng.random_range(0..5)];
    GeneratorConfig {
        num_players: rng.random_range(players.0..=players.1),
        actions_per_player: ActionCounts::Range {
            min: actions.0,
            max: actions.1,
        },
        num_goals: rng.random_range(goals.0..=goals.1),
        latent_dim: rng.random_range(1..=5),
        alignment: if rng.random_bool(0.5) {
            Alignment::Cooperative
        } else {
            Alignment::Adversarial
        },
        payoff_regime: random_regime(rng),
        aon_fraction: aon,
        zipf_alpha: [1.6, 2.0, 3.0][rng.random_range(0..3)],
        seed: rng.random(),
        ..GeneratorConfig::default()
    }
}

pub fn small_game<R: Rng>(rng: &mut R, players: (usize, usize), actions: (usize, usize), goals: (usize, usize)) -> Game {
    loop {
        let cfg = small_config(rng, players, actions, goals);
        if let Ok(g) = generate_game(&cfg) {
            return g;
        }
    }
}

pub fn random_rows<R: Rng>(rng: &mut R, def: &GameDef, p: f64) -> Rows {
    def.actions_per_player
        .iter()
        .map(|&a| (0..a).map(|_| rng.random_bool(p)).collect())
        .collect()
}
