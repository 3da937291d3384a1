//! Random game generation.
//!
//! Utilities come from a rank-`d` latent model `G[g,p] = v_g . u_p + eps`, rescaled
//! globally to the regime's integer range. Goal sizes follow a truncated Zeta law;
//! a fixed fraction of goals is all-or-nothing.
//!
//! Draw order (fixed, see [`crate::rng`] for the stream ids):
//! 1. action counts: one uniform draw per player when a range is configured;
//! 2. utilities: `v_g` for every goal (d normals each), then `u_p` for every player,
//!    then the noise matrix in row-major (goal, player) order;
//! 3. goal structure: the all-or-nothing goal subset, then per goal its size and
//!    its slot subset;
//! 4. poison-pill injection: the player pair, then the roles.

use crate::error::{Error, Result};
use crate::model::{Game, GameDef, Goal, GoalKind, GoalUtilityMatrix, Provenance, Slot};
use crate::rng::{stream, stream_rng, StreamRng};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Cooperative,
    Adversarial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffRegime {
    Balanced,
    #[serde(alias = "pos_dom")]
    PositiveDominated,
    #[serde(alias = "neg_dom")]
    NegativeDominated,
    #[serde(alias = "neg_dom_pp")]
    NegativeDominatedWithPp,
}

impl PayoffRegime {
    pub const ALL: [PayoffRegime; 4] = [
        PayoffRegime::Balanced,
        PayoffRegime::PositiveDominated,
        PayoffRegime::NegativeDominated,
        PayoffRegime::NegativeDominatedWithPp,
    ];

    /// Default `[g_min, g_max]`.
    pub fn utility_range(self) -> (i64, i64) {
        match self {
            PayoffRegime::Balanced => (-30, 30),
            PayoffRegime::PositiveDominated => (-8, 30),
            PayoffRegime::NegativeDominated | PayoffRegime::NegativeDominatedWithPp => (-30, 8),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PayoffRegime::Balanced => "balanced",
            PayoffRegime::PositiveDominated => "positive_dominated",
            PayoffRegime::NegativeDominated => "negative_dominated",
            PayoffRegime::NegativeDominatedWithPp => "negative_dominated_with_pp",
        }
    }
}

impl Alignment {
    pub fn label(self) -> &'static str {
        match self {
            Alignment::Cooperative => "cooperative",
            Alignment::Adversarial => "adversarial",
        }
    }
}

impl fmt::Display for PayoffRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PayoffRegime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "balanced" => Ok(PayoffRegime::Balanced),
            "positive_dominated" | "posdom" | "pos_dom" => Ok(PayoffRegime::PositiveDominated),
            "negative_dominated" | "negdom" | "neg_dom" => Ok(PayoffRegime::NegativeDominated),
            "negative_dominated_with_pp" | "negdompp" | "neg_dom_pp" => {
                Ok(PayoffRegime::NegativeDominatedWithPp)
            }
            other => Err(Error::validation(format!("unknown payoff regime {other:?}"))),
        }
    }
}

impl FromStr for Alignment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cooperative" | "coop" => Ok(Alignment::Cooperative),
            "adversarial" | "adv" => Ok(Alignment::Adversarial),
            other => Err(Error::validation(format!("unknown alignment {other:?}"))),
        }
    }
}

/// Number of actions per player: a constant, or drawn uniformly from `min..=max` per player.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionCounts {
    Fixed(usize),
    Range { min: usize, max: usize },
}

impl FromStr for ActionCounts {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation(format!("bad action count {s:?}; expected N or MIN-MAX"));
        match s.split_once('-') {
            Some((a, b)) => Ok(ActionCounts::Range {
                min: a.trim().parse().map_err(|_| bad())?,
                max: b.trim().parse().map_err(|_| bad())?,
            }),
            None => Ok(ActionCounts::Fixed(s.trim().parse().map_err(|_| bad())?)),
        }
    }
}

impl ActionCounts {
    fn bounds(self) -> (usize, usize) {
        match self {
            ActionCounts::Fixed(n) => (n, n),
            ActionCounts::Range { min, max } => (min, max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub num_players: usize,
    pub actions_per_player: ActionCounts,
    pub num_goals: usize,
    pub latent_dim: usize,
    pub alignment: Alignment,
    pub payoff_regime: PayoffRegime,
    /// Overrides the regime's default range when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility_range: Option<(i64, i64)>,
    pub aon_fraction: f64,
    pub zipf_alpha: f64,
    pub noise_sigma: f64,
    pub cooperative_mean: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            num_players: 10,
            actions_per_player: ActionCounts::Range { min: 1, max: 2 },
            num_goals: 15,
            latent_dim: 5,
            alignment: Alignment::Adversarial,
            payoff_regime: PayoffRegime::Balanced,
            utility_range: None,
            aon_fraction: 0.0,
            zipf_alpha: 1.6,
            noise_sigma: 0.5,
            cooperative_mean: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn range(&self) -> (i64, i64) {
        self.utility_range.unwrap_or_else(|| self.payoff_regime.utility_range())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.num_players < 2 {
            return fail(format!("num_players must be >= 2, got {}", self.num_players));
        }
        if self.num_goals < 1 {
            return fail("num_goals must be >= 1".into());
        }
        if self.latent_dim < 1 {
            return fail("latent_dim must be >= 1".into());
        }
        let (lo, hi) = self.actions_per_player.bounds();
        if lo < 1 || lo > hi {
            return fail(format!("invalid action count range {lo}..={hi}"));
        }
        let (g_min, g_max) = self.range();
        if g_min >= g_max {
            return fail(format!("utility range [{g_min}, {g_max}] is empty"));
        }
        if !(0.0..=1.0).contains(&self.aon_fraction) {
            return fail(format!("aon_fraction {} outside [0, 1]", self.aon_fraction));
        }
        if !(self.zipf_alpha > 1.0) || !self.zipf_alpha.is_finite() {
            return fail(format!("zipf_alpha must be > 1, got {}", self.zipf_alpha));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return fail(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.cooperative_mean > 0.0) || !self.cooperative_mean.is_finite() {
            return fail(format!("cooperative_mean must be > 0, got {}", self.cooperative_mean));
        }
        if self.num_players * lo < 2 && self.aon_fraction > 0.0 {
            return fail("all-or-nothing goals need at least 2 action slots".into());
        }
        Ok(())
    }

    /// Number of all-or-nothing goals: `round(aon_fraction * num_goals)`, half away from zero.
    pub fn aon_count(&self) -> usize {
        (self.aon_fraction * self.num_goals as f64).round() as usize
    }

    /// Short SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Latent factors behind a sampled utility matrix.
#[derive(Clone, Debug)]
pub struct LatentSample {
    pub goal_vectors: Vec<Vec<f64>>,
    pub player_vectors: Vec<Vec<f64>>,
    /// Row-major (goal, player).
    pub noise: Vec<f64>,
}

/// Zeta(alpha) truncated to `1..=max`, sampled by inverse CDF.
#[derive(Clone, Debug)]
pub struct TruncatedZeta {
    cdf: Vec<f64>,
}

impl TruncatedZeta {
    pub fn new(alpha: f64, max: usize) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::validation(format!("zeta exponent must be > 1, got {alpha}")));
        }
        if max == 0 {
            return Err(Error::validation("zeta support must be non-empty"));
        }
        let weights: Vec<f64> = (1..=max).map(|k| (k as f64).powf(-alpha)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(TruncatedZeta { cdf })
    }

    pub fn support_max(&self) -> usize {
        self.cdf.len()
    }

    /// Probability of `k` under the truncated law.
    pub fn pmf(&self, k: usize) -> f64 {
        if k == 0 || k > self.cdf.len() {
            return 0.0;
        }
        let prev = if k == 1 { 0.0 } else { self.cdf[k - 2] };
        self.cdf[k - 1] - prev
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c < u);
        i.min(self.cdf.len() - 1) + 1
    }
}

fn draw_action_counts(config: &GeneratorConfig) -> Vec<usize> {
    match config.actions_per_player {
        ActionCounts::Fixed(n) => vec![n; config.num_players],
        ActionCounts::Range { min, max } => {
            let mut rng = stream_rng(config.seed, stream::ACTION_COUNTS);
            (0..config.num_players).map(|_| rng.random_range(min..=max)).collect()
        }
    }
}

/// Rank-`d` latent utilities, globally rescaled to the configured integer range.
pub fn sample_goal_utilities(
    config: &GeneratorConfig,
    rng: &mut StreamRng,
) -> Result<(GoalUtilityMatrix, LatentSample)> {
    config.validate()?;
    let d = config.latent_dim;
    let mean = match config.alignment {
        Alignment::Cooperative => config.cooperative_mean,
        Alignment::Adversarial => 0.0,
    };
    let normal = |rng: &mut StreamRng| -> f64 { StandardNormal.sample(rng) };
    let goal_vectors: Vec<Vec<f64>> = (0..config.num_goals)
        .map(|_| (0..d).map(|_| normal(rng)).collect())
        .collect();
    let player_vectors: Vec<Vec<f64>> = (0..config.num_players)
        .map(|_| (0..d).map(|_| mean + normal(rng)).collect())
        .collect();
    let noise_dist = Normal::new(0.0, config.noise_sigma)
        .map_err(|e| Error::validation(format!("noise distribution: {e}")))?;
    let noise: Vec<f64> = (0..config.num_goals * config.num_players)
        .map(|_| noise_dist.sample(rng))
        .collect();

    let np = config.num_players;
    let raw: Vec<f64> = (0..config.num_goals)
        .flat_map(|g| {
            let gv = &goal_vectors[g];
            let noise = &noise;
            player_vectors.iter().enumerate().map(move |(p, pv)| {
                gv.iter().zip(pv).map(|(a, b)| a * b).sum::<f64>() + noise[g * np + p]
            })
        })
        .collect();

    let (g_min, g_max) = config.range();
    let scaled = rescale(&raw, g_min, g_max);
    let mut matrix = GoalUtilityMatrix::zeros(config.num_goals, np);
    for g in 0..config.num_goals {
        for p in 0..np {
            matrix.set(g, p, scaled[g * np + p]);
        }
    }
    Ok((
        matrix,
        LatentSample {
            goal_vectors,
            player_vectors,
            noise,
        },
    ))
}

/// Global min-max affine map onto `[g_min, g_max]`, rounded half away from zero.
/// A constant input maps to the rounded midpoint.
fn rescale(raw: &[f64], g_min: i64, g_max: i64) -> Vec<i64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    raw.iter()
        .map(|&x| {
            let v = if hi > lo {
                let t = (x - lo) / (hi - lo);
                (g_min as f64 + t * (g_max - g_min) as f64).round() as i64
            } else {
                ((g_min + g_max) as f64 / 2.0).round() as i64
            };
            v.clamp(g_min, g_max)
        })
        .collect()
}

/// Goal kinds and required slots for a game with the given action counts.
pub fn sample_goal_structure(
    config: &GeneratorConfig,
    actions_per_player: &[usize],
    rng: &mut StreamRng,
) -> Result<Vec<Goal>> {
    let total: usize = actions_per_player.iter().sum();
    let aon = config.aon_count();
    if total < 2 && aon > 0 {
        return Err(Error::validation("all-or-nothing goals need at least 2 action slots"));
    }
    if total == 0 {
        return Err(Error::validation("game has no action slots"));
    }
    let mut aon_mask = vec![false; config.num_goals];
    for g in index::sample(rng, config.num_goals, aon).into_iter() {
        aon_mask[g] = true;
    }
    let zeta = TruncatedZeta::new(config.zipf_alpha, total)?;
    let slots: Vec<Slot> = actions_per_player
        .iter()
        .enumerate()
        .flat_map(|(p, &a)| (0..a).map(move |j| Slot::new(p, j)))
        .collect();

    let goals = (0..config.num_goals)
        .map(|g| {
            let kind = if aon_mask[g] {
                GoalKind::AllOrNothing
            } else {
                GoalKind::Linear
            };
            let floor = if kind == GoalKind::AllOrNothing { 2 } else { 1 };
            let size = zeta.sample(rng).clamp(floor, total);
            let mut picks = index::sample(rng, total, size).into_vec();
            picks.sort_unstable();
            Goal {
                id: g,
                kind,
                required: picks.into_iter().map(|i| slots[i]).collect(),
            }
        })
        .collect();
    Ok(goals)
}

/// Bait/poison template: bait pays both players, poison pays the beneficiary and hurts
/// the victim by less than the bait is worth.
const BAIT_VALUE: f64 = 30.0;
const POISON_GAIN: f64 = 10.0;
const POISON_LOSS: f64 = 25.0;

/// Template values scaled uniformly into `[g_min, g_max]`.
fn poison_pill_values(g_min: i64, g_max: i64) -> Result<(i64, i64, i64)> {
    let mut s: f64 = 1.0;
    if g_max > 0 {
        s = s.min(g_max as f64 / BAIT_VALUE);
    }
    if g_min < 0 {
        s = s.min(-g_min as f64 / POISON_LOSS);
    }
    if g_max <= 0 || g_min >= 0 {
        return Err(Error::validation(
            "poison pills need a utility range with both signs",
        ));
    }
    let bait = (BAIT_VALUE * s).round() as i64;
    let gain = ((POISON_GAIN * s).round() as i64).max(1).min(g_max);
    let mut loss = -((POISON_LOSS * s).round() as i64).max(1);
    if bait + loss <= 0 {
        loss = -(bait - 1);
    }
    if bait < 2 || loss >= 0 {
        return Err(Error::validation(format!(
            "utility range [{g_min}, {g_max}] cannot hold a poison-pill template"
        )));
    }
    Ok((bait, gain, loss.max(g_min)))
}

/// Appends a bait (all-or-nothing, both players) and a poison (victim-only, linear) goal.
pub fn inject_poison_pill(game: &Game, rng: &mut StreamRng) -> Result<Game> {
    let np = game.num_players();
    if np < 2 {
        return Err(Error::validation("poison pills need at least 2 players"));
    }
    let mut def = game.def().clone();
    let used: HashSet<(usize, usize)> = match &def.provenance {
        Provenance::Generator { poison_pairs, .. } => poison_pairs.iter().copied().collect(),
        _ => HashSet::new(),
    };
    let pairs: Vec<(usize, usize)> = (0..np)
        .flat_map(|a| (a + 1..np).map(move |b| (a, b)))
        .filter(|p| !used.contains(p))
        .collect();
    if pairs.is_empty() {
        return Err(Error::validation("every player pair already carries a poison pill"));
    }
    let pair = pairs[rng.random_range(0..pairs.len())];
    let (victim, beneficiary) = if rng.random_bool(0.5) {
        (pair.0, pair.1)
    } else {
        (pair.1, pair.0)
    };

    let referenced: HashSet<Slot> = def.goals.iter().flat_map(|g| g.required.iter().copied()).collect();
    let take_fresh = |player: usize, count: usize, def: &mut GameDef| -> Vec<usize> {
        let mut out: Vec<usize> = (0..def.actions_per_player[player])
            .filter(|&j| !referenced.contains(&Slot::new(player, j)))
            .take(count)
            .collect();
        while out.len() < count {
            out.push(def.actions_per_player[player]);
            def.actions_per_player[player] += 1;
        }
        out
    };
    let victim_actions = take_fresh(victim, 2, &mut def);
    let beneficiary_action = take_fresh(beneficiary, 1, &mut def)[0];

    let (g_min, g_max) = match &def.provenance {
        Provenance::Generator { config, .. } => config.range(),
        _ => (game.utilities().min().min(-1), game.utilities().max().max(1)),
    };
    let (bait, gain, loss) = poison_pill_values(g_min, g_max)?;
    let next_id = def.goals.iter().map(|g| g.id).max().map_or(0, |m| m + 1);
    def.goals.push(Goal {
        id: next_id,
        kind: GoalKind::AllOrNothing,
        required: {
            let mut r = vec![Slot::new(beneficiary, beneficiary_action), Slot::new(victim, victim_actions[0])];
            r.sort();
            r
        },
    });
    def.goals.push(Goal {
        id: next_id + 1,
        kind: GoalKind::Linear,
        required: vec![Slot::new(victim, victim_actions[1])],
    });
    let mut bait_row = vec![0; np];
    bait_row[victim] = bait;
    bait_row[beneficiary] = bait;
    let mut poison_row = vec![0; np];
    poison_row[beneficiary] = gain;
    poison_row[victim] = loss;
    def.utilities.push(bait_row);
    def.utilities.push(poison_row);
    if let Provenance::Generator { poison_pairs, .. } = &mut def.provenance {
        poison_pairs.push(pair);
    }
    Game::new(def)
}

/// Deterministic function of `config` (including its seed).
pub fn generate_game(config: &GeneratorConfig) -> Result<Game> {
    config.validate()?;
    let actions = draw_action_counts(config);
    let (utilities, _) = sample_goal_utilities(config, &mut stream_rng(config.seed, stream::UTILITIES))?;
    let goals = sample_goal_structure(config, &actions, &mut stream_rng(config.seed, stream::GOAL_STRUCTURE))?;
    let game = Game::new(GameDef {
        num_players: config.num_players,
        actions_per_player: actions,
        goals,
        utilities: utilities.rows(),
        utility_scale: 1,
        exclusions: vec![],
        provenance: Provenance::Generator {
            seed: config.seed,
            config_hash: config.hash(),
            config: Box::new(config.clone()),
            poison_pairs: vec![],
        },
    })?;
    if config.payoff_regime == PayoffRegime::NegativeDominatedWithPp {
        inject_poison_pill(&game, &mut stream_rng(config.seed, stream::POISON_PILL))
    } else {
        Ok(game)
    }
}

/// Rebuilds a generated game from its stored provenance.
pub fn regenerate(game: &Game) -> Result<Game> {
    match game.provenance() {
        Provenance::Generator { config, .. } => generate_game(config),
        _ => Err(Error::validation("game was not produced by the generator")),
    }
}
