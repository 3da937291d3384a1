//! Partner selection by Monte Carlo tree search.
//!
//! Tree nodes are commitment states; a child is reached by choosing a partner and
//! playing the proposer's best offer to it (or rejecting when none exists). Leaves
//! are scored by the value approximation or the raw reward, and the full payoff
//! vector is backed up. Each node's selection uses its own proposer's component.

use super::{LeafEval, OfferCache, ProtocolConfig};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::model::{CommitmentState, Game};
use crate::rng::StreamRng;
use crate::values::ValueApproximation;
use rand::seq::SliceRandom;

struct Node {
    bits: Bits,
    turn: u32,
    visits: u32,
    /// Accumulated payoffs in real units.
    w: Vec<f64>,
    /// Child node per partner index.
    children: Vec<Option<usize>>,
    untried: Vec<usize>,
}

impl Node {
    fn new(game: &Game, bits: Bits, turn: u32, horizon: u32, rng: &mut StreamRng) -> Node {
        let np = game.num_players();
        let mut untried = Vec::new();
        if turn < horizon {
            let p = turn as usize % np;
            untried = (0..np).filter(|&m| m != p).collect();
            untried.shuffle(rng);
        }
        Node {
            bits,
            turn,
            visits: 0,
            w: vec![0.0; np],
            children: vec![None; np],
            untried,
        }
    }
}

/// Selects the proposer's partner at `state` by tree search.
pub fn mcts_select_partner(
    game: &Game,
    state: &CommitmentState,
    proposer: usize,
    approx: &ValueApproximation<'_>,
    config: &ProtocolConfig,
    rng: &mut StreamRng,
) -> Result<usize> {
    config.validate()?;
    game.check_state(state)?;
    let mut cache = OfferCache::new(config);
    select_partner(game, state, proposer, approx, config, &mut cache, rng)
}

pub(crate) fn select_partner(
    game: &Game,
    state: &CommitmentState,
    proposer: usize,
    approx: &ValueApproximation<'_>,
    config: &ProtocolConfig,
    cache: &mut OfferCache,
    rng: &mut StreamRng,
) -> Result<usize> {
    let np = game.num_players();
    if np < 2 || proposer >= np {
        return Err(Error::validation("no legal partner for the proposer"));
    }
    if state.turn as usize % np != proposer {
        return Err(Error::validation(format!(
            "player {proposer} does not propose at turn {}",
            state.turn
        )));
    }
    if np == 2 {
        return Ok(1 - proposer);
    }
    let horizon = config.horizon(game).max(state.turn + 1);
    let scale = game.utility_span() * game.num_goals() as f64;
    let denom = game.payoff_denominator() as f64;
    let mut nodes = vec![Node::new(game, state.bits.clone(), state.turn, horizon, rng)];
    let mut path = Vec::new();
    let mut leaf = vec![0i64; np];

    for _ in 0..config.mcts_simulations {
        path.clear();
        let mut cur = 0usize;
        path.push(cur);
        // Selection.
        while nodes[cur].untried.is_empty() && nodes[cur].turn < horizon {
            let node = &nodes[cur];
            let p = node.turn as usize % np;
            let ln_n = (node.visits.max(1) as f64).ln();
            let mut best: Option<(f64, usize)> = None;
            for (m, child) in node.children.iter().enumerate() {
                let Some(c) = *child else { continue };
                let ch = &nodes[c];
                let ucb = if ch.visits == 0 {
                    f64::INFINITY
                } else {
                    let mean = ch.w[p] / ch.visits as f64 / scale;
                    mean + config.mcts_exploration * (ln_n / ch.visits as f64).sqrt()
                };
                if best.is_none_or(|(b, _)| ucb > b) {
                    best = Some((ucb, m));
                }
            }
            let (_, m) = best.expect("fully expanded node has children");
            cur = nodes[cur].children[m].expect("child exists");
            path.push(cur);
        }
        // Expansion.
        if nodes[cur].turn < horizon {
            let m = nodes[cur].untried.pop().expect("untried partner");
            let (bits, turn) = (nodes[cur].bits.clone(), nodes[cur].turn);
            let p = turn as usize % np;
            let next = match cache.get(approx, &bits, turn, p, m)? {
                Some(choice) => choice.bits,
                None => bits,
            };
            let child = Node::new(game, next, turn + 1, horizon, rng);
            nodes.push(child);
            let id = nodes.len() - 1;
            nodes[cur].children[m] = Some(id);
            cur = id;
            path.push(cur);
        }
        // Evaluation.
        let node = &nodes[cur];
        match config.leaf_eval {
            LeafEval::ApproxValue => approx.vector_scaled(&node.bits, node.turn, &mut leaf)?,
            LeafEval::RawPayoff => game.reward_scaled_all(&node.bits, &mut leaf),
        }
        // Backpropagation.
        for &id in &path {
            let n = &mut nodes[id];
            n.visits += 1;
            for (w, &v) in n.w.iter_mut().zip(leaf.iter()) {
                *w += v as f64 / denom;
            }
        }
    }

    let root = &nodes[0];
    let mut best: Option<(u32, usize)> = None;
    for (m, child) in root.children.iter().enumerate() {
        if let Some(c) = *child {
            let v = nodes[c].visits;
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, m));
            }
        }
    }
    Ok(best.map(|(_, m)| m).expect("at least one simulation expands the root"))
}
