//! Feasible joint updates and the proposer's best offer.

use super::JointUpdate;
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::model::{CommitmentState, Game};
use crate::values::ValueApproximation;
use smallvec::SmallVec;

/// Default cap on candidate updates examined per offer.
pub const DEFAULT_MAX_CANDIDATES: usize = 1_000_000;

/// One side of a joint update: global slot indices plus their mask.
#[derive(Clone, Debug)]
pub(crate) struct Side {
    pub slots: SmallVec<[usize; 4]>,
    pub mask: Bits,
}

/// Subsets of `free` with at most `k` elements, in lexicographic order of sorted
/// index tuples (the empty subset first).
pub(crate) fn side_subsets(free: &[usize], k: usize, width: usize) -> Vec<Side> {
    fn walk(free: &[usize], start: usize, k: usize, cur: &mut SmallVec<[usize; 4]>, mask: &mut Bits, out: &mut Vec<Side>) {
        out.push(Side {
            slots: cur.clone(),
            mask: mask.clone(),
        });
        if cur.len() == k {
            return;
        }
        for i in start..free.len() {
            cur.push(free[i]);
            let saved = mask.clone();
            mask.set(free[i]);
            walk(free, i + 1, k, cur, mask, out);
            *mask = saved;
            cur.pop();
        }
    }
    let mut out = Vec::new();
    walk(free, 0, k, &mut SmallVec::new(), &mut Bits::zeros(width), &mut out);
    out
}

pub(crate) fn free_slots(game: &Game, bits: &Bits, player: usize) -> Vec<usize> {
    game.player_slots(player).filter(|&i| !bits.get(i)).collect()
}

/// All non-empty joint updates for (`proposer`, `partner`), proposer subsets outer.
pub(crate) struct Candidates {
    pub proposer: Vec<Side>,
    pub partner: Vec<Side>,
}

impl Candidates {
    pub fn new(game: &Game, bits: &Bits, proposer: usize, partner: usize, k: usize) -> Self {
        let width = game.total_slots();
        Candidates {
            proposer: side_subsets(&free_slots(game, bits, proposer), k, width),
            partner: side_subsets(&free_slots(game, bits, partner), k, width),
        }
    }

    pub fn check_limit(&self, max_candidates: usize) -> Result<()> {
        let n = self.proposer.len() as u128 * self.partner.len() as u128 - 1;
        if n > max_candidates as u128 {
            return Err(Error::tractability(format!(
                "{n} candidate updates exceed the limit of {max_candidates}"
            )));
        }
        Ok(())
    }

    /// Index pairs in enumeration order, skipping the empty update.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.proposer.len())
            .flat_map(move |i| (0..self.partner.len()).map(move |j| (i, j)))
            .skip(1)
    }

    /// Post-state of update (i, j) applied to `bits`.
    #[inline]
    pub fn apply(&self, bits: &Bits, i: usize, j: usize, out: &mut Bits) {
        out.clone_from(bits);
        out.union_with(&self.proposer[i].mask);
        out.union_with(&self.partner[j].mask);
    }

    pub fn joint_update(&self, game: &Game, i: usize, j: usize) -> JointUpdate {
        let local = |s: &Side| s.slots.iter().map(|&x| game.slot_of(x).action).collect();
        JointUpdate {
            proposer: local(&self.proposer[i]),
            partner: local(&self.partner[j]),
        }
    }
}

fn check_pair(game: &Game, proposer: usize, partner: usize) -> Result<()> {
    let n = game.num_players();
    if proposer >= n || partner >= n {
        return Err(Error::validation("player index outside the game"));
    }
    if proposer == partner {
        return Err(Error::validation("proposer and partner must differ"));
    }
    Ok(())
}

/// Every non-empty joint update with at most `k` additions per side drawn from the
/// two parties' uncommitted slots, in deterministic lexicographic order.
pub fn enumerate_feasible_updates(
    game: &Game,
    state: &CommitmentState,
    proposer: usize,
    partner: usize,
    k: usize,
) -> Result<Vec<JointUpdate>> {
    game.check_state(state)?;
    check_pair(game, proposer, partner)?;
    let cands = Candidates::new(game, &state.bits, proposer, partner, k);
    Ok(cands.pairs().map(|(i, j)| cands.joint_update(game, i, j)).collect())
}

/// Result of an offer search in scaled units.
#[derive(Clone, Debug)]
pub(crate) struct OfferChoice {
    pub update: JointUpdate,
    pub bits: Bits,
}

/// Best offer by a state-function approximation: partner weakly improves against the
/// current state, proposer strictly improves on (value, immediate reward), first
/// maximizer wins. Values are updated through the goals each candidate touches.
pub(crate) fn best_offer_scaled(
    approx: &ValueApproximation<'_>,
    bits: &Bits,
    proposer: usize,
    partner: usize,
    k: usize,
    max_candidates: usize,
) -> Result<Option<OfferChoice>> {
    let game = approx.game();
    let cands = Candidates::new(game, bits, proposer, partner, k);
    cands.check_limit(max_candidates)?;
    let mut best_key = (0i64, 0i64);
    let mut best: Option<(usize, usize)> = None;
    let mut next = bits.clone();
    let mut touched: SmallVec<[usize; 16]> = SmallVec::new();
    for (i, j) in cands.pairs() {
        cands.apply(bits, i, j, &mut next);
        if game.violates_exclusions(&next) {
            continue;
        }
        touched.clear();
        for &slot in cands.proposer[i].slots.iter().chain(cands.partner[j].slots.iter()) {
            for &g in game.slot_goals(slot) {
                if !touched.contains(&g) {
                    touched.push(g);
                }
            }
        }
        if approx.delta_scaled(bits, &next, &touched, partner) < 0 {
            continue;
        }
        let dv = approx.delta_scaled(bits, &next, &touched, proposer);
        let dr: i64 = touched
            .iter()
            .map(|&g| game.utility(g, proposer) * (game.satisfaction_scaled(g, &next) - game.satisfaction_scaled(g, bits)))
            .sum();
        if (dv, dr) > best_key {
            best_key = (dv, dr);
            best = Some((i, j));
        }
    }
    Ok(best.map(|(i, j)| {
        cands.apply(bits, i, j, &mut next);
        OfferChoice {
            update: cands.joint_update(game, i, j),
            bits: next,
        }
    }))
}

/// The proposer's best acceptable offer to `partner`, or `None`.
///
/// Candidates are filtered by the partner's weak improvement and exclusion sets.
/// The proposer must strictly improve; ties between candidates go to the first in
/// enumeration order. Proposer candidates are ranked by approximate value, with the
/// immediate reward breaking ties. With an exact approximation the comparison
/// baseline is the rejection continuation instead of the current state.
pub fn best_offer(
    game: &Game,
    state: &CommitmentState,
    proposer: usize,
    partner: usize,
    approx: &ValueApproximation<'_>,
    k: usize,
) -> Result<Option<JointUpdate>> {
    game.check_state(state)?;
    check_pair(game, proposer, partner)?;
    if approx.is_exact() {
        let solver = approx.exact_solver().expect("exact approximation has a solver");
        let choice = solver.borrow_mut().best_offer(&state.bits, state.turn, proposer, partner)?;
        return Ok(choice.map(|c| c.update));
    }
    Ok(best_offer_scaled(approx, &state.bits, proposer, partner, k, DEFAULT_MAX_CANDIDATES)?
        .map(|c| c.update))
}

impl JointUpdate {
    /// Checks the update against a state and applies it.
    pub fn apply(&self, game: &Game, state: &CommitmentState, proposer: usize, partner: usize, k: usize) -> Result<Bits> {
        check_pair(game, proposer, partner)?;
        if self.is_empty() {
            return Err(Error::validation("joint update is empty"));
        }
        let mut bits = state.bits.clone();
        for (player, actions) in [(proposer, &self.proposer), (partner, &self.partner)] {
            if actions.len() > k {
                return Err(Error::validation(format!(
                    "player {player} adds {} commitments, budget is {k}",
                    actions.len()
                )));
            }
            let mut seen = Vec::with_capacity(actions.len());
            for &a in actions {
                if a >= game.num_actions(player) {
                    return Err(Error::validation(format!("player {player} has no action {a}")));
                }
                if seen.contains(&a) {
                    return Err(Error::validation(format!("action {a} of player {player} listed twice")));
                }
                seen.push(a);
                let i = game.slot_index(player, a);
                if bits.get(i) {
                    return Err(Error::validation(format!("action {a} of player {player} is already committed")));
                }
                bits.set(i);
            }
        }
        if game.violates_exclusions(&bits) {
            return Err(Error::validation("joint update completes a mutually exclusive set"));
        }
        Ok(bits)
    }
}
