//! Each player commits, alone and at the empty state, to the subset of its own actions
//! that maximizes its own reward. The chosen subsets are then composed.

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::model::{CommitmentState, Game, PayoffVector};
use serde::{Deserialize, Serialize};

/// Largest per-player action count searched exhaustively.
pub const MAX_UNILATERAL_ACTIONS: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoNegotiation {
    /// Chosen action indices per player.
    pub choices: Vec<Vec<usize>>,
    /// Composed commitment matrix, one 0/1 row per player.
    pub state: Vec<Vec<u8>>,
    pub payoffs: PayoffVector,
}

/// Best own subset for one player: highest own reward, then fewest commitments, then
/// the lexicographically smallest index tuple. Subsets completing a mutually
/// exclusive set are skipped.
pub fn unilateral_choice(game: &Game, player: usize) -> Result<Vec<usize>> {
    let n = game.num_actions(player);
    if n > MAX_UNILATERAL_ACTIONS {
        return Err(Error::tractability(format!(
            "player {player} has {n} actions; unilateral search is limited to {MAX_UNILATERAL_ACTIONS}"
        )));
    }
    let base = game.player_slots(player).start;
    let mut bits = Bits::zeros(game.total_slots());
    let mut best: Option<(i64, u32, u32)> = None;
    for mask in 0u32..(1u32 << n) {
        for j in 0..n {
            if mask >> j & 1 == 1 {
                bits.set(base + j);
            } else {
                bits.clear(base + j);
            }
        }
        if game.violates_exclusions(&bits) {
            continue;
        }
        let r = game.reward_scaled(&bits, player);
        let better = match best {
            None => true,
            Some((br, bc, bm)) => {
                r > br || (r == br && (mask.count_ones() < bc || (mask.count_ones() == bc && lex_less(mask, bm))))
            }
        };
        if better {
            best = Some((r, mask.count_ones(), mask));
        }
    }
    let (_, _, mask) = best.expect("the empty subset is always feasible");
    Ok((0..n).filter(|&j| mask >> j & 1 == 1).collect())
}

/// Sorted-tuple lexicographic order for subsets of equal size: the smallest element
/// where they differ belongs to the smaller tuple.
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    diff != 0 && a & (diff & diff.wrapping_neg()) != 0
}

pub fn no_negotiation(game: &Game) -> Result<NoNegotiation> {
    let mut choices = Vec::with_capacity(game.num_players());
    let mut bits = Bits::zeros(game.total_slots());
    for p in 0..game.num_players() {
        let choice = unilateral_choice(game, p)?;
        for &a in &choice {
            bits.set(game.slot_index(p, a));
        }
        choices.push(choice);
    }
    let state = CommitmentState { bits, turn: 0 };
    Ok(NoNegotiation {
        choices,
        state: game.state_rows(&state),
        payoffs: game.reward_vector(&state)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::poison_pill;
    use crate::model::{GameDef, Goal, GoalKind, Provenance, Slot};
    use crate::rational::Rational;

    #[test]
    fn poison_pill_victim_commits_nothing() {
        let game = poison_pill();
        let nn = no_negotiation(&game).unwrap();
        assert!(nn.choices.iter().all(Vec::is_empty));
        assert_eq!(nn.payoffs, PayoffVector::zeros(2));
    }

    #[test]
    fn self_serving_action_is_taken() {
        let game = Game::new(GameDef {
            num_players: 2,
            actions_per_player: vec![1, 1],
            goals: vec![Goal {
                id: 0,
                kind: GoalKind::Linear,
                required: vec![Slot::new(0, 0)],
            }],
            utilities: vec![vec![10, -3]],
            utility_scale: 1,
            exclusions: vec![],
            provenance: Provenance::Manual { label: "t".into() },
        })
        .unwrap();
        let nn = no_negotiation(&game).unwrap();
        assert_eq!(nn.choices, vec![vec![0], vec![]]);
        assert_eq!(nn.payoffs.values(), &[Rational::from_integer(10), Rational::from_integer(-3)]);
    }

    #[test]
    fn lexicographic_tie_break() {
        // {0,2} < {1,2} and {0,1} < {0,2}
        assert!(lex_less(0b101, 0b110));
        assert!(lex_less(0b011, 0b101));
        assert!(!lex_less(0b110, 0b101));
        assert!(!lex_less(0b101, 0b101));
    }
}
