//! Metrics, regime sweeps and report emission.

pub mod compare;
pub mod report;
pub mod stats;
pub mod sweep;

use crate::error::{Error, Result};
use crate::model::PayoffVector;
use crate::rational::{self, Rational};
use serde::{Deserialize, Serialize};

pub use compare::{compare_games, Comparison};
pub use report::emit_report;
pub use stats::{paired_less, summarize, PairedTest, Summary};
pub use sweep::{run_sweep, CellCoords, RawRow, SizeClass, SweepGrid, SweepTable};

fn check_lengths(a: &PayoffVector, b: &PayoffVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "payoff vectors have different lengths ({} and {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Sum of absolute per-player differences.
pub fn l1_error(r_star: &PayoffVector, r_hat: &PayoffVector) -> Result<Rational> {
    check_lengths(r_star, r_hat)?;
    Ok(r_star
        .values()
        .iter()
        .zip(r_hat.values())
        .map(|(a, b)| if a > b { a - b } else { b - a })
        .sum())
}

/// Per-player improvement `a - b` aggregated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImprovementStats {
    #[serde(with = "rational::as_string")]
    pub sum: Rational,
    #[serde(with = "rational::as_string")]
    pub min: Rational,
    /// Population variance of the per-player differences.
    #[serde(with = "rational::as_string")]
    pub variance: Rational,
    /// Fraction of players with a strictly positive difference.
    #[serde(with = "rational::as_string")]
    pub fraction_improved: Rational,
}

pub fn improvement_stats(a: &PayoffVector, b: &PayoffVector) -> Result<ImprovementStats> {
    check_lengths(a, b)?;
    let n = a.len();
    if n == 0 {
        return Err(Error::validation("payoff vectors are empty"));
    }
    let deltas: Vec<Rational> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let nr = Rational::from_integer(n as i128);
    let sum: Rational = deltas.iter().sum();
    let mean = sum / nr;
    let variance = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<Rational>() / nr;
    let improved = deltas.iter().filter(|d| **d > Rational::from_integer(0)).count();
    Ok(ImprovementStats {
        sum,
        min: *deltas.iter().min().expect("non-empty"),
        variance,
        fraction_improved: Rational::new(improved as i128, n as i128),
    })
}
