//! Regime sweeps over generator parameters.
//!
//! Every (cell, seed) pair generates one game from a seed derived from the grid seed
//! and the cell's coordinates, plays every method, the No-Negotiation baseline and,
//! for small games, the exact solver. Failures become error rows.

use super::{improvement_stats, l1_error, stats::summarize, ImprovementStats, Summary};
use crate::baselines::no_negotiation;
use crate::error::{Error, Result};
use crate::generator::{generate_game, ActionCounts, Alignment, GeneratorConfig, PayoffRegime};
use crate::model::PayoffVector;
use crate::par::{self, Execution};
use crate::protocol::{play_with_spec, ProtocolConfig};
use crate::rational::{self, Rational};
use crate::rng::derive_seed;
use crate::solvers::optimal_payoffs;
use crate::values::{ValueKind, ValueSpec};
use serde::{Deserialize, Serialize};

/// Game-size class; sets default action counts and rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    #[default]
    Small,
    Large,
}

impl SizeClass {
    pub fn label(self) -> &'static str {
        match self {
            SizeClass::Small => "small",
            SizeClass::Large => "large",
        }
    }

    pub fn actions(self) -> ActionCounts {
        match self {
            SizeClass::Small => ActionCounts::Range { min: 1, max: 2 },
            SizeClass::Large => ActionCounts::Fixed(5),
        }
    }

    /// Proposals per player.
    pub fn default_rounds(self) -> u32 {
        match self {
            SizeClass::Small => 1,
            SizeClass::Large => 2,
        }
    }
}

fn default_seeds() -> usize {
    50
}
fn default_alignment() -> Vec<Alignment> {
    vec![Alignment::Cooperative, Alignment::Adversarial]
}
fn default_aon() -> Vec<f64> {
    vec![0.0, 0.15, 0.30, 0.50]
}
fn default_alpha() -> Vec<f64> {
    vec![1.6, 3.0]
}
fn default_latent() -> Vec<usize> {
    vec![5, 15]
}
fn default_regimes() -> Vec<PayoffRegime> {
    PayoffRegime::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    #[serde(default)]
    pub size_class: SizeClass,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub grid_seed: u64,
    #[serde(default = "default_alignment")]
    pub alignment: Vec<Alignment>,
    #[serde(default = "default_aon")]
    pub aon_fraction: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub zipf_alpha: Vec<f64>,
    #[serde(default = "default_latent")]
    pub latent_dim: Vec<usize>,
    #[serde(default = "default_regimes")]
    pub payoff_regime: Vec<PayoffRegime>,
    /// Compute `r*` per seed; defaults to true for small games.
    #[serde(default)]
    pub exact: Option<bool>,
    /// Generator settings shared by all cells; the axes above override their fields.
    #[serde(default)]
    pub base: Option<GeneratorConfig>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            size_class: SizeClass::Small,
            seeds: default_seeds(),
            grid_seed: 0,
            alignment: default_alignment(),
            aon_fraction: default_aon(),
            zipf_alpha: default_alpha(),
            latent_dim: default_latent(),
            payoff_regime: default_regimes(),
            exact: None,
            base: None,
        }
    }
}

/// Coordinates of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCoords {
    pub alignment: Alignment,
    pub aon_fraction: f64,
    pub zipf_alpha: f64,
    pub latent_dim: usize,
    pub payoff_regime: PayoffRegime,
}

impl CellCoords {
    pub fn label(&self) -> String {
        format!(
            "{}/aon={}/alpha={}/d={}/{}",
            self.alignment, self.aon_fraction, self.zipf_alpha, self.latent_dim, self.payoff_regime
        )
    }
}

impl SweepGrid {
    pub fn from_toml(text: &str) -> Result<SweepGrid> {
        toml::from_str(text).map_err(|e| Error::validation(format!("invalid grid file: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds < 1 {
            return Err(Error::validation("a sweep needs at least 1 seed per cell"));
        }
        if self.alignment.is_empty()
            || self.aon_fraction.is_empty()
            || self.zipf_alpha.is_empty()
            || self.latent_dim.is_empty()
            || self.payoff_regime.is_empty()
        {
            return Err(Error::validation("every sweep axis needs at least one value"));
        }
        for cell in self.cells() {
            self.generator_config(&cell, 0).validate()?;
        }
        Ok(())
    }

    pub fn exact_enabled(&self) -> bool {
        self.exact.unwrap_or(self.size_class == SizeClass::Small)
    }

    /// Cells in axis order: alignment, aon fraction, alpha, latent dim, regime.
    pub fn cells(&self) -> Vec<CellCoords> {
        let mut out = Vec::new();
        for &alignment in &self.alignment {
            for &aon_fraction in &self.aon_fraction {
                for &zipf_alpha in &self.zipf_alpha {
                    for &latent_dim in &self.latent_dim {
                        for &payoff_regime in &self.payoff_regime {
                            out.push(CellCoords {
                                alignment,
                                aon_fraction,
                                zipf_alpha,
                                latent_dim,
                                payoff_regime,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Game seed of one (cell, seed index): depends on the grid seed and the cell's
    /// coordinates only, never on its position in the grid.
    pub fn game_seed(&self, cell: &CellCoords, seed_index: usize) -> u64 {
        derive_seed(
            self.grid_seed,
            &format!("{}/{}/{}", self.size_class.label(), cell.label(), seed_index),
        )
    }

    pub fn generator_config(&self, cell: &CellCoords, seed_index: usize) -> GeneratorConfig {
        let mut cfg = self.base.clone().unwrap_or_else(|| GeneratorConfig {
            actions_per_player: self.size_class.actions(),
            ..GeneratorConfig::default()
        });
        cfg.alignment = cell.alignment;
        cfg.aon_fraction = cell.aon_fraction;
        cfg.zipf_alpha = cell.zipf_alpha;
        cfg.latent_dim = cell.latent_dim;
        cfg.payoff_regime = cell.payoff_regime;
        cfg.seed = self.game_seed(cell, seed_index);
        cfg
    }
}

/// Method label of the No-Negotiation baseline rows.
pub const NO_NEGOTIATION: &str = "no_negotiation";

/// One method's result on one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub cell: CellCoords,
    pub size_class: SizeClass,
    pub seed_index: usize,
    pub game_seed: u64,
    pub game_hash: String,
    pub method: String,
    pub error: Option<String>,
    pub payoffs: Option<PayoffVector>,
    #[serde(with = "opt_rational")]
    pub l1_error: Option<Rational>,
    /// Improvement over the No-Negotiation baseline.
    pub delta: Option<ImprovementStats>,
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

/// Cell-level statistics for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: CellCoords,
    pub method: String,
    pub seeds: usize,
    pub errors: usize,
    pub l1_error: Option<Summary>,
    pub delta_sum: Option<Summary>,
    pub fraction_improved: Option<Summary>,
    pub payoff_sum: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub grid: SweepGrid,
    pub methods: Vec<ValueSpec>,
    pub protocol: ProtocolConfig,
    pub rows: Vec<RawRow>,
}

fn f64_of(r: &Rational) -> f64 {
    rational::to_f64(r)
}

impl SweepTable {
    /// Rows of one method in one cell, ordered by seed.
    pub fn method_rows<'a>(&'a self, cell: &'a CellCoords, method: &'a str) -> impl Iterator<Item = &'a RawRow> + 'a {
        self.rows.iter().filter(move |r| r.cell == *cell && r.method == method)
    }

    /// Method labels in emission order.
    pub fn method_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn summaries(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for cell in self.grid.cells() {
            for method in self.method_labels() {
                let rows: Vec<&RawRow> = self.method_rows(&cell, &method).collect();
                if rows.is_empty() {
                    continue;
                }
                let ok: Vec<&&RawRow> = rows.iter().filter(|r| r.error.is_none()).collect();
                let collect = |f: &dyn Fn(&RawRow) -> Option<f64>| -> Option<Summary> {
                    let xs: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                    (!xs.is_empty()).then(|| summarize(&xs))
                };
                out.push(SummaryRow {
                    cell,
                    method: method.clone(),
                    seeds: rows.len(),
                    errors: rows.len() - ok.len(),
                    l1_error: collect(&|r| r.l1_error.as_ref().map(f64_of)),
                    delta_sum: collect(&|r| r.delta.as_ref().map(|d| f64_of(&d.sum))),
                    fraction_improved: collect(&|r| r.delta.as_ref().map(|d| f64_of(&d.fraction_improved))),
                    payoff_sum: collect(&|r| r.payoffs.as_ref().map(|p| f64_of(&p.total()))),
                });
            }
        }
        out
    }
}

struct Unit {
    cell: CellCoords,
    seed_index: usize,
}

fn run_unit(grid: &SweepGrid, methods: &[ValueSpec], protocol: &ProtocolConfig, unit: &Unit) -> Vec<RawRow> {
    let gen_cfg = grid.generator_config(&unit.cell, unit.seed_index);
    let row = |method: &str, game_hash: &str| RawRow {
        cell: unit.cell,
        size_class: grid.size_class,
        seed_index: unit.seed_index,
        game_seed: gen_cfg.seed,
        game_hash: game_hash.to_string(),
        method: method.to_string(),
        error: None,
        payoffs: None,
        l1_error: None,
        delta: None,
    };
    let mut labels = vec![NO_NEGOTIATION.to_string()];
    if grid.exact_enabled() {
        labels.push(ValueKind::Exact.label().to_string());
    }
    labels.extend(methods.iter().map(ValueSpec::label));
    let game = match generate_game(&gen_cfg) {
        Ok(g) => g,
        Err(e) => {
            return labels
                .iter()
                .map(|m| RawRow {
                    error: Some(format!("generation failed: {e}")),
                    ..row(m, "")
                })
                .collect();
        }
    };
    let hash = game.content_hash();
    let protocol = ProtocolConfig {
        seed: derive_seed(gen_cfg.seed, "protocol"),
        ..protocol.clone()
    };
    let mut rows = Vec::with_capacity(labels.len());

    let baseline = no_negotiation(&game).map(|nn| nn.payoffs);
    rows.push(match &baseline {
        Ok(p) => RawRow {
            payoffs: Some(p.clone()),
            ..row(NO_NEGOTIATION, &hash)
        },
        Err(e) => RawRow {
            error: Some(e.to_string()),
            ..row(NO_NEGOTIATION, &hash)
        },
    });

    let r_star = if grid.exact_enabled() {
        let r = optimal_payoffs(&game, protocol.exact_config(&game));
        rows.push(match &r {
            Ok(p) => RawRow {
                payoffs: Some(p.clone()),
                l1_error: Some(Rational::from_integer(0)),
                delta: baseline.as_ref().ok().and_then(|b| improvement_stats(p, b).ok()),
                ..row(ValueKind::Exact.label(), &hash)
            },
            Err(e) => RawRow {
                error: Some(e.to_string()),
                ..row(ValueKind::Exact.label(), &hash)
            },
        });
        r.ok()
    } else {
        None
    };

    for spec in methods {
        let label = spec.label();
        rows.push(match play_with_spec(&game, spec, &protocol) {
            Ok(trace) => RawRow {
                l1_error: r_star.as_ref().and_then(|r| l1_error(r, &trace.terminal).ok()),
                delta: baseline.as_ref().ok().and_then(|b| improvement_stats(&trace.terminal, b).ok()),
                payoffs: Some(trace.terminal),
                ..row(&label, &hash)
            },
            Err(e) => RawRow {
                error: Some(e.to_string()),
                ..row(&label, &hash)
            },
        });
    }
    rows
}

/// Runs every (cell, seed) of the grid. Raw rows come out in grid order regardless of
/// execution mode.
pub fn run_sweep(grid: &SweepGrid, methods: &[ValueSpec], protocol: &ProtocolConfig, exec: Execution) -> Result<SweepTable> {
    grid.validate()?;
    protocol.validate()?;
    let units: Vec<Unit> = grid
        .cells()
        .into_iter()
        .flat_map(|cell| (0..grid.seeds).map(move |seed_index| Unit { cell, seed_index }))
        .collect();
    let rows = par::map(exec, &units, |u| run_unit(grid, methods, protocol, u))
        .into_iter()
        .flatten()
        .collect();
    Ok(SweepTable {
        grid: grid.clone(),
        methods: methods.to_vec(),
        protocol: protocol.clone(),
        rows,
    })
}
