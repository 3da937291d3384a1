//! Negotiation-game benchmark engine.
//!
//! Multi-party sequential negotiation over binding, action-level commitments with
//! terminal-only rewards: random game generation, a reference bargaining protocol
//! driven by pluggable value approximations, exact and welfare solvers, baselines,
//! document-grounded game ingestion, and regime sweeps.

pub mod baselines;
pub mod bits;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod model;
pub mod par;
pub mod protocol;
pub mod rational;
pub mod rng;
pub mod solvers;
pub mod topfile;
pub mod values;

pub use error::{Error, Result};
pub use model::{CommitmentState, Game, GameDef, Goal, GoalKind, PayoffVector, Provenance, Slot};
pub use rational::Rational;
