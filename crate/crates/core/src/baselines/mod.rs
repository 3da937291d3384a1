//! Reference baselines: unilateral play without negotiation, and a language-model negotiator.

pub mod llm;
pub mod no_negotiation;

pub use no_negotiation::{no_negotiation, NoNegotiation, MAX_UNILATERAL_ACTIONS};
