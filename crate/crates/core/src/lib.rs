//! Stateless rule-based verification.
//!
//! A [`Program`] of rules and facts is saturated by [`engine::saturate`]
//! into a monotone working memory with full provenance. The result can be
//! viewed as a derivation lattice ([`lattice`]), classified into
//! compliance verdicts ([`compliance`]), or used to score records
//! ([`karb`]).

pub mod compliance;
mod digest;
pub mod engine;
pub mod karb;
pub mod lattice;
pub mod parse;
pub mod term;

pub use digest::sha256_hex;
pub use parse::{parse_facts, parse_program, parse_sources, parse_term, render, ParseError, Program, Rule, RuleKind};
pub use term::{BinOp, Binding, Number, Term};
