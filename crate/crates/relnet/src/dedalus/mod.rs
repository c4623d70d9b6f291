//! Temporal Datalog with negation: the last position of every predicate
//! carries a timestamp, rules are deductive (head at the body's timestamp)
//! or inductive (head one step later), and the deductive part must be
//! stratifiable. Timestamp values may be copied into ordinary data
//! positions (entanglement), but no arithmetic on them is available beyond
//! the successor step built into inductive rules.

pub mod core;
pub mod tm;

use crate::lex::ParseError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DedalusError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("rule `{0}` violates the timestamp discipline: {1}")]
    BadTime(String, String),
    #[error("rule `{0}` is not range-restricted: variable `{1}` is unbound")]
    NotRangeRestricted(String, String),
    #[error("deductive rules are not stratifiable: negation cycle through `{0}`")]
    NotStratifiable(String),
    #[error("invalid machine: {0}")]
    BadMachine(String),
}

pub use self::core::{
    check_eventual_consistency, eval_dedalus, parse_dedalus, parse_temporal_instance,
    DedalusProgram, DedalusRule, TAtom, TTerm, TemporalFact, TemporalInstance,
};
pub use tm::{
    build_tm_program, parse_machine, run_machine, word_structure, Move, TuringMachine,
};
