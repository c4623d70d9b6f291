//! Verification harness: horizontal partitions, budgeted property
//! checkers, a corpus of reference programs with independent oracles, and
//! two mechanized replay arguments.

pub mod checks;
pub mod corpus;
pub mod partitions;
pub mod replay;
pub mod verdict;

use crate::data::SchemaError;
use crate::eval::EvalError;
use crate::lex::ParseError;
use crate::netsim::NetError;
use crate::query::QueryError;
use crate::transducer::TransducerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Transducer(#[from] TransducerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("{} partitions exceed the budget of {budget}", .needed.map(|n| n.to_string()).unwrap_or_else(|| "over 2^128".to_string()))]
    BudgetExceeded { needed: Option<u128>, budget: usize },
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("unknown corpus entry `{0}`")]
    UnknownEntry(String),
}

pub use checks::{
    check_consistency, check_coordination_free, check_monotone,
    check_topology_independence, distributed_output, CheckOptions,
};
pub use corpus::{build_datalog_runner, corpus, corpus_entry, CorpusEntry};
pub use partitions::{
    enumerate_partitions, partition_count, sample_partitions, HorizontalPartition,
};
pub use replay::{adversarial_extension_replay, ring_fifo_replay};
pub use verdict::{CheckVerdict, Explored, Property, VerdictKind};
