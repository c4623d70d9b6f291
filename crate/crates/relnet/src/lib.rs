//! Relational transducer networks: Datalog evaluation, single-node
//! transducer semantics, network simulation, and verification harnesses
//! for consistency, topology independence, coordination-freeness, and
//! monotonicity, plus a temporal (timestamped) Datalog interpreter.

pub mod data;
pub mod lex;
pub mod parse;
pub mod query;
pub mod eval;
pub mod transducer;
pub mod netsim;
pub mod harness;
pub mod dedalus;

pub use data::{sym, DataElement, DatabaseSchema, Fact, Instance, SchemaError, Symbol, Tuples};
pub use eval::{eval, eval_tuples, EvalError};
pub use lex::ParseError;
pub use parse::{parse_instance, parse_instance_with_schema, parse_rules};
pub use query::{Atom, Dialect, QueryError, QueryProgram, Rule, Term};
