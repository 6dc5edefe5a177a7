//! Core of a step-wise query-construction agent for question answering over
//! a triple store or a single table.
//!
//! The model builds a [`QueryProgram`] one tool call at a time. Each call is
//! executed against an embedded engine ([`TripleStore`] or [`Table`]) and the
//! resulting feedback goes through the [`eraser`] trigger registry, which
//! either accepts the step or replaces its observation with a guideline.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod action;
pub mod answer;
pub mod eraser;
pub mod kb;
pub mod metrics;
pub mod program;
pub mod ranker;
pub mod table;
pub mod term;

pub use action::{
    parse_action, parse_thought, ActionParse, Arg, ArgKind, EntityLink, ParsedAction,
};
pub use answer::AnswerSet;
pub use eraser::{Diagnosis, EnvFeedback, ErrorKind, MemorySnapshot, TriggerRegistry};
pub use kb::{BindingTable, Evaluation, StoreError, Triple, TripleStore};
pub use program::{AggregationKind, BuildError, CompareOp, Dialect, QueryProgram, TableSchema};
pub use ranker::{rank_relations, Embedder, HashedNgramEmbedder};
pub use table::{Column, ColumnType, Table, TableError};
pub use term::{Literal, Term, Variable};
