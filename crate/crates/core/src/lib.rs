//! Error detection toolkit for text-to-SQL semantic parsing.
//!
//! The crate labels parser beam predictions by execution-based equivalence,
//! builds structural graphs of questions and SQL queries, trains a
//! graph-attention scorer that estimates the probability a predicted query is
//! correct, and evaluates that scorer on error detection, re-ranking, and
//! action-triggering tasks.

pub mod data;
pub mod error;
pub mod exec;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod nl;
pub mod sql;
pub mod synth;
pub mod tasks;
