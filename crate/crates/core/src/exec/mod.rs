//! Execution-based correctness labeling of predicted SQL against gold SQL
//! over SQLite database files, with the fixed comparison pipeline (tolerant
//! text decoding, empty-gold set-match fallback, order-insensitive column
//! comparison, equal-LIMIT removal) and the naive pipeline it is audited
//! against.

mod compare;
mod label;
mod run;

pub use compare::{canonical_scalar, compare_results, format_g6};
pub use label::{
    evaluate_parser, label_prediction, label_prediction_naive, LabelCache, Labeler,
    ParserEvalReport, PIPELINE_VERSION,
};
pub use run::{create_database, execute, execute_with, TextDecoding};

use serde::{Deserialize, Serialize};

/// One value returned by a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scalar {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

/// Materialized query output, column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub columns: Vec<Vec<Scalar>>,
    pub row_count: usize,
}

impl ExecResult {
    pub fn is_empty(&self) -> bool {
        self.row_count == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelValue {
    Correct,
    Wrong,
    Unexecutable,
}

/// Which comparison path decided the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Order-sensitive execution comparison (gold has a top-level ORDER BY).
    Execution,
    /// Per-column order-insensitive comparison.
    OrderInsensitive,
    /// Gold executed to an empty result; exact set match decided.
    SetMatch,
    /// Prediction rejected by the grammar.
    ParseFailure,
    /// Prediction failed to execute.
    ExecutionFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub value: LabelValue,
    pub provenance: Provenance,
}

impl Label {
    pub fn is_correct(&self) -> bool {
        self.value == LabelValue::Correct
    }

    pub fn is_executable(&self) -> bool {
        self.value != LabelValue::Unexecutable
    }
}
