//! Error types, one enum per subsystem.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no nodes (or no leaves where leaves are required)")]
    Empty,
    #[error("node ids must be dense: expected {expected}, found {found}")]
    NonDenseIds { expected: usize, found: usize },
    #[error("duplicate leaf token position {0}")]
    DuplicateTokenPosition(usize),
    #[error("edge endpoint out of range: {src} -> {dst}")]
    InvalidEndpoint { src: usize, dst: usize },
    #[error("{etype} edge from node {id} to itself")]
    SelfEdge { id: usize, etype: &'static str },
    #[error("duplicate edge ({src}, {dst}, {etype})")]
    DuplicateEdge { src: usize, dst: usize, etype: &'static str },
    #[error("node {0} has more than one Child parent")]
    MultipleParents(usize),
    #[error("Child edges contain a cycle")]
    ChildCycle,
    #[error("unparseable graph text: {0}")]
    BadText(String),
}

#[derive(Debug, Error)]
pub enum SqlError {
    #[error("lex error at byte {position}: {message}")]
    Lex { position: usize, message: String },
    #[error("syntax error at byte {position}: expected {expected}, found {found}")]
    Syntax { position: usize, expected: String, found: String },
}

impl SqlError {
    pub fn position(&self) -> usize {
        match self {
            SqlError::Lex { position, .. } | SqlError::Syntax { position, .. } => *position,
        }
    }
}

#[derive(Debug, Error)]
pub enum NlError {
    #[error("annotation format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("annotation mismatch for question {question_id}: {message}")]
    Mismatch { question_id: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("external embedding width {found} does not match hidden dim {expected} and no projection is configured")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite value produced in {0}")]
    Numerical(String),
    #[error("scores and labels have different lengths: {scores} vs {labels}")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("cannot encode an empty graph")]
    EmptyGraph,
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("bad checkpoint or embedding file: {0}")]
    BadFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Why a query failed to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecFailure {
    Syntax,
    Runtime,
    Timeout,
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("query failed ({kind:?}): {message}")]
    Query { kind: ExecFailure, message: String },
    #[error("database error: {0}")]
    Database(String),
    #[error("gold query is invalid: {0}")]
    Data(String),
}

impl ExecError {
    pub fn failure_kind(&self) -> Option<ExecFailure> {
        match self {
            ExecError::Query { kind, .. } => Some(*kind),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("beam file format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("duplicate question id {0}")]
    DuplicateQuestion(String),
    #[error("need at least {needed} databases, found {found}")]
    TooFewDatabases { needed: usize, found: usize },
    #[error("prediction for question {0} is missing an execution label")]
    MissingLabels(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no examples to evaluate")]
    EmptyInput,
    #[error("AUC undefined: need at least one positive and one negative example")]
    DegenerateClasses,
    #[error("beam has no predictions")]
    EmptyBeam,
    #[error("dropout uncertainty needs exactly {expected} passes, found {found}")]
    WrongArity { expected: usize, found: usize },
    #[error("need at least {needed} databases for {needed}-fold CV, found {found}")]
    TooFewDatabases { needed: usize, found: usize },
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("beam has {predictions} predictions but {scores} scores were supplied")]
    ArityMismatch { predictions: usize, scores: usize },
    #[error("no examples to evaluate")]
    EmptyInput,
}
