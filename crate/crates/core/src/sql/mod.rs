//! Tokenizer, recursive parser, parse-tree graphs, and the AST rewrites used
//! by execution-based evaluation.

pub mod ast;
pub mod graph;
pub mod parse;
pub mod rewrite;
pub mod token;

pub use ast::{AstNode, RuleLabel, SqlAst};
pub use parse::{parse, parse_sql};
pub use token::{tokenize, Keyword, SqlToken, TokenKind};
