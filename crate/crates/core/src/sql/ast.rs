//! Parse trees for the modified SQLite grammar. Internal nodes carry
//! grammar non-terminal labels; leaves are the input tokens, each appearing
//! exactly once.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::token::SqlToken;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleLabel {
    SelectStmt,
    CompoundSelect,
    SelectCore,
    ResultClause,
    ResultColumn,
    FromClause,
    TableOrSubquery,
    JoinClause,
    JoinOperator,
    JoinConstraint,
    WhereClause,
    GroupByClause,
    OrderByClause,
    OrderingTerm,
    LimitClause,
    Expr,
    ColumnRef,
    FunctionCall,
    Subquery,
}

impl RuleLabel {
    pub fn name(self) -> &'static str {
        match self {
            RuleLabel::SelectStmt => "select_stmt",
            RuleLabel::CompoundSelect => "compound_select",
            RuleLabel::SelectCore => "select_core",
            RuleLabel::ResultClause => "result_clause",
            RuleLabel::ResultColumn => "result_column",
            RuleLabel::FromClause => "from_clause",
            RuleLabel::TableOrSubquery => "table_or_subquery",
            RuleLabel::JoinClause => "join_clause",
            RuleLabel::JoinOperator => "join_operator",
            RuleLabel::JoinConstraint => "join_constraint",
            RuleLabel::WhereClause => "where_clause",
            RuleLabel::GroupByClause => "group_by_clause",
            RuleLabel::OrderByClause => "order_by_clause",
            RuleLabel::OrderingTerm => "ordering_term",
            RuleLabel::LimitClause => "limit_clause",
            RuleLabel::Expr => "expr",
            RuleLabel::ColumnRef => "column_ref",
            RuleLabel::FunctionCall => "function_call",
            RuleLabel::Subquery => "subquery",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AstNode {
    Rule { label: RuleLabel, children: Vec<AstNode> },
    Token(SqlToken),
}

impl AstNode {
    pub fn rule(label: RuleLabel, children: Vec<AstNode>) -> AstNode {
        AstNode::Rule { label, children }
    }

    pub fn label(&self) -> Option<RuleLabel> {
        match self {
            AstNode::Rule { label, .. } => Some(*label),
            AstNode::Token(_) => None,
        }
    }

    pub fn children(&self) -> &[AstNode] {
        match self {
            AstNode::Rule { children, .. } => children,
            AstNode::Token(_) => &[],
        }
    }

    pub fn token(&self) -> Option<&SqlToken> {
        match self {
            AstNode::Token(t) => Some(t),
            AstNode::Rule { .. } => None,
        }
    }

    /// All leaf tokens in left-to-right order.
    pub fn tokens(&self) -> Vec<&SqlToken> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens<'a>(&'a self, out: &mut Vec<&'a SqlToken>) {
        match self {
            AstNode::Token(t) => out.push(t),
            AstNode::Rule { children, .. } => {
                for c in children {
                    c.collect_tokens(out);
                }
            }
        }
    }

    /// Structural equality ignoring byte spans: labels, token kinds, and
    /// token texts must match.
    pub fn structurally_equal(&self, other: &AstNode) -> bool {
        match (self, other) {
            (AstNode::Token(a), AstNode::Token(b)) => a.kind == b.kind && a.text == b.text,
            (
                AstNode::Rule { label: la, children: ca },
                AstNode::Rule { label: lb, children: cb },
            ) => {
                la == lb
                    && ca.len() == cb.len()
                    && ca.iter().zip(cb).all(|(x, y)| x.structurally_equal(y))
            }
            _ => false,
        }
    }

    fn write_sexpr(&self, out: &mut String) {
        match self {
            AstNode::Token(t) => {
                let escaped = t.text.replace('\\', "\\\\").replace('"', "\\\"");
                let _ = write!(out, "({} \"{}\")", t.kind.short_name(), escaped);
            }
            AstNode::Rule { label, children } => {
                let _ = write!(out, "({}", label.name());
                for c in children {
                    out.push(' ');
                    c.write_sexpr(out);
                }
                out.push(')');
            }
        }
    }
}

/// Parse tree of one SQL statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlAst {
    pub root: AstNode,
}

impl SqlAst {
    /// SQL text reassembled from leaf tokens, single-space separated.
    pub fn render(&self) -> String {
        self.root
            .tokens()
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// S-expression debug form for golden tests.
    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        self.root.write_sexpr(&mut out);
        out
    }

    pub fn structurally_equal(&self, other: &SqlAst) -> bool {
        self.root.structurally_equal(&other.root)
    }
}
