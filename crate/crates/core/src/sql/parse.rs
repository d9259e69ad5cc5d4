//! Recursive-descent parser for the modified SQLite grammar: top-level
//! clauses get their own non-terminals under `select_core`, set operations
//! form binary nodes, and coverage is restricted to Spider-style queries.

use crate::error::SqlError;

use super::ast::{AstNode, RuleLabel, SqlAst};
use super::token::{Keyword, SqlToken, TokenKind};

pub fn parse(tokens: Vec<SqlToken>) -> Result<SqlAst, SqlError> {
    let mut p = Parser { tokens, pos: 0 };
    let mut children = vec![p.parse_select_body()?];
    if p.at_keyword(Keyword::OrderBy) {
        children.push(p.parse_order_by_clause()?);
    }
    if p.at_keyword(Keyword::Limit) {
        children.push(p.parse_limit_clause()?);
    }
    if p.at_punct(";") {
        children.push(AstNode::Token(p.bump()));
    }
    if let Some(tok) = p.peek() {
        return Err(p.syntax_error_at(tok.span.0, "end of input", &tok.text.clone()));
    }
    Ok(SqlAst { root: AstNode::rule(RuleLabel::SelectStmt, children) })
}

/// Tokenize and parse in one step.
pub fn parse_sql(sql: &str) -> Result<SqlAst, SqlError> {
    parse(super::token::tokenize(sql)?)
}

struct Parser {
    tokens: Vec<SqlToken>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&SqlToken> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&SqlToken> {
        self.tokens.get(self.pos + offset)
    }

    fn bump(&mut self) -> SqlToken {
        let tok = self.tokens[self.pos].clone();
        self.pos += 1;
        tok
    }

    fn at_keyword(&self, kw: Keyword) -> bool {
        self.peek().is_some_and(|t| t.keyword() == Some(kw))
    }

    fn at_punct(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(text))
    }

    fn at_operator(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is_operator(text))
    }

    fn at_identifier(&self) -> bool {
        self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
    }

    fn error(&self, expected: &str) -> SqlError {
        match self.peek() {
            Some(tok) => self.syntax_error_at(tok.span.0, expected, &tok.text.clone()),
            None => {
                let position = self.tokens.last().map(|t| t.span.1).unwrap_or(0);
                self.syntax_error_at(position, expected, "end of input")
            }
        }
    }

    fn syntax_error_at(&self, position: usize, expected: &str, found: &str) -> SqlError {
        SqlError::Syntax { position, expected: expected.into(), found: found.into() }
    }

    fn expect_keyword(&mut self, kw: Keyword, expected: &str) -> Result<AstNode, SqlError> {
        if self.at_keyword(kw) {
            Ok(AstNode::Token(self.bump()))
        } else {
            Err(self.error(expected))
        }
    }

    fn expect_punct(&mut self, text: &str) -> Result<AstNode, SqlError> {
        if self.at_punct(text) {
            Ok(AstNode::Token(self.bump()))
        } else {
            Err(self.error(&format!("'{text}'")))
        }
    }

    fn expect_identifier(&mut self, expected: &str) -> Result<AstNode, SqlError> {
        if self.at_identifier() {
            Ok(AstNode::Token(self.bump()))
        } else {
            Err(self.error(expected))
        }
    }

    /// select_core (compound operator select_core)*, left-associative.
    fn parse_select_body(&mut self) -> Result<AstNode, SqlError> {
        let mut node = self.parse_select_core()?;
        loop {
            let op = match self.peek().and_then(|t| t.keyword()) {
                Some(kw @ (Keyword::Union | Keyword::Intersect | Keyword::Except)) => kw,
                _ => break,
            };
            let mut children = vec![node, AstNode::Token(self.bump())];
            if op == Keyword::Union && self.at_keyword(Keyword::All) {
                children.push(AstNode::Token(self.bump()));
            }
            children.push(self.parse_select_core()?);
            node = AstNode::rule(RuleLabel::CompoundSelect, children);
        }
        Ok(node)
    }

    /// SELECT (DISTINCT | ALL)? result_clause from_clause? where_clause?
    /// group_by_clause?
    fn parse_select_core(&mut self) -> Result<AstNode, SqlError> {
        let mut children = vec![self.expect_keyword(Keyword::Select, "SELECT")?];
        if self.at_keyword(Keyword::Distinct) || self.at_keyword(Keyword::All) {
            children.push(AstNode::Token(self.bump()));
        }
        children.push(self.parse_result_clause()?);
        if self.at_keyword(Keyword::From) {
            children.push(self.parse_from_clause()?);
        }
        if self.at_keyword(Keyword::Where) {
            let where_tok = AstNode::Token(self.bump());
            let expr = self.parse_expr()?;
            children.push(AstNode::rule(RuleLabel::WhereClause, vec![where_tok, expr]));
        }
        if self.at_keyword(Keyword::GroupBy) {
            children.push(self.parse_group_by_clause()?);
        }
        Ok(AstNode::rule(RuleLabel::SelectCore, children))
    }

    fn parse_result_clause(&mut self) -> Result<AstNode, SqlError> {
        let mut children = vec![self.parse_result_column()?];
        while self.at_punct(",") {
            children.push(AstNode::Token(self.bump()));
            children.push(self.parse_result_column()?);
        }
        Ok(AstNode::rule(RuleLabel::ResultClause, children))
    }

    fn parse_result_column(&mut self) -> Result<AstNode, SqlError> {
        if self.at_operator("*") {
            return Ok(AstNode::rule(RuleLabel::ResultColumn, vec![AstNode::Token(self.bump())]));
        }
        // table.* needs two tokens of lookahead.
        if self.at_identifier()
            && self.peek_at(1).is_some_and(|t| t.is_punct("."))
            && self.peek_at(2).is_some_and(|t| t.is_operator("*"))
        {
            let table = AstNode::Token(self.bump());
            let dot = AstNode::Token(self.bump());
            let star = AstNode::Token(self.bump());
            return Ok(AstNode::rule(RuleLabel::ResultColumn, vec![table, dot, star]));
        }
        let mut children = vec![self.parse_expr()?];
        if self.at_keyword(Keyword::As) {
            children.push(AstNode::Token(self.bump()));
            children.push(self.expect_identifier("column alias")?);
        } else if self.at_identifier() {
            children.push(AstNode::Token(self.bump()));
        }
        Ok(AstNode::rule(RuleLabel::ResultColumn, children))
    }

    /// FROM table_or_subquery (COMMA table_or_subquery)* | FROM join_clause
    fn parse_from_clause(&mut self) -> Result<AstNode, SqlError> {
        let from_tok = self.expect_keyword(Keyword::From, "FROM")?;
        let first = self.parse_table_or_subquery()?;
        if self.at_join_operator() {
            let mut join_children = vec![first];
            while self.at_join_operator() {
                join_children.push(self.parse_join_operator()?);
                join_children.push(self.parse_table_or_subquery()?);
                if self.at_keyword(Keyword::On) || self.at_keyword(Keyword::Using) {
                    join_children.push(self.parse_join_constraint()?);
                }
            }
            let join = AstNode::rule(RuleLabel::JoinClause, join_children);
            return Ok(AstNode::rule(RuleLabel::FromClause, vec![from_tok, join]));
        }
        let mut children = vec![from_tok, first];
        while self.at_punct(",") {
            children.push(AstNode::Token(self.bump()));
            children.push(self.parse_table_or_subquery()?);
        }
        Ok(AstNode::rule(RuleLabel::FromClause, children))
    }

    fn at_join_operator(&self) -> bool {
        matches!(
            self.peek().and_then(|t| t.keyword()),
            Some(
                Keyword::Join
                    | Keyword::Left
                    | Keyword::Right
                    | Keyword::Full
                    | Keyword::Inner
                    | Keyword::Cross
            )
        )
    }

    fn parse_join_operator(&mut self) -> Result<AstNode, SqlError> {
        let mut children = Vec::new();
        match self.peek().and_then(|t| t.keyword()) {
            Some(Keyword::Join) => children.push(AstNode::Token(self.bump())),
            Some(Keyword::Left | Keyword::Right | Keyword::Full) => {
                children.push(AstNode::Token(self.bump()));
                if self.at_keyword(Keyword::Outer) {
                    children.push(AstNode::Token(self.bump()));
                }
                children.push(self.expect_keyword(Keyword::Join, "JOIN")?);
            }
            Some(Keyword::Inner | Keyword::Cross) => {
                children.push(AstNode::Token(self.bump()));
                children.push(self.expect_keyword(Keyword::Join, "JOIN")?);
            }
            _ => return Err(self.error("join operator")),
        }
        Ok(AstNode::rule(RuleLabel::JoinOperator, children))
    }

    fn parse_join_constraint(&mut self) -> Result<AstNode, SqlError> {
        if self.at_keyword(Keyword::On) {
            let on_tok = AstNode::Token(self.bump());
            let expr = self.parse_expr()?;
            return Ok(AstNode::rule(RuleLabel::JoinConstraint, vec![on_tok, expr]));
        }
        let using_tok = self.expect_keyword(Keyword::Using, "ON or USING")?;
        let mut children = vec![using_tok, self.expect_punct("(")?];
        children.push(self.expect_identifier("column name")?);
        while self.at_punct(",") {
            children.push(AstNode::Token(self.bump()));
            children.push(self.expect_identifier("column name")?);
        }
        children.push(self.expect_punct(")")?);
        Ok(AstNode::rule(RuleLabel::JoinConstraint, children))
    }

    fn parse_table_or_subquery(&mut self) -> Result<AstNode, SqlError> {
        let mut children = Vec::new();
        if self.at_punct("(") {
            children.push(self.parse_subquery()?);
        } else {
            children.push(self.expect_identifier("table name or subquery")?);
        }
        if self.at_keyword(Keyword::As) {
            children.push(AstNode::Token(self.bump()));
            children.push(self.expect_identifier("table alias")?);
        } else if self.at_identifier() {
            children.push(AstNode::Token(self.bump()));
        }
        Ok(AstNode::rule(RuleLabel::TableOrSubquery, children))
    }

    fn parse_subquery(&mut self) -> Result<AstNode, SqlError> {
        let open = self.expect_punct("(")?;
        let mut children = vec![open, self.parse_select_body()?];
        if self.at_keyword(Keyword::OrderBy) {
            children.push(self.parse_order_by_clause()?);
        }
        if self.at_keyword(Keyword::Limit) {
            children.push(self.parse_limit_clause()?);
        }
        let inner = AstNode::rule(RuleLabel::SelectStmt, children.split_off(1));
        let close = self.expect_punct(")")?;
        Ok(AstNode::rule(RuleLabel::Subquery, vec![children.pop().unwrap(), inner, close]))
    }

    fn parse_group_by_clause(&mut self) -> Result<AstNode, SqlError> {
        let mut children = vec![self.expect_keyword(Keyword::GroupBy, "GROUP BY")?];
        children.push(self.parse_expr()?);
        while self.at_punct(",") {
            children.push(AstNode::Token(self.bump()));
            children.push(self.parse_expr()?);
        }
        if self.at_keyword(Keyword::Having) {
            children.push(AstNode::Token(self.bump()));
            children.push(self.parse_expr()?);
        }
        Ok(AstNode::rule(RuleLabel::GroupByClause, children))
    }

    fn parse_order_by_clause(&mut self) -> Result<AstNode, SqlError> {
        let mut children = vec![self.expect_keyword(Keyword::OrderBy, "ORDER BY")?];
        children.push(self.parse_ordering_term()?);
        while self.at_punct(",") {
            children.push(AstNode::Token(self.bump()));
            children.push(self.parse_ordering_term()?);
        }
        Ok(AstNode::rule(RuleLabel::OrderByClause, children))
    }

    fn parse_ordering_term(&mut self) -> Result<AstNode, SqlError> {
        let mut children = vec![self.parse_expr()?];
        if self.at_keyword(Keyword::Asc) || self.at_keyword(Keyword::Desc) {
            children.push(AstNode::Token(self.bump()));
        }
        Ok(AstNode::rule(RuleLabel::OrderingTerm, children))
    }

    fn parse_limit_clause(&mut self) -> Result<AstNode, SqlError> {
        let mut children = vec![self.expect_keyword(Keyword::Limit, "LIMIT")?];
        children.push(self.parse_expr()?);
        if self.at_keyword(Keyword::Offset) || self.at_punct(",") {
            children.push(AstNode::Token(self.bump()));
            children.push(self.parse_expr()?);
        }
        Ok(AstNode::rule(RuleLabel::LimitClause, children))
    }

    // ----- expressions, lowest precedence first -----

    fn parse_expr(&mut self) -> Result<AstNode, SqlError> {
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<AstNode, SqlError> {
        let mut node = self.parse_and()?;
        while self.at_keyword(Keyword::Or) {
            let op = AstNode::Token(self.bump());
            let rhs = self.parse_and()?;
            node = AstNode::rule(RuleLabel::Expr, vec![node, op, rhs]);
        }
        Ok(node)
    }

    fn parse_and(&mut self) -> Result<AstNode, SqlError> {
        let mut node = self.parse_not()?;
        while self.at_keyword(Keyword::And) {
            let op = AstNode::Token(self.bump());
            let rhs = self.parse_not()?;
            node = AstNode::rule(RuleLabel::Expr, vec![node, op, rhs]);
        }
        Ok(node)
    }

    fn parse_not(&mut self) -> Result<AstNode, SqlError> {
        if self.at_keyword(Keyword::Not) && !self.peek_at(1).is_some_and(is_postfix_not_follower) {
            let not_tok = AstNode::Token(self.bump());
            let operand = self.parse_not()?;
            return Ok(AstNode::rule(RuleLabel::Expr, vec![not_tok, operand]));
        }
        self.parse_predicate()
    }

    /// Comparison and predicate suffixes over additive expressions.
    fn parse_predicate(&mut self) -> Result<AstNode, SqlError> {
        let lhs = self.parse_additive()?;
        if let Some(tok) = self.peek() {
            if tok.kind == TokenKind::Operator
                && matches!(tok.text.as_str(), "=" | "==" | "!=" | "<>" | "<" | "<=" | ">" | ">=")
            {
                let op = AstNode::Token(self.bump());
                let rhs = self.parse_additive()?;
                return Ok(AstNode::rule(RuleLabel::Expr, vec![lhs, op, rhs]));
            }
        }
        let negated = self.at_keyword(Keyword::Not);
        let after_not = if negated { self.peek_at(1) } else { self.peek() };
        match after_not.and_then(|t| t.keyword()) {
            Some(Keyword::Like) => {
                let mut children = vec![lhs];
                if negated {
                    children.push(AstNode::Token(self.bump()));
                }
                children.push(AstNode::Token(self.bump()));
                children.push(self.parse_additive()?);
                Ok(AstNode::rule(RuleLabel::Expr, children))
            }
            Some(Keyword::Between) => {
                let mut children = vec![lhs];
                if negated {
                    children.push(AstNode::Token(self.bump()));
                }
                children.push(AstNode::Token(self.bump()));
                children.push(self.parse_additive()?);
                children.push(self.expect_keyword(Keyword::And, "AND")?);
                children.push(self.parse_additive()?);
                Ok(AstNode::rule(RuleLabel::Expr, children))
            }
            Some(Keyword::In) => {
                let mut children = vec![lhs];
                if negated {
                    children.push(AstNode::Token(self.bump()));
                }
                children.push(AstNode::Token(self.bump()));
                children.extend(self.parse_in_rhs()?);
                Ok(AstNode::rule(RuleLabel::Expr, children))
            }
            Some(Keyword::Is) if !negated => {
                let mut children = vec![lhs, AstNode::Token(self.bump())];
                if self.at_keyword(Keyword::Not) {
                    children.push(AstNode::Token(self.bump()));
                }
                children.push(self.parse_additive()?);
                Ok(AstNode::rule(RuleLabel::Expr, children))
            }
            _ => Ok(lhs),
        }
    }

    fn parse_in_rhs(&mut self) -> Result<Vec<AstNode>, SqlError> {
        if self.at_punct("(") && self.peek_at(1).is_some_and(is_select_start) {
            return Ok(vec![self.parse_subquery()?]);
        }
        let mut children = vec![self.expect_punct("(")?];
        children.push(self.parse_expr()?);
        while self.at_punct(",") {
            children.push(AstNode::Token(self.bump()));
            children.push(self.parse_expr()?);
        }
        children.push(self.expect_punct(")")?);
        Ok(children)
    }

    fn parse_additive(&mut self) -> Result<AstNode, SqlError> {
        let mut node = self.parse_multiplicative()?;
        while self.at_operator("+") || self.at_operator("-") || self.at_operator("||") {
            let op = AstNode::Token(self.bump());
            let rhs = self.parse_multiplicative()?;
            node = AstNode::rule(RuleLabel::Expr, vec![node, op, rhs]);
        }
        Ok(node)
    }

    fn parse_multiplicative(&mut self) -> Result<AstNode, SqlError> {
        let mut node = self.parse_unary()?;
        while self.at_operator("*") || self.at_operator("/") || self.at_operator("%") {
            let op = AstNode::Token(self.bump());
            let rhs = self.parse_unary()?;
            node = AstNode::rule(RuleLabel::Expr, vec![node, op, rhs]);
        }
        Ok(node)
    }

    fn parse_unary(&mut self) -> Result<AstNode, SqlError> {
        if self.at_operator("+") || self.at_operator("-") {
            let op = AstNode::Token(self.bump());
            let operand = self.parse_unary()?;
            return Ok(AstNode::rule(RuleLabel::Expr, vec![op, operand]));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<AstNode, SqlError> {
        let Some(tok) = self.peek() else {
            return Err(self.error("expression"));
        };
        match tok.kind {
            TokenKind::Number | TokenKind::StringLit => Ok(AstNode::Token(self.bump())),
            TokenKind::Keyword(Keyword::Null) => Ok(AstNode::Token(self.bump())),
            TokenKind::Keyword(Keyword::Exists) => {
                let exists_tok = AstNode::Token(self.bump());
                let sub = self.parse_subquery()?;
                Ok(AstNode::rule(RuleLabel::Expr, vec![exists_tok, sub]))
            }
            TokenKind::Punct if tok.text == "(" => {
                if self.peek_at(1).is_some_and(is_select_start) {
                    return self.parse_subquery();
                }
                let open = AstNode::Token(self.bump());
                let inner = self.parse_expr()?;
                let close = self.expect_punct(")")?;
                Ok(AstNode::rule(RuleLabel::Expr, vec![open, inner, close]))
            }
            TokenKind::Identifier => {
                if self.peek_at(1).is_some_and(|t| t.is_punct("(")) {
                    return self.parse_function_call();
                }
                let first = AstNode::Token(self.bump());
                if self.at_punct(".")
                    && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier)
                {
                    let dot = AstNode::Token(self.bump());
                    let col = AstNode::Token(self.bump());
                    return Ok(AstNode::rule(RuleLabel::ColumnRef, vec![first, dot, col]));
                }
                Ok(AstNode::rule(RuleLabel::ColumnRef, vec![first]))
            }
            _ => Err(self.error("expression")),
        }
    }

    fn parse_function_call(&mut self) -> Result<AstNode, SqlError> {
        let name = AstNode::Token(self.bump());
        let mut children = vec![name, self.expect_punct("(")?];
        if self.at_keyword(Keyword::Distinct) {
            children.push(AstNode::Token(self.bump()));
        }
        if self.at_operator("*") {
            children.push(AstNode::Token(self.bump()));
        } else if !self.at_punct(")") {
            children.push(self.parse_expr()?);
            while self.at_punct(",") {
                children.push(AstNode::Token(self.bump()));
                children.push(self.parse_expr()?);
            }
        }
        children.push(self.expect_punct(")")?);
        Ok(AstNode::rule(RuleLabel::FunctionCall, children))
    }
}

fn is_select_start(tok: &SqlToken) -> bool {
    tok.keyword() == Some(Keyword::Select)
}

/// After `x NOT`, these start postfix predicates (`NOT IN`, `NOT LIKE`,
/// `NOT BETWEEN`) rather than a prefixed negation.
fn is_postfix_not_follower(tok: &SqlToken) -> bool {
    matches!(tok.keyword(), Some(Keyword::In | Keyword::Like | Keyword::Between))
}

#[cfg(test)]
mod tests {
    use super::super::token::tokenize;
    use super::*;

    fn parse_ok(sql: &str) -> SqlAst {
        parse_sql(sql).unwrap_or_else(|e| panic!("{sql}: {e}"))
    }

    fn find_labels(node: &AstNode, label: RuleLabel, out: &mut usize) {
        if node.label() == Some(label) {
            *out += 1;
        }
        for c in node.children() {
            find_labels(c, label, out);
        }
    }

    fn count_label(ast: &SqlAst, label: RuleLabel) -> usize {
        let mut n = 0;
        find_labels(&ast.root, label, &mut n);
        n
    }

    #[test]
    fn optional_clauses_absent() {
        let ast = parse_ok("SELECT a FROM t");
        assert_eq!(count_label(&ast, RuleLabel::ResultClause), 1);
        assert_eq!(count_label(&ast, RuleLabel::FromClause), 1);
        assert_eq!(count_label(&ast, RuleLabel::WhereClause), 0);
        assert_eq!(count_label(&ast, RuleLabel::GroupByClause), 0);
    }

    #[test]
    fn order_by_and_limit_constructs() {
        let ast = parse_ok(
            "SELECT festival_detail.festival_name FROM festival_detail \
             ORDER BY festival_detail.year DESC LIMIT 3",
        );
        assert_eq!(count_label(&ast, RuleLabel::OrderByClause), 1);
        assert_eq!(count_label(&ast, RuleLabel::LimitClause), 1);
        assert_eq!(count_label(&ast, RuleLabel::SelectCore), 1);
    }

    #[test]
    fn every_token_appears_exactly_once_as_leaf() {
        let sql = "SELECT COUNT(*) , department.name FROM management \
                   JOIN head ON management.head_ID = head.head_ID \
                   WHERE head.age > 56 GROUP BY department.name";
        let toks = tokenize(sql).unwrap();
        let ast = parse_ok(sql);
        let leaves = ast.root.tokens();
        assert_eq!(leaves.len(), toks.len());
        for (leaf, tok) in leaves.iter().zip(&toks) {
            assert_eq!(leaf.span, tok.span);
        }
    }

    #[test]
    fn set_operations_form_binary_nodes() {
        let ast = parse_ok("SELECT a FROM t UNION SELECT b FROM u INTERSECT SELECT c FROM v");
        assert_eq!(count_label(&ast, RuleLabel::CompoundSelect), 2);
        // Left-associative: the outer compound's left child is a compound.
        let body = &ast.root.children()[0];
        assert_eq!(body.label(), Some(RuleLabel::CompoundSelect));
        assert_eq!(body.children()[0].label(), Some(RuleLabel::CompoundSelect));
    }

    #[test]
    fn subqueries_nest() {
        let ast = parse_ok(
            "SELECT COUNT(*) FROM department WHERE department.department_id in \
             (SELECT management.department_ID FROM management, head WHERE head.age = 56)",
        );
        assert_eq!(count_label(&ast, RuleLabel::Subquery), 1);
        assert_eq!(count_label(&ast, RuleLabel::SelectCore), 2);
    }

    #[test]
    fn clause_order_enforced() {
        assert!(parse_sql("SELECT a FROM t GROUP BY a WHERE a > 1").is_err());
        assert!(parse_sql("SELECT a FROM t LIMIT 3 ORDER BY a").is_err());
        assert!(parse_sql("SELECT ( DISTINCT department.department_id) from management").is_err());
    }

    #[test]
    fn round_trip_preserves_structure() {
        let queries = [
            "SELECT 1",
            "SELECT * FROM head WHERE head.age > 56",
            "SELECT name , COUNT(*) FROM t GROUP BY name HAVING COUNT(*) >= 2 \
             ORDER BY COUNT(*) DESC , name ASC LIMIT 5",
            "SELECT T1.name FROM head AS T1 JOIN management AS T2 ON T1.head_ID = T2.head_ID",
            "SELECT a FROM t WHERE b BETWEEN 1 AND 3 OR c NOT LIKE '%x%' AND NOT d = 2",
            "SELECT avg(age) FROM t WHERE x IS NOT NULL",
            "SELECT a FROM (SELECT a FROM u LIMIT 10) WHERE a != 0",
        ];
        for sql in queries {
            let ast = parse_ok(sql);
            let again = parse_ok(&ast.render());
            assert!(ast.structurally_equal(&again), "round trip changed: {sql}");
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_sql("SELECT FROM t").unwrap_err();
        match err {
            SqlError::Syntax { position, .. } => assert_eq!(position, 7),
            other => panic!("unexpected {other:?}"),
        }
    }
}
