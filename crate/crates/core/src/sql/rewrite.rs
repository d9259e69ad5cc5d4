//! AST rewrites used by the evaluation pipeline: equal-LIMIT removal,
//! top-level ORDER BY detection, and the exact-set-match canonical form.

use std::collections::BTreeMap;

use super::ast::{AstNode, RuleLabel, SqlAst};
use super::token::TokenKind;

/// When both top-level queries carry a LIMIT with the same argument, removes
/// both LIMIT clauses; otherwise returns the inputs unchanged.
pub fn drop_equal_limits(gold: &SqlAst, pred: &SqlAst) -> (SqlAst, SqlAst) {
    let (Some(gold_arg), Some(pred_arg)) = (top_level_limit_arg(gold), top_level_limit_arg(pred))
    else {
        return (gold.clone(), pred.clone());
    };
    if gold_arg != pred_arg {
        return (gold.clone(), pred.clone());
    }
    (remove_top_level_limit(gold), remove_top_level_limit(pred))
}

/// Normalized argument tokens of the top-level LIMIT clause, if present.
fn top_level_limit_arg(ast: &SqlAst) -> Option<String> {
    ast.root.children().iter().find(|c| c.label() == Some(RuleLabel::LimitClause)).map(|limit| {
        limit
            .tokens()
            .iter()
            .skip(1) // the LIMIT keyword itself
            .map(|t| t.normalized_text())
            .collect::<Vec<_>>()
            .join(" ")
    })
}

fn remove_top_level_limit(ast: &SqlAst) -> SqlAst {
    let children = ast
        .root
        .children()
        .iter()
        .filter(|c| c.label() != Some(RuleLabel::LimitClause))
        .cloned()
        .collect();
    SqlAst { root: AstNode::rule(RuleLabel::SelectStmt, children) }
}

/// True iff the outermost query (not a subquery) has an ORDER BY clause.
pub fn has_top_level_order_by(ast: &SqlAst) -> bool {
    ast.root.children().iter().any(|c| c.label() == Some(RuleLabel::OrderByClause))
}

/// Canonical form for exact set match: keywords and identifiers lowercased,
/// table aliases inlined, and the commutative collections (result columns,
/// top-level AND conjuncts, GROUP BY expressions) sorted. Two queries
/// set-match iff their canonical forms are equal.
pub fn normalize_for_set_match(ast: &SqlAst) -> String {
    canon(&ast.root, &BTreeMap::new())
}

pub fn set_match(a: &SqlAst, b: &SqlAst) -> bool {
    normalize_for_set_match(a) == normalize_for_set_match(b)
}

type AliasEnv = BTreeMap<String, String>;

fn canon(node: &AstNode, env: &AliasEnv) -> String {
    match node {
        AstNode::Token(t) => canon_token_text(t),
        AstNode::Rule { label, children } => match label {
            RuleLabel::SelectCore => {
                let mut scope = env.clone();
                if let Some(from) =
                    children.iter().find(|c| c.label() == Some(RuleLabel::FromClause))
                {
                    collect_aliases(from, &mut scope);
                }
                let parts: Vec<String> = children.iter().map(|c| canon(c, &scope)).collect();
                parts.join(" ")
            }
            RuleLabel::ResultClause => {
                let mut cols: Vec<String> = children
                    .iter()
                    .filter(|c| c.label() == Some(RuleLabel::ResultColumn))
                    .map(|c| canon(c, env))
                    .collect();
                cols.sort();
                cols.join(" , ")
            }
            RuleLabel::WhereClause => {
                let mut conjuncts = Vec::new();
                flatten_and(&children[1], &mut conjuncts);
                let mut parts: Vec<String> = conjuncts.iter().map(|c| canon(c, env)).collect();
                parts.sort();
                format!("where {}", parts.join(" and "))
            }
            RuleLabel::GroupByClause => {
                let mut exprs = Vec::new();
                let mut having = Vec::new();
                let mut in_having = false;
                for c in &children[1..] {
                    if c.token().is_some_and(|t| t.normalized_text() == "having") {
                        in_having = true;
                        continue;
                    }
                    if c.token().is_some_and(|t| t.is_punct(",")) {
                        continue;
                    }
                    if in_having {
                        having.push(canon(c, env));
                    } else {
                        exprs.push(canon(c, env));
                    }
                }
                exprs.sort();
                let mut out = format!("group by {}", exprs.join(" , "));
                if !having.is_empty() {
                    out.push_str(&format!(" having {}", having.join(" ")));
                }
                out
            }
            RuleLabel::TableOrSubquery => {
                // Inline plain table aliases by dropping the alias tokens;
                // subquery aliases are kept since they cannot be inlined.
                if children[0].token().is_some() {
                    canon(&children[0], env)
                } else {
                    let parts: Vec<String> = children.iter().map(|c| canon(c, env)).collect();
                    parts.join(" ")
                }
            }
            RuleLabel::ColumnRef if children.len() == 3 => {
                let qualifier = children[0]
                    .token()
                    .map(|t| t.normalized_text())
                    .unwrap_or_default();
                let table = env.get(&qualifier).cloned().unwrap_or(qualifier);
                format!("{} . {}", table, canon(&children[2], env))
            }
            _ => {
                let parts: Vec<String> = children.iter().map(|c| canon(c, env)).collect();
                parts.join(" ")
            }
        },
    }
}

fn canon_token_text(t: &super::token::SqlToken) -> String {
    let text = t.normalized_text();
    // Operator synonyms collapse so `a <> b` matches `a != b`.
    if t.kind == TokenKind::Operator {
        return match text.as_str() {
            "==" => "=".into(),
            "<>" => "!=".into(),
            other => other.into(),
        };
    }
    text
}

fn collect_aliases(from_clause: &AstNode, env: &mut AliasEnv) {
    for node in from_clause.children() {
        match node.label() {
            Some(RuleLabel::TableOrSubquery) => collect_table_alias(node, env),
            Some(RuleLabel::JoinClause) => {
                for sub in node.children() {
                    if sub.label() == Some(RuleLabel::TableOrSubquery) {
                        collect_table_alias(sub, env);
                    }
                }
            }
            _ => {}
        }
    }
}

fn collect_table_alias(tos: &AstNode, env: &mut AliasEnv) {
    let children = tos.children();
    let Some(table) = children.first().and_then(|c| c.token()) else {
        return; // subquery: alias not inlinable
    };
    if let Some(alias) = children.last().and_then(|c| c.token()) {
        if alias.kind == TokenKind::Identifier && children.len() > 1 {
            env.insert(alias.normalized_text(), table.normalized_text());
        }
    }
}

fn flatten_and<'a>(node: &'a AstNode, out: &mut Vec<&'a AstNode>) {
    if let AstNode::Rule { label: RuleLabel::Expr, children } = node {
        if children.len() == 3
            && children[1].token().is_some_and(|t| t.normalized_text() == "and")
        {
            flatten_and(&children[0], out);
            flatten_and(&children[2], out);
            return;
        }
    }
    out.push(node);
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_sql;
    use super::*;

    #[test]
    fn equal_limits_removed() {
        let gold = parse_sql("SELECT a FROM t ORDER BY a LIMIT 3").unwrap();
        let pred = parse_sql("SELECT b FROM t ORDER BY b DESC LIMIT 3").unwrap();
        let (g, p) = drop_equal_limits(&gold, &pred);
        assert!(!g.render().to_ascii_lowercase().contains("limit"));
        assert!(!p.render().to_ascii_lowercase().contains("limit"));
        assert!(g.render().to_ascii_lowercase().contains("order by"));
    }

    #[test]
    fn unequal_limits_unchanged() {
        let gold = parse_sql("SELECT a FROM t LIMIT 3").unwrap();
        let pred = parse_sql("SELECT a FROM t LIMIT 1").unwrap();
        let (g, p) = drop_equal_limits(&gold, &pred);
        assert!(g.structurally_equal(&gold));
        assert!(p.structurally_equal(&pred));
    }

    #[test]
    fn one_sided_limit_unchanged() {
        let gold = parse_sql("SELECT a FROM t").unwrap();
        let pred = parse_sql("SELECT a FROM t LIMIT 3").unwrap();
        let (g, p) = drop_equal_limits(&gold, &pred);
        assert!(g.structurally_equal(&gold));
        assert!(p.structurally_equal(&pred));
    }

    #[test]
    fn limit_in_subquery_is_not_top_level() {
        let gold =
            parse_sql("SELECT a FROM (SELECT a FROM u LIMIT 3) WHERE a > 0 LIMIT 5").unwrap();
        let pred = parse_sql("SELECT a FROM t LIMIT 3").unwrap();
        let (g, _) = drop_equal_limits(&gold, &pred);
        assert!(g.structurally_equal(&gold)); // top-level args 5 vs 3 differ
    }

    #[test]
    fn top_level_order_by_detection() {
        let with = parse_sql("SELECT a FROM t ORDER BY a").unwrap();
        assert!(has_top_level_order_by(&with));
        let sub =
            parse_sql("SELECT a FROM t WHERE b IN (SELECT b FROM u ORDER BY b)").unwrap();
        assert!(!has_top_level_order_by(&sub));
        let gold = parse_sql(
            "SELECT festival_detail.festival_name FROM festival_detail \
             ORDER BY festival_detail.year DESC LIMIT 3",
        )
        .unwrap();
        assert!(has_top_level_order_by(&gold));
    }

    #[test]
    fn commutative_select_list() {
        let a = parse_sql("SELECT a, b FROM t").unwrap();
        let b = parse_sql("select b , a from t").unwrap();
        assert!(set_match(&a, &b));
    }

    #[test]
    fn commutative_conjuncts() {
        let a = parse_sql("SELECT a FROM t WHERE x > 1 AND y < 2").unwrap();
        let b = parse_sql("SELECT a FROM t WHERE y < 2 AND x > 1").unwrap();
        assert!(set_match(&a, &b));
    }

    #[test]
    fn alias_inlining() {
        let a = parse_sql("SELECT T1.name FROM head AS T1 WHERE T1.age > 5").unwrap();
        let b = parse_sql("SELECT head.name FROM head WHERE head.age > 5").unwrap();
        assert!(set_match(&a, &b));
    }

    #[test]
    fn different_queries_do_not_match() {
        let a = parse_sql("SELECT a FROM t WHERE x > 1").unwrap();
        let b = parse_sql("SELECT a FROM t WHERE x < 1").unwrap();
        assert!(!set_match(&a, &b));
        let c = parse_sql("SELECT a, b FROM t").unwrap();
        let d = parse_sql("SELECT a FROM t").unwrap();
        assert!(!set_match(&c, &d));
    }
}
