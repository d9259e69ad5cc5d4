//! Reading precomputed linguistic annotations and building the merged
//! dependency + constituency question graph.
//!
//! Annotation file format (UTF-8, one record per line, tab-separated):
//!
//! ```text
//! question_id <TAB> tokens <TAB> heads <TAB> relations <TAB> bracketed tree
//! ```
//!
//! `tokens`, `heads`, and `relations` are space-separated and aligned; heads
//! are 1-based with 0 for the artificial root. The bracketed tree is an
//! s-expression `(LABEL child ...)` whose leaf sequence must equal the token
//! column exactly (tokens containing whitespace or parentheses must already
//! be escaped consistently in both columns, e.g. PTB-style `-LRB-`).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::NlError;
use crate::graph::{
    add_sequential_edges, simplify_tree, Edge, EdgeType, Graph, Node, NodeKind, TokenizedGraph,
};

/// Precomputed dependency and constituency parses for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionAnnotation {
    pub question_id: String,
    pub tokens: Vec<String>,
    /// 1-based head index per token; 0 means the artificial root.
    pub dep_heads: Vec<usize>,
    pub dep_rels: Vec<String>,
    /// Bracketed constituency tree whose leaves are `tokens`.
    pub constituency: String,
}

impl QuestionAnnotation {
    pub fn validate(&self, line: usize) -> Result<(), NlError> {
        if self.tokens.is_empty() {
            return Err(NlError::Format { line, message: "empty token list".into() });
        }
        if self.tokens.len() != self.dep_heads.len() || self.tokens.len() != self.dep_rels.len()
        {
            return Err(NlError::Mismatch {
                question_id: self.question_id.clone(),
                message: format!(
                    "{} tokens vs {} heads vs {} relations",
                    self.tokens.len(),
                    self.dep_heads.len(),
                    self.dep_rels.len()
                ),
            });
        }
        let n = self.tokens.len();
        let mut roots = 0;
        for &h in &self.dep_heads {
            if h > n {
                return Err(NlError::Mismatch {
                    question_id: self.question_id.clone(),
                    message: format!("head index {h} out of range (n = {n})"),
                });
            }
            if h == 0 {
                roots += 1;
            }
        }
        if roots != 1 {
            return Err(NlError::Mismatch {
                question_id: self.question_id.clone(),
                message: format!("dependency tree must have exactly one root, found {roots}"),
            });
        }
        if dep_tree_has_cycle(&self.dep_heads) {
            return Err(NlError::Mismatch {
                question_id: self.question_id.clone(),
                message: "dependency heads contain a cycle".into(),
            });
        }
        let tree = parse_bracketed(&self.constituency).map_err(|message| NlError::Mismatch {
            question_id: self.question_id.clone(),
            message,
        })?;
        let leaves = tree.leaves();
        if leaves != self.tokens {
            return Err(NlError::Mismatch {
                question_id: self.question_id.clone(),
                message: "constituency leaves do not equal the token list".into(),
            });
        }
        Ok(())
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.question_id,
            self.tokens.join(" "),
            self.dep_heads.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(" "),
            self.dep_rels.join(" "),
            self.constituency
        )
    }
}

fn dep_tree_has_cycle(heads: &[usize]) -> bool {
    let n = heads.len();
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        loop {
            let h = heads[cur];
            if h == 0 {
                break;
            }
            cur = h - 1;
            steps += 1;
            if steps > n {
                return true;
            }
        }
    }
    false
}

/// Reads and validates every record; the result maps question ids to their
/// annotations.
pub fn read_annotations(path: &Path) -> Result<BTreeMap<String, QuestionAnnotation>, NlError> {
    let text = fs::read_to_string(path)?;
    read_annotations_str(&text)
}

pub fn read_annotations_str(
    text: &str,
) -> Result<BTreeMap<String, QuestionAnnotation>, NlError> {
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(NlError::Format {
                line: line_no,
                message: format!("expected 5 tab-separated fields, found {}", fields.len()),
            });
        }
        let heads: Result<Vec<usize>, _> =
            fields[2].split_whitespace().map(|s| s.parse::<usize>()).collect();
        let heads = heads.map_err(|_| NlError::Format {
            line: line_no,
            message: "head list must be integers".into(),
        })?;
        let ann = QuestionAnnotation {
            question_id: fields[0].to_string(),
            tokens: fields[1].split_whitespace().map(str::to_string).collect(),
            dep_heads: heads,
            dep_rels: fields[3].split_whitespace().map(str::to_string).collect(),
            constituency: fields[4].trim().to_string(),
        };
        ann.validate(line_no)?;
        if out.insert(ann.question_id.clone(), ann).is_some() {
            return Err(NlError::Format {
                line: line_no,
                message: "duplicate question id".into(),
            });
        }
    }
    Ok(out)
}

pub fn write_annotations(
    path: &Path,
    annotations: &BTreeMap<String, QuestionAnnotation>,
) -> Result<(), NlError> {
    let mut out = String::new();
    for ann in annotations.values() {
        out.push_str(&ann.to_line());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Builds the question graph: constituency tree as `Child` edges, one
/// `Dependency` edge per non-root arc (head leaf to dependent leaf), and
/// `Sequential` edges over the leaves. `simplify` collapses unary internals.
pub fn build_question_graph(
    ann: &QuestionAnnotation,
    simplify: bool,
) -> Result<TokenizedGraph, NlError> {
    let tree = parse_bracketed(&ann.constituency).map_err(|message| NlError::Mismatch {
        question_id: ann.question_id.clone(),
        message,
    })?;

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut leaf_ids = Vec::new();
    build_nodes(&tree, None, &mut nodes, &mut edges, &mut leaf_ids);

    for (dependent, &head) in ann.dep_heads.iter().enumerate() {
        if head == 0 {
            continue; // artificial-root arc has no leaf counterpart
        }
        edges.push(Edge {
            src: leaf_ids[head - 1],
            dst: leaf_ids[dependent],
            etype: EdgeType::Dependency,
        });
    }

    let graph = Graph::new(nodes, edges)?;
    let graph = if simplify { simplify_tree(&graph)? } else { graph };
    let graph = add_sequential_edges(&graph)?;
    Ok(TokenizedGraph { graph, tokens: ann.tokens.clone() })
}

fn build_nodes(
    tree: &BracketedNode,
    parent: Option<usize>,
    nodes: &mut Vec<Node>,
    edges: &mut Vec<Edge>,
    leaf_ids: &mut Vec<usize>,
) {
    let id = nodes.len();
    match tree {
        BracketedNode::Leaf(_) => {
            nodes.push(Node { id, kind: NodeKind::Leaf { token_position: leaf_ids.len() } });
            leaf_ids.push(id);
        }
        BracketedNode::Internal { label, children } => {
            nodes.push(Node { id, kind: NodeKind::Internal { label: label.clone() } });
            for child in children {
                build_nodes(child, Some(id), nodes, edges, leaf_ids);
            }
        }
    }
    if let Some(p) = parent {
        edges.push(Edge { src: p, dst: id, etype: EdgeType::Child });
    }
}

#[derive(Debug, Clone, PartialEq)]
enum BracketedNode {
    Internal { label: String, children: Vec<BracketedNode> },
    Leaf(String),
}

impl BracketedNode {
    fn leaves(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<String>) {
        match self {
            BracketedNode::Leaf(t) => out.push(t.clone()),
            BracketedNode::Internal { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }
}

/// Parses `(LABEL child ...)` where a child is another bracketed node or a
/// bare token.
fn parse_bracketed(text: &str) -> Result<BracketedNode, String> {
    let mut chars = text.char_indices().peekable();
    let node = parse_bracketed_node(text, &mut chars)?;
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else {
            return Err(format!("trailing input at byte {i}"));
        }
    }
    Ok(node)
}

fn parse_bracketed_node(
    text: &str,
    chars: &mut std::iter::Peekable<std::str::CharIndices>,
) -> Result<BracketedNode, String> {
    while chars.peek().is_some_and(|&(_, c)| c.is_whitespace()) {
        chars.next();
    }
    match chars.peek() {
        Some(&(_, '(')) => {
            chars.next();
            let label = read_symbol(text, chars)?;
            if label.is_empty() {
                return Err("constituent label missing after '('".into());
            }
            let mut children = Vec::new();
            loop {
                while chars.peek().is_some_and(|&(_, c)| c.is_whitespace()) {
                    chars.next();
                }
                match chars.peek() {
                    Some(&(_, ')')) => {
                        chars.next();
                        break;
                    }
                    Some(_) => children.push(parse_bracketed_node(text, chars)?),
                    None => return Err("unbalanced '(' in bracketed tree".into()),
                }
            }
            if children.is_empty() {
                return Err(format!("constituent ({label}) has no children"));
            }
            Ok(BracketedNode::Internal { label, children })
        }
        Some(_) => {
            let token = read_symbol(text, chars)?;
            Ok(BracketedNode::Leaf(token))
        }
        None => Err("empty bracketed tree".into()),
    }
}

fn read_symbol(
    text: &str,
    chars: &mut std::iter::Peekable<std::str::CharIndices>,
) -> Result<String, String> {
    let start = match chars.peek() {
        Some(&(i, _)) => i,
        None => return Err("unexpected end of bracketed tree".into()),
    };
    let mut end = start;
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() || c == '(' || c == ')' {
            break;
        }
        end = i + c.len_utf8();
        chars.next();
    }
    Ok(text[start..end].to_string())
}
