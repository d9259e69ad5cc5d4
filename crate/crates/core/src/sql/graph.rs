//! Conversion of SQL parse trees into encoder graphs.

use crate::graph::{Edge, EdgeType, Graph, Node, NodeKind, TokenizedGraph};
use crate::graph::{add_sequential_edges, simplify_tree};

use super::ast::{AstNode, RuleLabel, SqlAst};

#[derive(Debug, Clone, Copy)]
pub struct AstGraphOptions {
    /// Delete join-constraint subtrees (ON/USING conditions) before
    /// conversion; the joined table names stay.
    pub prune_joins: bool,
    /// Collapse unary internal nodes after conversion.
    pub simplify: bool,
}

impl Default for AstGraphOptions {
    fn default() -> Self {
        AstGraphOptions { prune_joins: true, simplify: true }
    }
}

/// Builds the SQL graph: internal AST nodes become labeled internal nodes,
/// tokens become leaves in span order, join constraints are optionally
/// pruned, and sequential edges over the leaves are always added.
pub fn ast_to_graph(ast: &SqlAst, opts: AstGraphOptions) -> TokenizedGraph {
    let root = if opts.prune_joins {
        prune_join_constraints(&ast.root).expect("statement root is a rule node, never pruned")
    } else {
        ast.root.clone()
    };

    let mut builder = Builder { nodes: Vec::new(), edges: Vec::new(), tokens: Vec::new() };
    builder.walk(&root, None);
    let graph = Graph::new(builder.nodes, builder.edges)
        .expect("parse trees satisfy graph invariants");
    let graph = if opts.simplify {
        simplify_tree(&graph).expect("parse trees are non-empty")
    } else {
        graph
    };
    let graph = add_sequential_edges(&graph).expect("parse trees have leaves");
    TokenizedGraph { graph, tokens: builder.tokens }
}

fn prune_join_constraints(node: &AstNode) -> Option<AstNode> {
    match node {
        AstNode::Token(_) => Some(node.clone()),
        AstNode::Rule { label, children } => {
            if *label == RuleLabel::JoinConstraint {
                return None;
            }
            let kept: Vec<AstNode> =
                children.iter().filter_map(prune_join_constraints).collect();
            Some(AstNode::Rule { label: *label, children: kept })
        }
    }
}

struct Builder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    tokens: Vec<String>,
}

impl Builder {
    fn walk(&mut self, node: &AstNode, parent: Option<usize>) {
        let id = self.nodes.len();
        match node {
            AstNode::Token(t) => {
                let position = self.tokens.len();
                self.tokens.push(t.normalized_text());
                self.nodes.push(Node { id, kind: NodeKind::Leaf { token_position: position } });
            }
            AstNode::Rule { label, children } => {
                self.nodes.push(Node {
                    id,
                    kind: NodeKind::Internal { label: label.name().to_string() },
                });
                for child in children {
                    self.walk(child, Some(id));
                }
            }
        }
        if let Some(p) = parent {
            self.edges.push(Edge { src: p, dst: id, etype: EdgeType::Child });
        }
    }
}
