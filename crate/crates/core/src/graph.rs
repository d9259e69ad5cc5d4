//! Directed labeled graphs shared by question graphs and SQL parse-tree graphs.
//!
//! A [`Graph`] holds typed nodes (token leaves and labeled internals) and
//! typed edges. `Child` edges always form a forest; `Dependency` and
//! `Sequential` edges connect leaves. The tree-simplification and
//! edge-augmentation passes used before graph encoding live here.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// What a node stands for: a source token or a labeled constituent/rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    /// A token of the underlying question or SQL string.
    Leaf { token_position: usize },
    /// A non-terminal carrying a label from a node-type vocabulary.
    Internal { label: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    pub fn token_position(&self) -> Option<usize> {
        match self.kind {
            NodeKind::Leaf { token_position } => Some(token_position),
            NodeKind::Internal { .. } => None,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Internal { label } => Some(label),
            NodeKind::Leaf { .. } => None,
        }
    }
}

/// Edge types the encoder distinguishes via a per-type attention bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    /// Parse-tree parent-to-child edge.
    Child,
    /// Dependency arc between two leaves (head to dependent).
    Dependency,
    /// Leaf-to-next-leaf edge in token order.
    Sequential,
    /// Node-to-itself edge added for message passing.
    SelfLoop,
}

impl EdgeType {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            EdgeType::Child => 0,
            EdgeType::Dependency => 1,
            EdgeType::Sequential => 2,
            EdgeType::SelfLoop => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::Child => "child",
            EdgeType::Dependency => "dependency",
            EdgeType::Sequential => "sequential",
            EdgeType::SelfLoop => "self_loop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub etype: EdgeType,
}

/// A graph bundled with the token strings its leaves point into:
/// `tokens[p]` is the text of the leaf with `token_position == p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedGraph {
    pub graph: Graph,
    pub tokens: Vec<String>,
}

/// Immutable directed labeled graph.
///
/// Invariants checked at construction:
/// - node ids are dense `0..n-1` (index equals id);
/// - leaf `token_position`s are unique;
/// - edge endpoints are valid and `src != dst` except for `SelfLoop` edges;
/// - no duplicate `(src, dst, etype)` triples;
/// - `Child` edges form a forest (at most one parent per node, no cycles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    leaf_order: Vec<usize>,
}

impl Graph {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(GraphError::NonDenseIds { expected: i, found: node.id });
            }
        }
        let mut positions = BTreeSet::new();
        for node in &nodes {
            if let Some(pos) = node.token_position() {
                if !positions.insert(pos) {
                    return Err(GraphError::DuplicateTokenPosition(pos));
                }
            }
        }
        let mut seen = BTreeSet::new();
        let mut child_parent = vec![None; nodes.len()];
        for edge in &edges {
            if edge.src >= nodes.len() || edge.dst >= nodes.len() {
                return Err(GraphError::InvalidEndpoint { src: edge.src, dst: edge.dst });
            }
            if edge.src == edge.dst && edge.etype != EdgeType::SelfLoop {
                return Err(GraphError::SelfEdge { id: edge.src, etype: edge.etype.name() });
            }
            if !seen.insert(*edge) {
                return Err(GraphError::DuplicateEdge {
                    src: edge.src,
                    dst: edge.dst,
                    etype: edge.etype.name(),
                });
            }
            if edge.etype == EdgeType::Child {
                if child_parent[edge.dst].is_some() {
                    return Err(GraphError::MultipleParents(edge.dst));
                }
                child_parent[edge.dst] = Some(edge.src);
            }
        }
        check_child_acyclic(&child_parent)?;

        let mut leaves: Vec<usize> = nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect();
        leaves.sort_by_key(|&id| nodes[id].token_position().expect("leaf"));
        Ok(Graph { nodes, edges, leaf_order: leaves })
    }

    /// Constructor for message-passing forms (symmetrized edges, self-loops)
    /// where reversed Child edges are expected and the forest check must be
    /// skipped. Endpoints and duplicate triples are still validated.
    fn new_symmetric(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for edge in &edges {
            if edge.src >= nodes.len() || edge.dst >= nodes.len() {
                return Err(GraphError::InvalidEndpoint { src: edge.src, dst: edge.dst });
            }
            if !seen.insert(*edge) {
                return Err(GraphError::DuplicateEdge {
                    src: edge.src,
                    dst: edge.dst,
                    etype: edge.etype.name(),
                });
            }
        }
        let mut leaves: Vec<usize> = nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect();
        leaves.sort_by_key(|&id| nodes[id].token_position().expect("leaf"));
        Ok(Graph { nodes, edges, leaf_order: leaves })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Leaf node ids in original token order.
    pub fn leaf_order(&self) -> &[usize] {
        &self.leaf_order
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_order.len()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.leaf_order.len()
    }

    /// Number of Child-children per node.
    pub fn child_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.nodes.len()];
        for e in &self.edges {
            if e.etype == EdgeType::Child {
                counts[e.src] += 1;
            }
        }
        counts
    }

    /// Child-parent of each node, if any.
    pub fn child_parents(&self) -> Vec<Option<usize>> {
        let mut parents = vec![None; self.nodes.len()];
        for e in &self.edges {
            if e.etype == EdgeType::Child {
                parents[e.dst] = Some(e.src);
            }
        }
        parents
    }

    /// Line-oriented text form: a header, then the node table, then the edge
    /// table. Used for debugging and golden tests.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph {} {}", self.nodes.len(), self.edges.len());
        for node in &self.nodes {
            match &node.kind {
                NodeKind::Leaf { token_position } => {
                    let _ = writeln!(out, "node {} leaf {}", node.id, token_position);
                }
                NodeKind::Internal { label } => {
                    let _ = writeln!(out, "node {} internal {}", node.id, label);
                }
            }
        }
        for edge in &self.edges {
            let _ = writeln!(out, "edge {} {} {}", edge.src, edge.dst, edge.etype.name());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(GraphError::Empty)?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("graph") {
            return Err(GraphError::BadText("missing graph header".into()));
        }
        let n_nodes: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GraphError::BadText("bad node count".into()))?;
        let n_edges: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GraphError::BadText("bad edge count".into()))?;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut edges = Vec::with_capacity(n_edges);
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["node", id, "leaf", pos] => {
                    let id = id.parse().map_err(|_| GraphError::BadText(line.into()))?;
                    let token_position =
                        pos.parse().map_err(|_| GraphError::BadText(line.into()))?;
                    nodes.push(Node { id, kind: NodeKind::Leaf { token_position } });
                }
                ["node", id, "internal", label] => {
                    let id = id.parse().map_err(|_| GraphError::BadText(line.into()))?;
                    nodes.push(Node { id, kind: NodeKind::Internal { label: (*label).into() } });
                }
                ["edge", src, dst, ty] => {
                    let src = src.parse().map_err(|_| GraphError::BadText(line.into()))?;
                    let dst = dst.parse().map_err(|_| GraphError::BadText(line.into()))?;
                    let etype = match *ty {
                        "child" => EdgeType::Child,
                        "dependency" => EdgeType::Dependency,
                        "sequential" => EdgeType::Sequential,
                        "self_loop" => EdgeType::SelfLoop,
                        _ => return Err(GraphError::BadText(line.into())),
                    };
                    edges.push(Edge { src, dst, etype });
                }
                _ => return Err(GraphError::BadText(line.into())),
            }
        }
        if nodes.len() != n_nodes || edges.len() != n_edges {
            return Err(GraphError::BadText("header counts do not match body".into()));
        }
        Graph::new(nodes, edges)
    }
}

fn check_child_acyclic(child_parent: &[Option<usize>]) -> Result<(), GraphError> {
    // Walk parent chains; with at most one parent per node a cycle is the
    // only way a chain can exceed n steps.
    let n = child_parent.len();
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while let Some(parent) = child_parent[cur] {
            cur = parent;
            steps += 1;
            if steps > n {
                return Err(GraphError::ChildCycle);
            }
        }
    }
    Ok(())
}

/// Removes every `Internal` node that has exactly one Child-child, splicing
/// its child into its place. Leaves are always kept. Non-Child edges touching
/// a removed node transfer to the surviving node beneath it. Node ids are
/// re-densified; the operation is idempotent.
///
/// Unary deletions commute (a node's child count never changes when another
/// node is spliced out), so the single pass below lands on the same graph as
/// repeatedly deleting arbitrary unary internals until none remain.
pub fn simplify_tree(g: &Graph) -> Result<Graph, GraphError> {
    if g.node_count() == 0 {
        return Err(GraphError::Empty);
    }
    let counts = g.child_counts();
    let parents = g.child_parents();

    let removed: Vec<bool> = g
        .nodes
        .iter()
        .map(|n| !n.is_leaf() && counts[n.id] == 1)
        .collect();

    // Nearest surviving descendant of a removed node: follow its unary chain
    // down to the first kept node.
    let child_of: Vec<Option<usize>> = {
        let mut child = vec![None; g.node_count()];
        for e in &g.edges {
            if e.etype == EdgeType::Child && removed[e.src] {
                child[e.src] = Some(e.dst);
            }
        }
        child
    };
    let surviving_below = |mut id: usize| -> usize {
        while removed[id] {
            id = child_of[id].expect("unary internal has a child");
        }
        id
    };
    // Nearest surviving ancestor, or None when the whole chain up is removed.
    let surviving_above = |mut id: usize| -> Option<usize> {
        loop {
            match parents[id] {
                Some(p) if removed[p] => id = p,
                Some(p) => return Some(p),
                None => return None,
            }
        }
    };

    let mut new_ids = vec![usize::MAX; g.node_count()];
    let mut nodes = Vec::new();
    for node in &g.nodes {
        if !removed[node.id] {
            new_ids[node.id] = nodes.len();
            nodes.push(Node { id: nodes.len(), kind: node.kind.clone() });
        }
    }

    let mut edges = BTreeSet::new();
    for e in &g.edges {
        match e.etype {
            EdgeType::Child => {
                if removed[e.src] || removed[e.dst] {
                    continue; // re-derived from surviving parents below
                }
                edges.insert(Edge { src: new_ids[e.src], dst: new_ids[e.dst], etype: e.etype });
            }
            _ => {
                let src = new_ids[surviving_below(e.src)];
                let dst = new_ids[surviving_below(e.dst)];
                if src != dst || e.etype == EdgeType::SelfLoop {
                    edges.insert(Edge { src, dst, etype: e.etype });
                }
            }
        }
    }
    for (id, node) in g.nodes.iter().enumerate() {
        if removed[id] || parents[id].is_none() {
            continue;
        }
        if removed[parents[id].unwrap()] {
            if let Some(p) = surviving_above(node.id) {
                edges.insert(Edge {
                    src: new_ids[p],
                    dst: new_ids[id],
                    etype: EdgeType::Child,
                });
            }
        }
    }

    Graph::new(nodes, edges.into_iter().collect())
}

/// Adds one `Sequential` edge between each pair of consecutive leaves in
/// token order. Idempotent; errors when the graph has no leaves.
pub fn add_sequential_edges(g: &Graph) -> Result<Graph, GraphError> {
    if g.leaf_order.is_empty() {
        return Err(GraphError::Empty);
    }
    let existing: BTreeSet<Edge> = g.edges.iter().copied().collect();
    let mut edges = g.edges.clone();
    for pair in g.leaf_order.windows(2) {
        let e = Edge { src: pair[0], dst: pair[1], etype: EdgeType::Sequential };
        if !existing.contains(&e) {
            edges.push(e);
        }
    }
    Graph::new(g.nodes.clone(), edges)
}

/// Adds the reverse of every edge (same type) plus a `SelfLoop` edge on each
/// node, deduplicated, with edges stored in a deterministic sorted order.
///
/// The result is the message-passing form consumed by the encoder; reversed
/// Child edges mean the Child forest invariant no longer applies to it.
pub fn symmetrize_with_self_loops(g: &Graph) -> Graph {
    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    for e in &g.edges {
        edges.insert(*e);
        edges.insert(Edge { src: e.dst, dst: e.src, etype: e.etype });
    }
    for node in &g.nodes {
        edges.insert(Edge { src: node.id, dst: node.id, etype: EdgeType::SelfLoop });
    }
    Graph::new_symmetric(g.nodes.clone(), edges.into_iter().collect())
        .expect("symmetrization preserves endpoint and dedup invariants")
}

/// Canonical node order used to make encoder arithmetic independent of node
/// ids: leaves sorted by token position first, then internals keyed by the
/// token span they cover, depth in the Child forest, and label.
pub fn canonical_order(g: &Graph) -> Vec<usize> {
    let n = g.node_count();
    let parents = g.child_parents();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &g.edges {
        if e.etype == EdgeType::Child {
            children[e.src].push(e.dst);
        }
    }
    let mut depth = vec![0usize; n];
    for id in 0..n {
        let mut cur = id;
        while let Some(p) = parents[cur] {
            depth[id] += 1;
            cur = p;
        }
    }
    // Leaf span of the subtree under each node, computed bottom-up.
    let mut span: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&id| std::cmp::Reverse(depth[id]));
    for &id in &order {
        if let Some(pos) = g.nodes[id].token_position() {
            span[id] = (pos, pos);
        } else {
            for &c in &children[id] {
                let (lo, hi) = span[c];
                if lo == usize::MAX {
                    continue;
                }
                if span[id].0 == usize::MAX {
                    span[id] = (lo, hi);
                } else {
                    span[id].0 = span[id].0.min(lo);
                    span[id].1 = span[id].1.max(hi);
                }
            }
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| {
        let key = |id: usize| {
            (
                !g.nodes[id].is_leaf(),
                span[id],
                depth[id],
                g.nodes[id].label().unwrap_or(""),
            )
        };
        key(a).cmp(&key(b))
    });
    perm
}

/// Rebuilds the graph with nodes renumbered by [`canonical_order`] and edges
/// sorted; two graphs that differ only by node ids map to the same value.
pub fn canonicalize(g: &Graph) -> Graph {
    let perm = canonical_order(g);
    let mut new_ids = vec![0usize; g.node_count()];
    for (new_id, &old_id) in perm.iter().enumerate() {
        new_ids[old_id] = new_id;
    }
    let nodes: Vec<Node> = perm
        .iter()
        .enumerate()
        .map(|(new_id, &old_id)| Node { id: new_id, kind: g.nodes[old_id].kind.clone() })
        .collect();
    let mut edges: Vec<Edge> = g
        .edges
        .iter()
        .map(|e| Edge { src: new_ids[e.src], dst: new_ids[e.dst], etype: e.etype })
        .collect();
    edges.sort();
    Graph::new(nodes, edges).expect("relabeling preserves graph invariants")
}
