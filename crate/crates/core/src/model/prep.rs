//! Vocabulary building and graph preparation for the encoders.
//!
//! A [`PreppedGraph`] is the canonicalized, symmetrized form the encoder
//! consumes: in-edges grouped per target node in a deterministic order, with
//! vocabulary ids resolved per node. Canonicalizing up front makes every
//! downstream float operation independent of the caller's node numbering.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::graph::{canonicalize, symmetrize_with_self_loops, TokenizedGraph};

pub const UNK: &str = "<unk>";

/// Word-level lowercased token vocabulary with a reserved UNK row at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenVocab {
    words: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl TokenVocab {
    /// Builds from corpus tokens, keeping words with at least `min_count`
    /// occurrences, in deterministic (sorted) order.
    pub fn build<'a>(tokens: impl Iterator<Item = &'a str>, min_count: usize) -> TokenVocab {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for tok in tokens {
            *counts.entry(tok.to_lowercase()).or_insert(0) += 1;
        }
        let mut words = vec![UNK.to_string()];
        words.extend(
            counts
                .into_iter()
                .filter(|(w, c)| *c >= min_count && w != UNK)
                .map(|(w, _)| w),
        );
        TokenVocab::from_words(words)
    }

    pub fn from_words(words: Vec<String>) -> TokenVocab {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        TokenVocab { words, index }
    }

    /// Rebuild the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Internal-node label vocabulary (constituent categories plus SQL rule
/// names), UNK at 0.
pub type LabelVocab = TokenVocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrepEdge {
    pub src: usize,
    pub dst: usize,
    pub etype: usize,
}

/// Encoder-ready graph: canonical node order, symmetrized edges with
/// self-loops grouped contiguously by target node.
#[derive(Debug, Clone, PartialEq)]
pub struct PreppedGraph {
    pub n: usize,
    /// Sorted by (dst, etype, src); `dst_ranges[i]` is node i's group.
    pub edges: Vec<PrepEdge>,
    pub dst_ranges: Vec<(usize, usize)>,
    /// Token vocabulary id per node (leaves only).
    pub node_token: Vec<Option<usize>>,
    /// Label vocabulary id per node (internals only).
    pub node_label: Vec<Option<usize>>,
    /// Token position per leaf node, indexing external embedding rows.
    pub node_position: Vec<Option<usize>>,
    /// Optional per-token external embedding rows (token_count x dim).
    pub external: Option<Array2<f64>>,
}

impl PreppedGraph {
    pub fn new(
        tg: &TokenizedGraph,
        vocab: &TokenVocab,
        labels: &LabelVocab,
        external: Option<Array2<f64>>,
    ) -> Result<PreppedGraph, ModelError> {
        if tg.graph.node_count() == 0 {
            return Err(ModelError::EmptyGraph);
        }
        if let Some(ext) = &external {
            if ext.nrows() != tg.tokens.len() {
                return Err(ModelError::BadFile(format!(
                    "external embedding has {} rows for {} tokens",
                    ext.nrows(),
                    tg.tokens.len()
                )));
            }
        }
        let canon = canonicalize(&tg.graph);
        let message_form = symmetrize_with_self_loops(&canon);
        let n = message_form.node_count();

        let mut edges: Vec<PrepEdge> = message_form
            .edges()
            .iter()
            .map(|e| PrepEdge { src: e.src, dst: e.dst, etype: e.etype.index() })
            .collect();
        edges.sort_by_key(|e| (e.dst, e.etype, e.src));
        let mut dst_ranges = vec![(0usize, 0usize); n];
        let mut i = 0;
        while i < edges.len() {
            let dst = edges[i].dst;
            let mut j = i;
            while j < edges.len() && edges[j].dst == dst {
                j += 1;
            }
            dst_ranges[dst] = (i, j);
            i = j;
        }

        let mut node_token = vec![None; n];
        let mut node_label = vec![None; n];
        let mut node_position = vec![None; n];
        for node in message_form.nodes() {
            match node.token_position() {
                Some(pos) => {
                    node_token[node.id] = Some(vocab.id(&tg.tokens[pos]));
                    node_position[node.id] = Some(pos);
                }
                None => {
                    node_label[node.id] =
                        Some(labels.id(node.label().expect("internal node has a label")));
                }
            }
        }
        Ok(PreppedGraph { n, edges, dst_ranges, node_token, node_label, node_position, external })
    }
}

/// One training/inference example: a question graph, a SQL graph, and the
/// correctness label.
#[derive(Debug, Clone)]
pub struct PairExample {
    pub question_id: String,
    pub db_id: String,
    pub beam_rank: usize,
    pub question: PreppedGraph,
    pub sql: PreppedGraph,
    pub label: bool,
}

/// Convenience constructor used by pipelines and tests.
pub fn build_pair(
    question: &TokenizedGraph,
    sql: &TokenizedGraph,
    vocab: &TokenVocab,
    labels: &LabelVocab,
    label: bool,
) -> Result<PairExample, ModelError> {
    Ok(PairExample {
        question_id: String::new(),
        db_id: String::new(),
        beam_rank: 0,
        question: PreppedGraph::new(question, vocab, labels, None)?,
        sql: PreppedGraph::new(sql, vocab, labels, None)?,
        label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, EdgeType, Graph, Node, NodeKind};

    fn tiny_graph() -> TokenizedGraph {
        let nodes = vec![
            Node { id: 0, kind: NodeKind::Internal { label: "r".into() } },
            Node { id: 1, kind: NodeKind::Leaf { token_position: 0 } },
            Node { id: 2, kind: NodeKind::Leaf { token_position: 1 } },
        ];
        let edges = vec![
            Edge { src: 0, dst: 1, etype: EdgeType::Child },
            Edge { src: 0, dst: 2, etype: EdgeType::Child },
        ];
        TokenizedGraph {
            graph: Graph::new(nodes, edges).unwrap(),
            tokens: vec!["how".into(), "many".into()],
        }
    }

    #[test]
    fn vocab_lookup_with_unk() {
        let vocab =
            TokenVocab::build(["how", "many", "how", "heads"].iter().copied(), 1);
        assert_eq!(vocab.id("how"), vocab.id("HOW"));
        assert_ne!(vocab.id("how"), 0);
        assert_eq!(vocab.id("never-seen"), 0);
    }

    #[test]
    fn min_count_filters_rare_words() {
        let vocab = TokenVocab::build(["a", "a", "b"].iter().copied(), 2);
        assert_ne!(vocab.id("a"), 0);
        assert_eq!(vocab.id("b"), 0);
    }

    #[test]
    fn prepped_graph_has_self_loops_for_every_node() {
        let tg = tiny_graph();
        let vocab = TokenVocab::build(tg.tokens.iter().map(String::as_str), 1);
        let labels = LabelVocab::build(["r"].iter().copied(), 1);
        let pg = PreppedGraph::new(&tg, &vocab, &labels, None).unwrap();
        assert_eq!(pg.n, 3);
        for i in 0..pg.n {
            let (start, end) = pg.dst_ranges[i];
            assert!(end > start, "node {i} has no in-edges");
            assert!(pg.edges[start..end].iter().any(|e| e.src == i && e.dst == i));
        }
    }

    #[test]
    fn prep_is_invariant_to_node_relabeling() {
        let tg = tiny_graph();
        // Same structure, ids permuted (leaf first).
        let nodes = vec![
            Node { id: 0, kind: NodeKind::Leaf { token_position: 1 } },
            Node { id: 1, kind: NodeKind::Internal { label: "r".into() } },
            Node { id: 2, kind: NodeKind::Leaf { token_position: 0 } },
        ];
        let edges = vec![
            Edge { src: 1, dst: 2, etype: EdgeType::Child },
            Edge { src: 1, dst: 0, etype: EdgeType::Child },
        ];
        let permuted = TokenizedGraph {
            graph: Graph::new(nodes, edges).unwrap(),
            tokens: tg.tokens.clone(),
        };
        let vocab = TokenVocab::build(tg.tokens.iter().map(String::as_str), 1);
        let labels = LabelVocab::build(["r"].iter().copied(), 1);
        let a = PreppedGraph::new(&tg, &vocab, &labels, None).unwrap();
        let b = PreppedGraph::new(&permuted, &vocab, &labels, None).unwrap();
        assert_eq!(a, b);
    }
}
