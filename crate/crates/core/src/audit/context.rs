//! Deterministic subgraph linearization.
//!
//! One line per node, `node\t<id>\t<name>\t<type>\t<description>`, then one
//! line per edge, `edge\t<src>\t<dst>\t<relation>`, each ending in `\n`. Tabs,
//! carriage returns and newlines inside text fields become single spaces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{top_k, AuditError, Result};
use crate::graph::{KnowledgeGraph, NodeId, NodeRecord};

pub const IMPORTANT_MARKER: &str = "[IMPORTANT] ";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContextMode {
    /// Every node by ascending id, every edge.
    #[default]
    FullPcst,
    /// Induced subgraph on the top-k nodes.
    TopKOnly,
    /// Every node and edge; top-k first by descending score, each marked.
    PcstPlusTopK,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextConfig {
    pub mode: ContextMode,
    pub k: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            mode: ContextMode::FullPcst,
            k: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub text: String,
    pub retained: BTreeSet<NodeId>,
}

fn clean(field: &str) -> String {
    field.replace(['\t', '\r', '\n'], " ")
}

fn node_line(out: &mut String, n: &NodeRecord, marked: bool) {
    if marked {
        out.push_str(IMPORTANT_MARKER);
    }
    let _ = writeln!(
        out,
        "node\t{}\t{}\t{}\t{}",
        n.id,
        clean(&n.name),
        clean(&n.entity_type),
        clean(&n.description)
    );
}

pub(crate) fn check_scores(graph: &KnowledgeGraph, scores: &[(NodeId, f64)]) -> Result<()> {
    let given: BTreeMap<NodeId, f64> = scores.iter().copied().collect();
    if let Some(&id) = given.keys().find(|id| !graph.contains(**id)) {
        return Err(AuditError::ExtraScore(id));
    }
    if let Some(id) = graph.node_ids().find(|id| !given.contains_key(id)) {
        return Err(AuditError::MissingScore(id));
    }
    Ok(())
}

/// `scores` must be ranked as by [`super::importance_scores`].
pub fn build_context(
    graph: &KnowledgeGraph,
    scores: &[(NodeId, f64)],
    cfg: &ContextConfig,
) -> Result<Context> {
    if cfg.k == 0 {
        return Err(AuditError::InvalidParameter(
            "context k must be at least 1".into(),
        ));
    }
    check_scores(graph, scores)?;
    let top = top_k(scores, cfg.k);
    let mut text = String::new();
    let retained: BTreeSet<NodeId> = match cfg.mode {
        ContextMode::FullPcst | ContextMode::PcstPlusTopK => graph.node_ids().collect(),
        ContextMode::TopKOnly => top.clone(),
    };
    match cfg.mode {
        ContextMode::FullPcst => graph
            .nodes()
            .iter()
            .for_each(|n| node_line(&mut text, n, false)),
        ContextMode::TopKOnly => graph
            .nodes()
            .iter()
            .filter(|n| top.contains(&n.id))
            .for_each(|n| node_line(&mut text, n, false)),
        ContextMode::PcstPlusTopK => {
            for &(id, _) in scores.iter().take(cfg.k) {
                node_line(&mut text, graph.node(id).expect("checked above"), true);
            }
            graph
                .nodes()
                .iter()
                .filter(|n| !top.contains(&n.id))
                .for_each(|n| node_line(&mut text, n, false));
        }
    }
    for e in graph.edges() {
        if retained.contains(&e.src) && retained.contains(&e.dst) {
            let _ = writeln!(text, "edge\t{}\t{}\t{}", e.src, e.dst, clean(&e.relation));
        }
    }
    Ok(Context { text, retained })
}
