use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::context::check_scores;
use super::{top_k, AuditError, Result};
use crate::graph::{component_labels, restricted_betweenness, KnowledgeGraph, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentationMetrics {
    pub components_full: usize,
    pub components_topk: usize,
    pub fragmentation_delta: i64,
    /// Share of top-k node pairs with no path in the pruned subgraph.
    pub disconnect_fraction: f64,
}

/// Fraction of unordered pairs of `nodes` that `graph` does not connect.
/// Every id in `nodes` must be in `graph`.
pub fn pair_disconnect_fraction(graph: &KnowledgeGraph, nodes: &BTreeSet<NodeId>) -> f64 {
    let n = nodes.len();
    if n < 2 {
        return 0.0;
    }
    let labels = component_labels(graph);
    let mut per_component = std::collections::BTreeMap::<usize, usize>::new();
    for id in nodes {
        *per_component
            .entry(labels[graph.index_of(*id).expect("node in graph")])
            .or_default() += 1;
    }
    let pairs = n * (n - 1) / 2;
    let joined: usize = per_component.values().map(|c| c * (c - 1) / 2).sum();
    (pairs - joined) as f64 / pairs as f64
}

fn component_count(graph: &KnowledgeGraph) -> usize {
    component_labels(graph)
        .into_iter()
        .max()
        .map_or(0, |m| m + 1)
}

/// The node set pruning keeps: the top-k, optionally with their neighbours.
pub(crate) fn pruned_set(
    graph: &KnowledgeGraph,
    top: &BTreeSet<NodeId>,
    with_neighbours: bool,
) -> BTreeSet<NodeId> {
    let mut keep = top.clone();
    if with_neighbours {
        for &id in top {
            keep.extend(graph.neighbors(id).expect("top-k node in graph"));
        }
    }
    keep
}

/// Component structure of the full subgraph against the subgraph induced on
/// the top-k nodes (plus their neighbours when `with_neighbours`). The
/// disconnect fraction is always over pairs of top-k nodes.
pub fn fragmentation_metrics(
    graph: &KnowledgeGraph,
    scores: &[(NodeId, f64)],
    k: usize,
    with_neighbours: bool,
) -> Result<FragmentationMetrics> {
    if k == 0 || k > graph.node_count() {
        return Err(AuditError::InvalidParameter(format!(
            "k = {k} must lie in 1..={}",
            graph.node_count()
        )));
    }
    check_scores(graph, scores)?;
    let top = top_k(scores, k);
    let pruned = graph.induced_subgraph(&pruned_set(graph, &top, with_neighbours))?;
    let components_full = component_count(graph);
    let components_topk = component_count(&pruned);
    Ok(FragmentationMetrics {
        components_full,
        components_topk,
        fragmentation_delta: components_topk as i64 - components_full as i64,
        disconnect_fraction: pair_disconnect_fraction(&pruned, &top),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeCandidate {
    pub id: NodeId,
    pub importance: f64,
    /// Betweenness over shortest paths between top-k nodes only.
    pub betweenness: f64,
    /// 1-based position in the betweenness ranking.
    pub rank: usize,
    /// Removing the node splits the top-k nodes across more components.
    pub articulation: bool,
}

/// Nodes outside the top-k with positive top-k-restricted betweenness,
/// ranked by it (ties: lower importance first, then id), truncated to `m`.
/// Each carries the articulation flag relative to the top-k set.
pub fn detect_bridges(
    graph: &KnowledgeGraph,
    scores: &[(NodeId, f64)],
    k: usize,
    m: usize,
) -> Result<Vec<BridgeCandidate>> {
    if k == 0 || m == 0 {
        return Err(AuditError::InvalidParameter(
            "bridge detection needs k, m >= 1".into(),
        ));
    }
    check_scores(graph, scores)?;
    let top = top_k(scores, k);
    let between = restricted_betweenness(graph, &top)?;
    let mut cand: Vec<(NodeId, f64, f64)> = scores
        .iter()
        .filter(|(id, _)| !top.contains(id))
        .map(|&(id, s)| (id, s, between[&id]))
        .filter(|c| c.2 > 0.0)
        .collect();
    cand.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(a.1.total_cmp(&b.1))
            .then(a.0.cmp(&b.0))
    });
    cand.truncate(m);

    let base = pair_disconnect_fraction(graph, &top);
    cand.par_iter()
        .enumerate()
        .map(|(i, &(id, importance, betweenness))| {
            let without = graph.without_nodes(&BTreeSet::from([id]))?;
            Ok(BridgeCandidate {
                id,
                importance,
                betweenness,
                rank: i + 1,
                articulation: pair_disconnect_fraction(&without, &top) > base,
            })
        })
        .collect()
}
