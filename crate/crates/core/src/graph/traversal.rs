use std::collections::VecDeque;

use rayon::prelude::*;

use super::{GraphError, KnowledgeGraph, NodeId, Result};

/// Hop distances from one source over the undirected view.
///
/// `dist` is indexed by node position in the graph it was computed on
/// ([`KnowledgeGraph::index_of`]); `None` marks an unreachable node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    pub source: NodeId,
    pub dist: Vec<Option<u32>>,
    /// `count_at[d]` is the number of nodes at distance `d` from the source.
    pub count_at: Vec<usize>,
}

impl DistanceTable {
    pub fn distance(&self, graph: &KnowledgeGraph, id: NodeId) -> Option<u32> {
        graph.index_of(id).and_then(|i| self.dist[i])
    }

    /// Number of nodes sharing distance `d` with some node, 0 if the shell is empty.
    pub fn shell_size(&self, d: u32) -> usize {
        self.count_at.get(d as usize).copied().unwrap_or(0)
    }

    pub fn reachable(&self) -> usize {
        self.count_at.iter().sum()
    }
}

pub(crate) fn bfs_from(graph: &KnowledgeGraph, source: usize) -> DistanceTable {
    let mut dist = vec![None; graph.node_count()];
    let mut count_at = vec![1];
    let mut queue = VecDeque::from([source]);
    dist[source] = Some(0u32);
    while let Some(v) = queue.pop_front() {
        let next = dist[v].unwrap() + 1;
        for &w in graph.neighbor_indices(v) {
            if dist[w].is_none() {
                dist[w] = Some(next);
                if count_at.len() <= next as usize {
                    count_at.push(0);
                }
                count_at[next as usize] += 1;
                queue.push_back(w);
            }
        }
    }
    DistanceTable {
        source: graph.id_at(source),
        dist,
        count_at,
    }
}

pub fn bfs_distances(graph: &KnowledgeGraph, source: NodeId) -> Result<DistanceTable> {
    let s = graph
        .index_of(source)
        .ok_or(GraphError::UnknownNode(source))?;
    Ok(bfs_from(graph, s))
}

/// One table per node, in node order.
pub fn all_distances(graph: &KnowledgeGraph) -> Vec<DistanceTable> {
    (0..graph.node_count())
        .into_par_iter()
        .map(|s| bfs_from(graph, s))
        .collect()
}

/// Component label per node position; labels are numbered in order of each
/// component's smallest member.
pub fn component_labels(graph: &KnowledgeGraph) -> Vec<usize> {
    let n = graph.node_count();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in graph.neighbor_indices(v) {
                if label[w] == usize::MAX {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

/// Components as ascending id lists, ordered by smallest member.
pub fn connected_components(graph: &KnowledgeGraph) -> Vec<Vec<NodeId>> {
    let labels = component_labels(graph);
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        out[l].push(graph.id_at(i));
    }
    out
}
