//! Unweighted betweenness centrality (Brandes accumulation, undirected).
//!
//! Scores are unnormalized: each unordered pair `{s, t}` contributes
//! `sigma_st(v) / sigma_st` to every interior node `v`. Endpoints never score.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;

use super::{GraphError, KnowledgeGraph, NodeId, Result};

const SOURCE_CHUNK: usize = 32;

/// Dependency of every node on source `s`, counting only targets in `is_target`.
fn single_source(graph: &KnowledgeGraph, s: usize, is_target: &[bool], acc: &mut [f64]) {
    let n = graph.node_count();
    let mut order = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![u32::MAX; n];
    sigma[s] = 1.0;
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in graph.neighbor_indices(v) {
            if dist[w] == u32::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }

    let mut delta = vec![0.0f64; n];
    for &w in order.iter().rev() {
        let pull = if is_target[w] { 1.0 } else { 0.0 } + delta[w];
        for &v in &preds[w] {
            delta[v] += sigma[v] / sigma[w] * pull;
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

fn brandes(graph: &KnowledgeGraph, endpoints: &[bool]) -> Vec<f64> {
    let n = graph.node_count();
    let sources: Vec<usize> = (0..n).filter(|&i| endpoints[i]).collect();
    // Partial sums per fixed-size chunk, reduced in chunk order: the result
    // does not depend on the thread count.
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            for &s in chunk {
                single_source(graph, s, endpoints, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    // every unordered pair was visited from both ends
    total.iter_mut().for_each(|v| *v /= 2.0);
    total
}

fn to_map(graph: &KnowledgeGraph, scores: Vec<f64>) -> BTreeMap<NodeId, f64> {
    scores
        .into_iter()
        .enumerate()
        .map(|(i, v)| (graph.id_at(i), v))
        .collect()
}

pub fn betweenness_centrality(graph: &KnowledgeGraph) -> BTreeMap<NodeId, f64> {
    let all = vec![true; graph.node_count()];
    to_map(graph, brandes(graph, &all))
}

/// Betweenness counting only shortest paths whose two endpoints are in `endpoints`.
pub fn restricted_betweenness(
    graph: &KnowledgeGraph,
    endpoints: &BTreeSet<NodeId>,
) -> Result<BTreeMap<NodeId, f64>> {
    let mut mask = vec![false; graph.node_count()];
    for &id in endpoints {
        let i = graph.index_of(id).ok_or(GraphError::UnknownNode(id))?;
        mask[i] = true;
    }
    Ok(to_map(graph, brandes(graph, &mask)))
}
