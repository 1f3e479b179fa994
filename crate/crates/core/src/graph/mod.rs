//! Immutable knowledge-graph store.
//!
//! Nodes are kept in ascending id order and every algorithm in this module
//! iterates in that order, so results never depend on input file order.
//! Distances and components use the undirected view; relation direction is
//! kept on [`EdgeRecord`] for linearization only.

mod centrality;
mod io;
mod traversal;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use centrality::{betweenness_centrality, restricted_betweenness};
pub use io::{load_graph, read_edges, read_nodes, write_edges, write_nodes};
pub use traversal::{
    all_distances, bfs_distances, component_labels, connected_components, DistanceTable,
};

/// Node identifier as it appears in the input files.
pub type NodeId = u64;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("node {0} has an empty name")]
    EmptyName(NodeId),
    #[error("graph has no nodes")]
    EmptyGraph,
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub name: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: String,
}

/// Records normalized away during construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub self_loops_dropped: usize,
    pub duplicate_edges_dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    nodes: Vec<NodeRecord>,
    index: HashMap<NodeId, usize>,
    edges: Vec<EdgeRecord>,
    adjacency: Vec<Vec<usize>>,
}

impl KnowledgeGraph {
    /// Builds a graph, dropping self-loops and exact duplicate edges.
    ///
    /// Two records with the same `(src, dst, relation)` are duplicates. Edges
    /// that differ only in relation or direction are kept as separate records
    /// but collapse to one neighbor entry in the undirected adjacency.
    pub fn new(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<(Self, IngestReport)> {
        if nodes.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        Self::build(nodes, edges)
    }

    fn build(
        mut nodes: Vec<NodeRecord>,
        mut edges: Vec<EdgeRecord>,
    ) -> Result<(Self, IngestReport)> {
        nodes.sort_by_key(|n| n.id);
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.name.is_empty() {
                return Err(GraphError::EmptyName(n.id));
            }
            if index.insert(n.id, i).is_some() {
                return Err(GraphError::DuplicateNode(n.id));
            }
        }

        let mut report = IngestReport::default();
        for e in &edges {
            for end in [e.src, e.dst] {
                if !index.contains_key(&end) {
                    return Err(GraphError::UnknownNode(end));
                }
            }
        }
        let before = edges.len();
        edges.retain(|e| e.src != e.dst);
        report.self_loops_dropped = before - edges.len();
        edges.sort();
        let before = edges.len();
        edges.dedup();
        report.duplicate_edges_dropped = before - edges.len();

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            let (a, b) = (index[&e.src], index[&e.dst]);
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }

        Ok((
            Self {
                nodes,
                index,
                edges,
                adjacency,
            },
            report,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    /// Edges sorted by `(src, dst, relation)`.
    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    /// Position of `id` in [`Self::nodes`].
    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn id_at(&self, index: usize) -> NodeId {
        self.nodes[index].id
    }

    /// Undirected neighbor positions of the node at `index`, ascending.
    pub fn neighbor_indices(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    /// Undirected neighbors of `id` in ascending id order.
    pub fn neighbors(&self, id: NodeId) -> Result<impl Iterator<Item = NodeId> + '_> {
        let i = self.index_of(id).ok_or(GraphError::UnknownNode(id))?;
        Ok(self.adjacency[i].iter().map(|&j| self.nodes[j].id))
    }

    pub fn degree(&self, id: NodeId) -> Option<usize> {
        self.index_of(id).map(|i| self.adjacency[i].len())
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.adjacency[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    /// Subgraph on exactly `keep`, with every edge whose endpoints are both kept.
    pub fn induced_subgraph(&self, keep: &BTreeSet<NodeId>) -> Result<KnowledgeGraph> {
        if let Some(&missing) = keep.iter().find(|id| !self.contains(**id)) {
            return Err(GraphError::UnknownNode(missing));
        }
        if keep.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let nodes = self
            .nodes
            .iter()
            .filter(|n| keep.contains(&n.id))
            .cloned()
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| keep.contains(&e.src) && keep.contains(&e.dst))
            .cloned()
            .collect();
        Self::build(nodes, edges).map(|(g, _)| g)
    }

    /// Same graph with the given nodes removed. Fails if nothing would remain.
    pub fn without_nodes(&self, removed: &BTreeSet<NodeId>) -> Result<KnowledgeGraph> {
        let keep: BTreeSet<NodeId> = self.node_ids().filter(|id| !removed.contains(id)).collect();
        self.induced_subgraph(&keep)
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn drops_self_loops_and_duplicates() {
        let (g, report) = KnowledgeGraph::new(
            vec![node(0), node(1)],
            vec![edge(0, 1), edge(0, 1), edge(1, 1)],
        )
        .unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(report.self_loops_dropped, 1);
        assert_eq!(report.duplicate_edges_dropped, 1);
        assert_eq!(g.neighbors(0).unwrap().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn parallel_relations_share_one_adjacency_entry() {
        let mut other = edge(1, 0);
        other.relation = "inverse".into();
        let (g, _) = KnowledgeGraph::new(vec![node(0), node(1)], vec![edge(0, 1), other]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degree(0), Some(1));
    }

    #[test]
    fn rejects_dangling_and_duplicate_ids() {
        let err = KnowledgeGraph::new(vec![node(0)], vec![edge(0, 99)]).unwrap_err();
        assert_eq!(err.to_string(), "unknown node 99");
        let err = KnowledgeGraph::new(vec![node(3), node(3)], vec![]).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateNode(3)));
        let mut blank = node(1);
        blank.name.clear();
        assert!(matches!(
            KnowledgeGraph::new(vec![blank], vec![]),
            Err(GraphError::EmptyName(1))
        ));
        assert!(matches!(
            KnowledgeGraph::new(vec![], vec![]),
            Err(GraphError::EmptyGraph)
        ));
    }

    #[test]
    fn nodes_sorted_regardless_of_input_order() {
        let (g, _) = KnowledgeGraph::new(vec![node(5), node(2), node(9)], vec![]).unwrap();
        assert_eq!(g.node_ids().collect::<Vec<_>>(), vec![2, 5, 9]);
    }

    #[test]
    fn induced_subgraph_examples() {
        let p = path(3);
        let sub = p.induced_subgraph(&[0, 2].into()).unwrap();
        assert_eq!((sub.node_count(), sub.edge_count()), (2, 0));

        let all: BTreeSet<_> = p.node_ids().collect();
        assert_eq!(p.induced_subgraph(&all).unwrap(), p);

        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let sub = tri.induced_subgraph(&[0, 1].into()).unwrap();
        assert_eq!((sub.node_count(), sub.edge_count()), (2, 1));

        assert!(matches!(
            p.induced_subgraph(&[7].into()),
            Err(GraphError::UnknownNode(7))
        ));
    }
}
