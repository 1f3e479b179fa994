//! Unrooted prize-collecting Steiner tree with uniform edge costs.
//!
//! [`solve_pcst`] grows Goemans–Williamson moats with every positive-prize
//! node starting active and no root. Each tree of the resulting forest is then
//! strongly pruned: a tree DP finds the connected subtree with the largest
//! `prize - cost` value over all choices of top node. The best pruned tree is
//! the solution; every pruned tree is kept in [`PcstSolution::forest`].
//!
//! [`brute_force_pcst`] enumerates node subsets and serves as the exact oracle
//! on instances of at most [`BRUTE_FORCE_LIMIT`] nodes.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{component_labels, KnowledgeGraph, NodeId};

pub const BRUTE_FORCE_LIMIT: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum PcstError {
    #[error("edge cost must be positive and finite, got {0}")]
    InvalidCost(f64),
    #[error("prize for node {0} must be non-negative and finite")]
    InvalidPrize(NodeId),
    #[error("prize assigned to unknown node {0}")]
    UnknownNode(NodeId),
    #[error("brute force supports at most {BRUTE_FORCE_LIMIT} nodes, instance has {0}")]
    TooLarge(usize),
}

#[derive(Debug, Clone)]
pub struct PcstInstance {
    graph: KnowledgeGraph,
    prizes: Vec<f64>,
    edge_cost: f64,
}

impl PcstInstance {
    /// Nodes absent from `prizes` get prize 0.
    pub fn new(
        graph: KnowledgeGraph,
        prizes: &BTreeMap<NodeId, f64>,
        edge_cost: f64,
    ) -> Result<Self, PcstError> {
        if !(edge_cost > 0.0 && edge_cost.is_finite()) {
            return Err(PcstError::InvalidCost(edge_cost));
        }
        let mut dense = vec![0.0; graph.node_count()];
        for (&id, &p) in prizes {
            let i = graph.index_of(id).ok_or(PcstError::UnknownNode(id))?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(PcstError::InvalidPrize(id));
            }
            dense[i] = p;
        }
        Ok(Self {
            graph,
            prizes: dense,
            edge_cost,
        })
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn edge_cost(&self) -> f64 {
        self.edge_cost
    }

    pub fn prize(&self, id: NodeId) -> f64 {
        self.graph.index_of(id).map_or(0.0, |i| self.prizes[i])
    }

    /// Sum of prizes in ascending id order minus `edge_cost` per edge.
    pub fn objective(&self, nodes: &BTreeSet<NodeId>, edge_count: usize) -> f64 {
        let collected: f64 = nodes.iter().map(|&id| self.prize(id)).sum();
        collected - self.edge_cost * edge_count as f64
    }

    fn undirected_edges(&self) -> Vec<(usize, usize)> {
        (0..self.graph.node_count())
            .flat_map(|u| {
                self.graph
                    .neighbor_indices(u)
                    .iter()
                    .filter(move |&&v| v > u)
                    .map(move |&v| (u, v))
            })
            .collect()
    }
}

/// A connected selection: `edges` span `nodes` without cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct PcstTree {
    pub nodes: BTreeSet<NodeId>,
    /// Undirected edges as `(smaller id, larger id)`, sorted.
    pub edges: Vec<(NodeId, NodeId)>,
    pub objective: f64,
}

impl PcstTree {
    fn empty() -> Self {
        Self {
            nodes: BTreeSet::new(),
            edges: Vec::new(),
            objective: 0.0,
        }
    }

    /// Higher objective first, then lexicographically smaller node list.
    fn better_than(&self, other: &Self) -> bool {
        match self.objective.total_cmp(&other.objective) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.nodes.iter().lt(other.nodes.iter()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcstSolution {
    pub nodes: BTreeSet<NodeId>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub objective: f64,
    /// Every pruned tree of the moat-growth forest, best first. Empty for the
    /// brute-force oracle.
    pub forest: Vec<PcstTree>,
}

impl PcstSolution {
    fn from_tree(tree: PcstTree, forest: Vec<PcstTree>) -> Self {
        Self {
            nodes: tree.nodes,
            edges: tree.edges,
            objective: tree.objective,
            forest,
        }
    }

    pub fn recompute_objective(&self, inst: &PcstInstance) -> f64 {
        inst.objective(&self.nodes, self.edges.len())
    }
}

struct Moat {
    active: bool,
    remaining: f64,
}

/// Goemans–Williamson growth; returns the tight edges that merged moats.
fn grow_forest(inst: &PcstInstance, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let n = inst.graph.node_count();
    let cost = inst.edge_cost;
    let mut owner: Vec<usize> = (0..n).collect();
    let mut moats: Vec<Moat> = inst
        .prizes
        .iter()
        .map(|&p| Moat {
            active: p > 0.0,
            remaining: p,
        })
        .collect();
    let mut load = vec![0.0f64; n];
    let mut chosen = Vec::new();

    loop {
        // Earliest event; ties resolve to the first one found in scan order
        // (edges in ascending endpoint order, then moats by representative).
        let mut best: Option<(f64, Event)> = None;
        let mut consider = |t: f64, ev: Event| {
            if best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                best = Some((t, ev));
            }
        };
        for (k, &(u, v)) in edges.iter().enumerate() {
            let (cu, cv) = (owner[u], owner[v]);
            if cu == cv {
                continue;
            }
            let rate = moats[cu].active as u8 + moats[cv].active as u8;
            if rate == 0 {
                continue;
            }
            let slack = (cost - load[u] - load[v]).max(0.0);
            consider(slack / rate as f64, Event::Edge(k));
        }
        for (c, m) in moats.iter().enumerate() {
            if m.active && owner[c] == c {
                consider(m.remaining.max(0.0), Event::Deactivate(c));
            }
        }
        let Some((dt, event)) = best else { break };

        for v in 0..n {
            if moats[owner[v]].active {
                load[v] += dt;
            }
        }
        for (c, m) in moats.iter_mut().enumerate() {
            if m.active && owner[c] == c {
                m.remaining -= dt;
            }
        }

        match event {
            Event::Deactivate(c) => {
                moats[c].active = false;
                moats[c].remaining = 0.0;
            }
            Event::Edge(k) => {
                let (u, v) = edges[k];
                let (keep, gone) = {
                    let (a, b) = (owner[u], owner[v]);
                    (a.min(b), a.max(b))
                };
                let remaining = moats[keep].remaining.max(0.0) + moats[gone].remaining.max(0.0);
                for o in owner.iter_mut() {
                    if *o == gone {
                        *o = keep;
                    }
                }
                moats[keep] = Moat {
                    active: remaining > 0.0,
                    remaining,
                };
                moats[gone].active = false;
                chosen.push((u, v));
            }
        }
    }
    chosen
}

enum Event {
    Edge(usize),
    Deactivate(usize),
}

/// Best connected subtree of one tree of the forest (strong pruning with the
/// best choice of top node).
fn prune_tree(inst: &PcstInstance, members: &[usize], tree_adj: &[Vec<usize>]) -> PcstTree {
    let cost = inst.edge_cost;
    let root = members[0];
    // DFS preorder with parents
    let mut order = Vec::with_capacity(members.len());
    let mut parent = BTreeMap::new();
    let mut stack = vec![(root, usize::MAX)];
    while let Some((v, p)) = stack.pop() {
        order.push(v);
        parent.insert(v, p);
        for &w in tree_adj[v].iter().rev() {
            if w != p {
                stack.push((w, v));
            }
        }
    }
    let mut value: BTreeMap<usize, f64> = BTreeMap::new();
    for &v in order.iter().rev() {
        let gain: f64 = tree_adj[v]
            .iter()
            .filter(|&&w| w != parent[&v])
            .map(|w| (value[w] - cost).max(0.0))
            .sum();
        value.insert(v, inst.prizes[v] + gain);
    }

    let mut best = PcstTree::empty();
    for &top in &order {
        let mut nodes = BTreeSet::new();
        let mut edges = Vec::new();
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            nodes.insert(inst.graph.id_at(v));
            for &w in &tree_adj[v] {
                if w != parent[&v] && value[&w] - cost > 0.0 {
                    let (a, b) = (inst.graph.id_at(v), inst.graph.id_at(w));
                    edges.push((a.min(b), a.max(b)));
                    stack.push(w);
                }
            }
        }
        edges.sort_unstable();
        let objective = inst.objective(&nodes, edges.len());
        let cand = PcstTree {
            nodes,
            edges,
            objective,
        };
        if best.nodes.is_empty() || cand.better_than(&best) {
            best = cand;
        }
    }
    best
}

pub fn solve_pcst(inst: &PcstInstance) -> PcstSolution {
    let n = inst.graph.node_count();
    let edges = inst.undirected_edges();
    let tight = grow_forest(inst, &edges);

    let mut tree_adj = vec![Vec::new(); n];
    for &(u, v) in &tight {
        tree_adj[u].push(v);
        tree_adj[v].push(u);
    }
    tree_adj.iter_mut().for_each(|l| l.sort_unstable());

    // group nodes by forest tree, each list ascending
    let mut label = vec![usize::MAX; n];
    let mut trees: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let mut members = vec![s];
        label[s] = trees.len();
        let mut i = 0;
        while i < members.len() {
            for &w in &tree_adj[members[i]] {
                if label[w] == usize::MAX {
                    label[w] = trees.len();
                    members.push(w);
                }
            }
            i += 1;
        }
        members.sort_unstable();
        trees.push(members);
    }

    let mut forest: Vec<PcstTree> = trees
        .iter()
        .map(|m| prune_tree(inst, m, &tree_adj))
        .filter(|t| t.objective > 0.0)
        .collect();
    forest.sort_by(|a, b| {
        if a.better_than(b) {
            std::cmp::Ordering::Less
        } else if b.better_than(a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    let best = forest.first().cloned().unwrap_or_else(PcstTree::empty);
    PcstSolution::from_tree(best, forest)
}

/// Exact optimum over connected node subsets.
///
/// With uniform costs a connected subset `S` is best spanned by any spanning
/// tree, so its value is `prize(S) - cost * (|S| - 1)`; the tree returned is
/// the BFS tree from the smallest member. Ties go to the lexicographically
/// smallest node list, so the empty set wins at objective 0.
pub fn brute_force_pcst(inst: &PcstInstance) -> Result<PcstSolution, PcstError> {
    let g = &inst.graph;
    let n = g.node_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(PcstError::TooLarge(n));
    }
    let mut best = PcstTree::empty();
    for mask in 1u32..(1 << n) {
        let keep: BTreeSet<NodeId> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| g.id_at(i))
            .collect();
        let sub = g.induced_subgraph(&keep).expect("subset of graph");
        if component_labels(&sub).iter().any(|&l| l != 0) {
            continue;
        }
        let mut seen = vec![false; sub.node_count()];
        let mut edges = Vec::new();
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in sub.neighbor_indices(v) {
                if !seen[w] {
                    seen[w] = true;
                    let (a, b) = (sub.id_at(v), sub.id_at(w));
                    edges.push((a.min(b), a.max(b)));
                    queue.push_back(w);
                }
            }
        }
        edges.sort_unstable();
        let objective = inst.objective(&keep, edges.len());
        let cand = PcstTree {
            nodes: keep,
            edges,
            objective,
        };
        if cand.better_than(&best) {
            best = cand;
        }
    }
    Ok(PcstSolution::from_tree(best, Vec::new()))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::{EdgeRecord, NodeRecord};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn instance(
        n: u64,
        edges: &[(u64, u64)],
        prizes: &[f64],
        cost: f64,
    ) -> PcstInstance {
        let nodes = (0..n)
            .map(|id| NodeRecord {
                id,
                name: format!("v{id}"),
                entity_type: "t".into(),
                description: String::new(),
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(src, dst)| EdgeRecord {
                src,
                dst,
                relation: "r".into(),
            })
            .collect();
        let (g, _) = KnowledgeGraph::new(nodes, edges).unwrap();
        let prizes = prizes
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as u64, p))
            .collect();
        PcstInstance::new(g, &prizes, cost).unwrap()
    }

    /// Instance family shared with the acceptance suite: 2..=10 nodes, edge
    /// probability 0.25..0.6, half the prizes zero and the rest U(0, 4), edge
    /// cost U(0.5, 2).
    pub(crate) fn random_instance(seed: u64) -> PcstInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=10u64);
        let p = rng.gen_range(0.25..0.6);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.gen_bool(p) {
                    edges.push((a, b));
                }
            }
        }
        let prizes: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    0.0
                } else {
                    rng.gen_range(0.0..4.0)
                }
            })
            .collect();
        instance(n, &edges, &prizes, rng.gen_range(0.5..2.0))
    }

    fn is_feasible(inst: &PcstInstance, sol: &PcstSolution) -> bool {
        let g = inst.graph();
        let within = sol
            .edges
            .iter()
            .all(|&(a, b)| g.has_edge(a, b) && sol.nodes.contains(&a) && sol.nodes.contains(&b));
        let trees = if sol.nodes.is_empty() {
            0
        } else {
            let sub = g.induced_subgraph(&sol.nodes).unwrap();
            let kept: Vec<_> = sol
                .edges
                .iter()
                .map(|&(src, dst)| EdgeRecord {
                    src,
                    dst,
                    relation: "r".into(),
                })
                .collect();
            let (forest, _) = KnowledgeGraph::new(sub.nodes().to_vec(), kept).unwrap();
            connected_components_count(&forest)
        };
        within && sol.edges.len() + trees == sol.nodes.len()
    }

    fn connected_components_count(g: &KnowledgeGraph) -> usize {
        crate::graph::connected_components(g).len()
    }

    #[test]
    fn singleton() {
        let inst = instance(1, &[], &[5.0], 1.0);
        let sol = solve_pcst(&inst);
        assert_eq!(sol.nodes, BTreeSet::from([0]));
        assert_eq!(sol.objective, 5.0);
    }

    #[test]
    fn cheap_path_joins_both_ends() {
        let inst = instance(3, &[(0, 1), (1, 2)], &[3.0, 0.0, 3.0], 1.0);
        let sol = solve_pcst(&inst);
        assert_eq!(sol.nodes, BTreeSet::from([0, 1, 2]));
        assert_eq!(sol.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(sol.objective, 4.0);
        assert_eq!(brute_force_pcst(&inst).unwrap().objective, 4.0);
    }

    #[test]
    fn expensive_path_takes_first_singleton() {
        let inst = instance(3, &[(0, 1), (1, 2)], &[3.0, 0.0, 3.0], 10.0);
        let sol = solve_pcst(&inst);
        assert_eq!(sol.nodes, BTreeSet::from([0]));
        assert_eq!(sol.objective, 3.0);
        // the other end survives as a second tree
        assert_eq!(sol.forest.len(), 2);
        let bf = brute_force_pcst(&inst).unwrap();
        assert_eq!((bf.nodes, bf.objective), (BTreeSet::from([0]), 3.0));
    }

    #[test]
    fn zero_prizes_give_empty_solution() {
        let inst = instance(3, &[(0, 1), (1, 2)], &[0.0; 3], 1.0);
        let bf = brute_force_pcst(&inst).unwrap();
        assert!(bf.nodes.is_empty() && bf.objective == 0.0);
        let sol = solve_pcst(&inst);
        assert!(sol.nodes.is_empty() && sol.objective == 0.0);
    }

    #[test]
    fn triangle_takes_everything() {
        let inst = instance(3, &[(0, 1), (1, 2), (0, 2)], &[1.0; 3], 0.1);
        let bf = brute_force_pcst(&inst).unwrap();
        assert_eq!(bf.nodes.len(), 3);
        assert_eq!(bf.edges.len(), 2);
        assert!((bf.objective - 2.8).abs() < 1e-12);
        assert!((solve_pcst(&inst).objective - 2.8).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let g = instance(2, &[(0, 1)], &[0.0, 0.0], 1.0).graph().clone();
        assert!(matches!(
            PcstInstance::new(g.clone(), &BTreeMap::new(), 0.0),
            Err(PcstError::InvalidCost(_))
        ));
        assert_eq!(
            PcstInstance::new(g.clone(), &BTreeMap::from([(0, -1.0)]), 1.0).unwrap_err(),
            PcstError::InvalidPrize(0)
        );
        assert_eq!(
            PcstInstance::new(g, &BTreeMap::from([(5, 1.0)]), 1.0).unwrap_err(),
            PcstError::UnknownNode(5)
        );
        let big = instance(13, &[], &[1.0; 13], 1.0);
        assert_eq!(brute_force_pcst(&big).unwrap_err(), PcstError::TooLarge(13));
    }

    proptest! {
        #[test]
        fn solutions_are_feasible_and_consistent(seed in any::<u64>()) {
            let inst = random_instance(seed);
            let sol = solve_pcst(&inst);
            let bf = brute_force_pcst(&inst).unwrap();
            prop_assert!(is_feasible(&inst, &sol));
            prop_assert!(is_feasible(&inst, &bf));
            prop_assert!((sol.recompute_objective(&inst) - sol.objective).abs() < 1e-9);
            let best_single = inst.graph().node_ids().map(|id| inst.prize(id)).fold(0.0, f64::max);
            prop_assert!(sol.objective >= best_single);
            prop_assert!(sol.objective <= bf.objective + 1e-9);
            prop_assert!(sol.objective >= 0.5 * bf.objective - 1e-9);
            for t in &sol.forest {
                prop_assert!(t.nodes.is_disjoint(&sol.nodes) || t.nodes == sol.nodes);
            }
        }
    }
}
