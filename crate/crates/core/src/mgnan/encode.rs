use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{decay::MonotoneDecay, Link, MGnanModel, ModelError, Result};
use crate::embedding::{EmbeddingError, EmbeddingStore};
use crate::graph::{all_distances, DistanceTable, KnowledgeGraph, NodeId};
use crate::retrieval::RetrievedSubgraph;

/// Reference `W_j`: sums over every `i` reachable from `j` directly.
pub fn node_weight(
    graph: &KnowledgeGraph,
    tables: &[DistanceTable],
    j: NodeId,
    rho: &MonotoneDecay,
) -> Result<f64> {
    let jx = graph.index_of(j).ok_or(ModelError::UnknownNode(j))?;
    let knots = rho.knot_values();
    let mut w = 0.0;
    for table in tables {
        if let Some(d) = table.dist[jx] {
            w += rho.eval_with(&knots, 1.0 / (1.0 + d as f64)) / table.shell_size(d) as f64;
        }
    }
    Ok(w)
}

/// Everything the encoder needs about one subgraph, precomputed once.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub ids: Vec<NodeId>,
    pub x: Vec<Vec<f64>>,
    pub tables: Vec<DistanceTable>,
    /// `shells[j]` lists `(d, sum over i at distance d of 1 / #dist(j, i))`, `d` ascending.
    pub(crate) shells: Vec<Vec<(u32, f64)>>,
}

impl GraphInput {
    pub fn new(graph: &KnowledgeGraph, store: &EmbeddingStore) -> Result<Self> {
        let x = graph
            .node_ids()
            .map(|id| {
                store
                    .vector(id)
                    .map(|v| v.iter().map(|&f| f as f64).collect())
            })
            .collect::<std::result::Result<Vec<Vec<f64>>, EmbeddingError>>()?;
        Self::with_features(graph, x)
    }

    pub fn from_subgraph(sub: &RetrievedSubgraph, store: &EmbeddingStore) -> Result<Self> {
        Self::new(&sub.graph, store)
    }

    /// `x[i]` belongs to the node at position `i` of `graph`.
    pub fn with_features(graph: &KnowledgeGraph, x: Vec<Vec<f64>>) -> Result<Self> {
        assert_eq!(x.len(), graph.node_count(), "one feature row per node");
        if let Some(first) = x.first() {
            if let Some(bad) = x.iter().find(|r| r.len() != first.len()) {
                return Err(ModelError::DimMismatch {
                    expected: first.len(),
                    got: bad.len(),
                });
            }
        }
        let tables = all_distances(graph);
        let n = graph.node_count();
        let mut dense: Vec<Vec<f64>> = vec![Vec::new(); n];
        for table in &tables {
            for (j, d) in table.dist.iter().enumerate() {
                if let Some(d) = *d {
                    let row = &mut dense[j];
                    if row.len() <= d as usize {
                        row.resize(d as usize + 1, 0.0);
                    }
                    row[d as usize] += 1.0 / table.shell_size(d) as f64;
                }
            }
        }
        let shells = dense
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .enumerate()
                    .filter(|&(_, s)| s != 0.0)
                    .map(|(d, s)| (d as u32, s))
                    .collect()
            })
            .collect();
        Ok(Self {
            ids: graph.node_ids().collect(),
            x,
            tables,
            shells,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub(crate) fn weights(&self, rho: &MonotoneDecay, knots: &[f64]) -> Vec<f64> {
        self.shells
            .iter()
            .map(|shell| {
                shell
                    .iter()
                    .map(|&(d, s)| rho.eval_with(knots, 1.0 / (1.0 + d as f64)) * s)
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub ids: Vec<NodeId>,
    /// `terms[j][g]` is `f_g(x_j) * W_j`, one value per channel.
    pub terms: Vec<Vec<Vec<f64>>>,
    pub node_weight: Vec<f64>,
    pub pre_link_total: Vec<f64>,
    pub output: Vec<f64>,
    pub link: Link,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub node: NodeId,
    pub group: usize,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub qid: String,
    pub pre_link_total: Vec<f64>,
    pub output: Vec<f64>,
    pub terms: Vec<TermRecord>,
    pub link: Link,
    pub node_weight: BTreeMap<NodeId, f64>,
}

impl Attribution {
    pub fn groups(&self) -> usize {
        self.terms.first().map_or(0, Vec::len)
    }

    pub fn channels(&self) -> usize {
        self.pre_link_total.len()
    }

    pub fn term(&self, node: NodeId, group: usize) -> Option<&[f64]> {
        let j = self.ids.binary_search(&node).ok()?;
        self.terms[j].get(group).map(Vec::as_slice)
    }

    /// Sum of all terms, groups outer and nodes ascending. This is the order
    /// `pre_link_total` is accumulated in, so the result is identical to it.
    pub fn canonical_sum(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.channels()];
        for g in 0..self.groups() {
            for node in &self.terms {
                for (t, v) in total.iter_mut().zip(&node[g]) {
                    *t += v;
                }
            }
        }
        total
    }

    pub fn to_record(&self, qid: &str) -> AttributionRecord {
        let mut terms: Vec<TermRecord> = self
            .ids
            .iter()
            .zip(&self.terms)
            .flat_map(|(&node, groups)| {
                groups.iter().enumerate().map(move |(group, v)| TermRecord {
                    node,
                    group,
                    value: v.clone(),
                })
            })
            .collect();
        terms.sort_by(|a, b| {
            b.value[0]
                .abs()
                .total_cmp(&a.value[0].abs())
                .then(a.node.cmp(&b.node))
                .then(a.group.cmp(&b.group))
        });
        AttributionRecord {
            qid: qid.to_string(),
            pre_link_total: self.pre_link_total.clone(),
            output: self.output.clone(),
            terms,
            link: self.link,
            node_weight: self
                .ids
                .iter()
                .copied()
                .zip(self.node_weight.iter().copied())
                .collect(),
        }
    }

    pub fn from_record(rec: &AttributionRecord) -> Result<Self> {
        let bad = |m: String| Err(ModelError::Record(format!("{}: {m}", rec.qid)));
        let ids: Vec<NodeId> = rec.node_weight.keys().copied().collect();
        let groups = rec.terms.iter().map(|t| t.group + 1).max().unwrap_or(0);
        let k = rec.pre_link_total.len();
        if ids.is_empty() || rec.terms.len() != ids.len() * groups {
            return bad("terms do not cover every (node, group) pair".into());
        }
        let mut terms: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; groups]; ids.len()];
        for t in &rec.terms {
            let Ok(j) = ids.binary_search(&t.node) else {
                return bad(format!("term for unknown node {}", t.node));
            };
            if t.value.len() != k || terms[j][t.group].replace(t.value.clone()).is_some() {
                return bad(format!(
                    "malformed term for node {} group {}",
                    t.node, t.group
                ));
            }
        }
        Ok(Self {
            terms: terms
                .into_iter()
                .map(|g| g.into_iter().map(|v| v.expect("counted above")).collect())
                .collect(),
            node_weight: rec.node_weight.values().copied().collect(),
            ids,
            pre_link_total: rec.pre_link_total.clone(),
            output: rec.output.clone(),
            link: rec.link,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Encoding {
    /// `node_repr[i][g]` is the `K`-vector `[h_i]_g`.
    pub node_repr: BTreeMap<NodeId, Vec<Vec<f64>>>,
    pub attribution: Attribution,
}

impl Encoding {
    /// Readout through the node representations: sum over `i`, then `g`.
    pub fn per_node_readout(&self) -> Vec<f64> {
        let k = self.attribution.channels();
        let mut total = vec![0.0; k];
        for h in self.node_repr.values() {
            for hg in h {
                for (t, v) in total.iter_mut().zip(hg) {
                    *t += v;
                }
            }
        }
        total
    }
}

pub(crate) fn shape_outputs(model: &MGnanModel, input: &GraphInput) -> Vec<Vec<Vec<f64>>> {
    input
        .x
        .iter()
        .map(|x| {
            model
                .shapes
                .iter()
                .enumerate()
                .map(|(g, f)| f.forward(&model.grouping.gather(g, x)))
                .collect()
        })
        .collect()
}

pub(crate) fn check_dim(model: &MGnanModel, input: &GraphInput) -> Result<()> {
    if !input.is_empty() && input.dim() != model.grouping.dim() {
        return Err(ModelError::DimMismatch {
            expected: model.grouping.dim(),
            got: input.dim(),
        });
    }
    Ok(())
}

pub fn encode(model: &MGnanModel, input: &GraphInput) -> Result<Encoding> {
    check_dim(model, input)?;
    let knots = model.rho.knot_values();
    let fx = shape_outputs(model, input);
    let w = input.weights(&model.rho, &knots);
    let k = model.channels;
    let groups = model.shapes.len();

    let terms: Vec<Vec<Vec<f64>>> = fx
        .iter()
        .zip(&w)
        .map(|(per_g, &wj)| {
            per_g
                .iter()
                .map(|f| f.iter().map(|v| v * wj).collect())
                .collect()
        })
        .collect();
    let mut pre = vec![0.0; k];
    for g in 0..groups {
        for node in &terms {
            for (t, v) in pre.iter_mut().zip(&node[g]) {
                *t += v;
            }
        }
    }

    let mut node_repr = BTreeMap::new();
    for (i, table) in input.tables.iter().enumerate() {
        let mut h = vec![vec![0.0; k]; groups];
        for (j, d) in table.dist.iter().enumerate() {
            let Some(d) = *d else { continue };
            let c =
                model.rho.eval_with(&knots, 1.0 / (1.0 + d as f64)) / table.shell_size(d) as f64;
            for (hg, f) in h.iter_mut().zip(&fx[j]) {
                for (a, v) in hg.iter_mut().zip(f) {
                    *a += c * v;
                }
            }
        }
        node_repr.insert(input.ids[i], h);
    }

    let attribution = Attribution {
        ids: input.ids.clone(),
        terms,
        node_weight: w,
        output: model.link.apply(&pre),
        pre_link_total: pre,
        link: model.link,
    };
    let enc = Encoding {
        node_repr,
        attribution,
    };
    if cfg!(debug_assertions) {
        let scale: f64 = enc
            .attribution
            .terms
            .iter()
            .flatten()
            .flatten()
            .map(|v| v.abs())
            .sum();
        for (a, b) in enc
            .per_node_readout()
            .iter()
            .zip(&enc.attribution.pre_link_total)
        {
            debug_assert!(
                (a - b).abs() <= 1e-9 * scale.max(1.0),
                "per-node readout {a} disagrees with reordered readout {b}"
            );
        }
    }
    Ok(enc)
}
