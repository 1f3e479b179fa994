//! Additive graph encoder with exact per-node, per-feature-group attribution.
//!
//! For a subgraph with nodes `1..N`, feature groups `F_1..F_G` and shape
//! functions `f_g`, the representation of node `i` in group `g` is
//!
//! ```text
//! [h_i]_g = sum_j  rho(1 / (1 + dist(j, i))) / #dist(j, i)  *  f_g(x_j[F_g])
//! ```
//!
//! where `#dist(j, i)` is the number of nodes at distance `dist(j, i)` from
//! `i`. Summing over `i` and regrouping by `j` gives the readout
//!
//! ```text
//! link( sum_g sum_j f_g(x_j[F_g]) * W_j ),   W_j = sum_i rho(...) / #dist(j, i)
//! ```
//!
//! so each `f_g(x_j) * W_j` is an exact additive share of the pre-link output.
//! Pairs in different components contribute nothing; the self pair uses
//! `rho(1)`. Shape functions map to `K` output channels and the decomposition
//! holds per channel.

mod checkpoint;
mod decay;
mod encode;
mod mlp;
mod planted;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingError;
use crate::graph::{GraphError, NodeId};

pub use checkpoint::{from_json, load_checkpoint, save_checkpoint, to_json, CHECKPOINT_VERSION};
pub use decay::MonotoneDecay;
pub use encode::{
    encode, node_weight, Attribution, AttributionRecord, Encoding, GraphInput, TermRecord,
};
pub use mlp::{Dense, ShapeFunction};
pub use planted::{make_planted_task, PlantedGraph, PlantedTask, PLANTED_DIM};
pub use train::{loss_and_gradients, train, AdamConfig, Gradients, Sample, Task, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature grouping: {0}")]
    Grouping(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("embedding dimension {got} does not match model dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("target for sample {sample} has length {got}, model has {expected} channels")]
    TargetShape {
        sample: usize,
        expected: usize,
        got: usize,
    },
    #[error("task does not fit link {0:?}")]
    TaskLink(Link),
    #[error("non-finite loss on sample {0}")]
    NonFinite(usize),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("attribution record: {0}")]
    Record(String),
    #[error("node {0} not in the encoded subgraph")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Partition of embedding dimensions `0..dim` into ordered groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGrouping {
    dim: usize,
    groups: Vec<Vec<usize>>,
}

impl FeatureGrouping {
    pub fn new(dim: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if dim == 0 || groups.is_empty() {
            return Err(ModelError::Grouping(
                "need dim >= 1 and at least one group".into(),
            ));
        }
        let mut seen = vec![false; dim];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(ModelError::Grouping(format!("group {g} is empty")));
            }
            for &i in members {
                match seen.get_mut(i) {
                    None => return Err(ModelError::Grouping(format!("index {i} out of range"))),
                    Some(true) => {
                        return Err(ModelError::Grouping(format!("index {i} in two groups")))
                    }
                    Some(s) => *s = true,
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(ModelError::Grouping(format!("index {i} not covered")));
        }
        Ok(Self { dim, groups })
    }

    /// One group holding every dimension.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(dim, vec![(0..dim).collect()])
    }

    /// `count` contiguous blocks of near-equal size.
    pub fn contiguous(dim: usize, count: usize) -> Result<Self> {
        if count == 0 || count > dim {
            return Err(ModelError::Grouping(format!(
                "cannot split {dim} dims into {count} groups"
            )));
        }
        let groups = (0..count)
            .map(|g| (g * dim / count..(g + 1) * dim / count).collect())
            .collect();
        Self::new(dim, groups)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub(crate) fn gather(&self, g: usize, x: &[f64]) -> Vec<f64> {
        self.groups[g].iter().map(|&i| x[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Sigmoid,
    Softmax,
}

impl Link {
    pub fn apply(self, z: &[f64]) -> Vec<f64> {
        match self {
            Link::Identity => z.to_vec(),
            Link::Sigmoid => z.iter().map(|&v| decay::sigmoid(v)).collect(),
            Link::Softmax => {
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub channels: usize,
    pub link: Link,
    pub knots: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            channels: 1,
            link: Link::Identity,
            knots: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MGnanModel {
    pub grouping: FeatureGrouping,
    pub shapes: Vec<ShapeFunction>,
    pub rho: MonotoneDecay,
    pub link: Link,
    pub channels: usize,
    pub seed: u64,
}

impl MGnanModel {
    pub fn new(grouping: FeatureGrouping, cfg: &ModelConfig, seed: u64) -> Result<Self> {
        if cfg.channels == 0 {
            return Err(ModelError::Config("channels must be at least 1".into()));
        }
        if cfg.link == Link::Softmax && cfg.channels < 2 {
            return Err(ModelError::Config(
                "softmax link needs at least 2 channels".into(),
            ));
        }
        if cfg.knots == 0 {
            return Err(ModelError::Config("knots must be at least 1".into()));
        }
        if cfg.hidden.contains(&0) {
            return Err(ModelError::Config("hidden widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = grouping
            .groups()
            .iter()
            .enumerate()
            .map(|(g, members)| {
                let mut widths = vec![members.len()];
                widths.extend(&cfg.hidden);
                widths.push(cfg.channels);
                ShapeFunction::new(g, &widths, &mut rng)
            })
            .collect();
        Ok(Self {
            grouping,
            shapes,
            rho: MonotoneDecay::linear(cfg.knots),
            link: cfg.link,
            channels: cfg.channels,
            seed,
        })
    }

    pub fn param_count(&self) -> usize {
        self.shapes
            .iter()
            .map(ShapeFunction::param_count)
            .sum::<usize>()
            + self.rho.param_count()
    }

    /// Flat parameter vector: every shape function's layers (weights then
    /// bias) in group order, then the decay increments, then the decay base.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for s in &self.shapes {
            s.write_params(&mut out);
        }
        out.extend_from_slice(&self.rho.increments);
        out.push(self.rho.base);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter vector length");
        let mut at = 0;
        for s in &mut self.shapes {
            at += s.read_params(&params[at..]);
        }
        let m = self.rho.segments();
        self.rho.increments.copy_from_slice(&params[at..at + m]);
        self.rho.base = params[at + m];
    }

    pub(crate) fn shape_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.shapes.len() + 1);
        let mut at = 0;
        for s in &self.shapes {
            offs.push(at);
            at += s.param_count();
        }
        offs.push(at);
        offs
    }
}
