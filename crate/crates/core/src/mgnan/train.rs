use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decay::softplus;
use super::encode::{check_dim, GraphInput};
use super::{Link, MGnanModel, ModelError, Result};

#[derive(Debug, Clone)]
pub struct Sample {
    pub input: GraphInput,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// Flat gradient in the layout of [`MGnanModel::params`].
pub type Gradients = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 100,
            batch_size: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MGnanModel,
    /// Mean per-sample loss of each epoch, measured during the epoch.
    pub losses: Vec<f64>,
}

fn check_task(model: &MGnanModel, task: Task) -> Result<()> {
    match (task, model.link) {
        (Task::Regression, Link::Identity)
        | (Task::Classification, Link::Sigmoid | Link::Softmax) => Ok(()),
        _ => Err(ModelError::TaskLink(model.link)),
    }
}

/// Loss and its gradient with respect to the pre-link output.
fn loss_head(link: Link, z: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let k = z.len() as f64;
    match link {
        Link::Identity => {
            let loss = z.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / k;
            (
                loss,
                z.iter().zip(t).map(|(a, b)| 2.0 * (a - b) / k).collect(),
            )
        }
        Link::Sigmoid => {
            let loss = z
                .iter()
                .zip(t)
                .map(|(&a, &b)| softplus(a) - b * a)
                .sum::<f64>()
                / k;
            let p = link.apply(z);
            (loss, p.iter().zip(t).map(|(a, b)| (a - b) / k).collect())
        }
        Link::Softmax => {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            let mass: f64 = t.iter().sum();
            let loss = mass * lse - z.iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
            let p = link.apply(z);
            (loss, p.iter().zip(t).map(|(a, b)| a * mass - b).collect())
        }
    }
}

fn sample_gradient(model: &MGnanModel, sample: &Sample, offsets: &[usize]) -> (f64, Gradients) {
    let input = &sample.input;
    let knots = model.rho.knot_values();
    let w = input.weights(&model.rho, &knots);
    let k = model.channels;
    let groups = model.shapes.len();

    let acts: Vec<Vec<Vec<Vec<f64>>>> = input
        .x
        .iter()
        .map(|x| {
            model
                .shapes
                .iter()
                .enumerate()
                .map(|(g, f)| f.forward_cached(&model.grouping.gather(g, x)))
                .collect()
        })
        .collect();
    let mut z = vec![0.0; k];
    for g in 0..groups {
        for (node, &wj) in acts.iter().zip(&w) {
            for (t, v) in z.iter_mut().zip(node[g].last().unwrap()) {
                *t += v * wj;
            }
        }
    }
    let (loss, dz) = loss_head(model.link, &z, &sample.target);

    let mut grad = vec![0.0; model.param_count()];
    let mut d_w = vec![0.0; input.len()];
    for (j, node) in acts.iter().enumerate() {
        let d_out: Vec<f64> = dz.iter().map(|d| d * w[j]).collect();
        for (g, a) in node.iter().enumerate() {
            d_w[j] += a
                .last()
                .unwrap()
                .iter()
                .zip(&dz)
                .map(|(f, d)| f * d)
                .sum::<f64>();
            model.shapes[g].backward(a, &d_out, &mut grad[offsets[g]..offsets[g + 1]]);
        }
    }

    let mut d_knots = vec![0.0; knots.len()];
    for (shell, &dwj) in input.shells.iter().zip(&d_w) {
        for &(d, s) in shell {
            let (seg, left, right) = model.rho.locate(1.0 / (1.0 + d as f64));
            d_knots[seg] += dwj * s * left;
            d_knots[seg + 1] += dwj * s * right;
        }
    }
    let m = model.rho.segments();
    let tail = offsets[groups];
    let (d_inc, d_base) = grad[tail..].split_at_mut(m);
    model.rho.backprop_knots(&d_knots, d_inc, &mut d_base[0]);
    (loss, grad)
}

/// Mean loss over `batch` and its exact gradient. Per-sample gradients are
/// computed in parallel and summed in ascending sample order.
pub fn loss_and_gradients(
    model: &MGnanModel,
    batch: &[Sample],
    task: Task,
) -> Result<(f64, Gradients)> {
    let refs: Vec<&Sample> = batch.iter().collect();
    batch_loss(model, &refs, task)
}

fn batch_loss(model: &MGnanModel, batch: &[&Sample], task: Task) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    check_task(model, task)?;
    for (i, s) in batch.iter().enumerate() {
        check_dim(model, &s.input)?;
        if s.target.len() != model.channels {
            return Err(ModelError::TargetShape {
                sample: i,
                expected: model.channels,
                got: s.target.len(),
            });
        }
    }
    let offsets = model.shape_offsets();
    let per: Vec<(f64, Gradients)> = batch
        .par_iter()
        .map(|s| sample_gradient(model, s, &offsets))
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.param_count()];
    for (i, (l, g)) in per.into_iter().enumerate() {
        if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite(i));
        }
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|v| *v /= n);
    Ok((loss / n, grad))
}

pub fn train(
    model: &MGnanModel,
    data: &[Sample],
    task: Task,
    cfg: &AdamConfig,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let betas_ok = (0.0..1.0).contains(&cfg.beta1) && (0.0..1.0).contains(&cfg.beta2);
    if cfg.batch_size == 0 || cfg.lr.is_nan() || cfg.lr < 0.0 || !betas_ok {
        return Err(ModelError::Config(
            "adam: need batch_size >= 1, lr >= 0, betas in [0, 1)".into(),
        ));
    }
    let mut model = model.clone();
    let mut params = model.params();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut step = 0i32;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = match batch_loss(&model, &batch, task) {
                Ok(r) => r,
                Err(ModelError::NonFinite(_)) => return Err(ModelError::Diverged(epoch)),
                Err(e) => return Err(e),
            };
            epoch_loss += loss * chunk.len() as f64;
            step += 1;
            let c1 = 1.0 - cfg.beta1.powi(step);
            let c2 = 1.0 - cfg.beta2.powi(step);
            for i in 0..params.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                params[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.eps);
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(ModelError::Diverged(epoch));
            }
            model.set_params(&params);
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() {
            return Err(ModelError::Diverged(epoch));
        }
        log::debug!("epoch {epoch}: loss {mean:.6e}");
        losses.push(mean);
    }
    Ok(TrainOutcome { model, losses })
}
