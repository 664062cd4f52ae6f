use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::network::{PreparedScene, SceneContext, SdfNetwork};
use crate::error::invalid;
use crate::kinematics::{pose_jitter, ARTICULATION_DIM};
use crate::par::{self, Execution};
use crate::{Error, Result, Vec3};

/// Training samples per parallel work unit.
const TRAIN_CHUNK: usize = 8;
/// Forward passes per training sample: the point and its six axis neighbours.
pub const STENCIL: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub eikonal_coefficient: f64,
    pub batch_size: usize,
    /// Central-difference step of the eikonal stencil, mm.
    pub eikonal_step: f64,
    pub iterations: u64,
    pub seed: u64,
    /// Clamp both prediction and target to `[-t, t]` in the data term.
    pub truncation: Option<f64>,
    /// Std-dev (rad) of articulation noise applied to the conditioning.
    pub articulation_jitter: f64,
    /// Write a checkpoint every this many iterations (0 = only at the end).
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            eikonal_coefficient: 0.1,
            batch_size: 64,
            eikonal_step: 1.0,
            iterations: 5000,
            seed: 0,
            truncation: None,
            articulation_jitter: 0.0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        if !(self.eikonal_coefficient >= 0.0 && self.eikonal_coefficient.is_finite()) {
            return Err(invalid("eikonal_coefficient must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if !(self.eikonal_step > 0.0 && self.eikonal_step.is_finite()) {
            return Err(invalid("eikonal_step must be positive"));
        }
        if matches!(self.truncation, Some(t) if !(t > 0.0)) {
            return Err(invalid("truncation must be positive"));
        }
        if !(self.articulation_jitter >= 0.0) {
            return Err(invalid("articulation_jitter must be non-negative"));
        }
        Ok(())
    }
}

/// Loss components averaged over a batch. `eikonal_term` already includes
/// the coefficient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub iteration: u64,
    pub loss: f64,
    pub data_term: f64,
    pub eikonal_term: f64,
}

/// `[x, x+h e0, x-h e0, x+h e1, x-h e1, x+h e2, x-h e2]`.
pub fn stencil_points(x: &Vec3, h: f64) -> [Vec3; STENCIL] {
    let mut out = [*x; STENCIL];
    for a in 0..3 {
        let e = Vec3::ith(a, h);
        out[1 + 2 * a] = x + e;
        out[2 + 2 * a] = x - e;
    }
    out
}

/// Per-sample loss terms and their derivatives with respect to the seven
/// stencil values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilTerms {
    pub data: f64,
    pub eikonal: f64,
    pub gradient_norm: f64,
    pub upstream: [f64; STENCIL],
}

/// `|s - s_hat| + lambda (|grad s| - 1)^2` for one sample from its stencil values (mm).
pub fn stencil_loss(values: &[f64; STENCIL], target: f64, cfg: &TrainConfig) -> StencilTerms {
    let mut upstream = [0.0; STENCIL];
    let (s, t) = match cfg.truncation {
        Some(d) => (values[0].clamp(-d, d), target.clamp(-d, d)),
        None => (values[0], target),
    };
    let diff = s - t;
    let data = diff.abs();
    let clamped = matches!(cfg.truncation, Some(d) if values[0].abs() > d);
    if !clamped && diff != 0.0 {
        upstream[0] = diff.signum();
    }
    let h = cfg.eikonal_step;
    let g = Vec3::from_fn(|a, _| (values[1 + 2 * a] - values[2 + 2 * a]) / (2.0 * h));
    let norm = g.norm();
    let lambda = cfg.eikonal_coefficient;
    let eikonal = lambda * (norm - 1.0).powi(2);
    if lambda > 0.0 && norm > 0.0 {
        let k = lambda * 2.0 * (norm - 1.0) / norm / (2.0 * h);
        for a in 0..3 {
            upstream[1 + 2 * a] += k * g[a];
            upstream[2 + 2 * a] -= k * g[a];
        }
    }
    StencilTerms { data, eikonal, gradient_norm: norm, upstream }
}

/// One supervised query: a point of a prepared scene and its true distance.
#[derive(Clone, Debug)]
pub struct BatchItem<'a> {
    pub scene: PreparedScene<'a>,
    pub point: Vec3,
    pub target: f64,
}

struct ChunkResult {
    grad: Vec<f64>,
    data: f64,
    eikonal: f64,
}

/// Batch loss and its parameter gradient (decoder then projection).
pub fn batch_gradient(
    net: &SdfNetwork,
    batch: &[BatchItem<'_>],
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<(LossReport, Vec<f64>)> {
    if batch.is_empty() {
        return Err(invalid("training batch is empty"));
    }
    let n = batch.len() as f64;
    let width = net.layout().width();
    let global_cols = net.layout().global_feature;
    let n_mlp = net.mlp().num_params();
    let scale = net.config().output_scale;
    let chunks = par::map_chunks(exec, batch, TRAIN_CHUNK, |_, items| -> Result<ChunkResult> {
        let rows = items.len() * STENCIL;
        let mut inputs = vec![0.0; rows * width];
        for (i, item) in items.iter().enumerate() {
            for (k, p) in stencil_points(&item.point, cfg.eikonal_step).iter().enumerate() {
                let r = i * STENCIL + k;
                net.encode_into(&item.scene, p, &mut inputs[r * width..(r + 1) * width]);
            }
        }
        let cache = net.mlp().forward_batch(&inputs, rows)?;
        let mut upstream = vec![0.0; rows];
        let (mut data, mut eikonal) = (0.0, 0.0);
        for (i, item) in items.iter().enumerate() {
            let mut values = [0.0; STENCIL];
            for (k, v) in values.iter_mut().enumerate() {
                *v = cache.outputs()[i * STENCIL + k] * scale;
            }
            let terms = stencil_loss(&values, item.target, cfg);
            data += terms.data;
            eikonal += terms.eikonal;
            for k in 0..STENCIL {
                upstream[i * STENCIL + k] = terms.upstream[k] * scale / n;
            }
        }
        let mut grad = vec![0.0; net.num_params()];
        let dglobal = net
            .mlp()
            .backward_batch(&cache, &upstream, &mut grad[..n_mlp], Some(global_cols.clone()))?
            .unwrap_or_default();
        let gw = global_cols.len();
        for (i, item) in items.iter().enumerate() {
            let mut d = vec![0.0; gw];
            for k in 0..STENCIL {
                let r = i * STENCIL + k;
                for (a, b) in d.iter_mut().zip(&dglobal[r * gw..(r + 1) * gw]) {
                    *a += b;
                }
            }
            net.projection().accumulate_grad(&item.scene.scene.pyramid.global_feature, &d, &mut grad[n_mlp..]);
        }
        Ok(ChunkResult { grad, data, eikonal })
    });
    let mut grad = vec![0.0; net.num_params()];
    let (mut data, mut eikonal) = (0.0, 0.0);
    for c in chunks {
        let c = c?;
        for (g, x) in grad.iter_mut().zip(&c.grad) {
            *g += x;
        }
        data += c.data;
        eikonal += c.eikonal;
    }
    let report = LossReport { iteration: 0, loss: (data + eikonal) / n, data_term: data / n, eikonal_term: eikonal / n };
    Ok((report, grad))
}

/// One Adam step on the batch loss. On a non-finite loss or gradient the
/// network and optimizer are left untouched and `Diverged` is returned.
pub fn train_step(
    net: &mut SdfNetwork,
    adam: &mut AdamState,
    batch: &[BatchItem<'_>],
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<LossReport> {
    let (mut report, grad) = batch_gradient(net, batch, cfg, exec)?;
    report.iteration = adam.step + 1;
    if !report.loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::Diverged(adam.step + 1));
    }
    let mut params = net.params();
    let mut next = adam.clone();
    adam_step(&mut next, &mut params, &grad)?;
    for p in params.iter_mut() {
        *p = *p as f32 as f64;
    }
    next.round_to_f32();
    if !params.iter().all(|p| p.is_finite()) {
        return Err(Error::Diverged(adam.step + 1));
    }
    net.set_params(&params)?;
    *adam = next;
    Ok(report)
}

/// Supervision for one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingScene {
    pub context: SceneContext,
    pub points: Vec<Vec3>,
    pub sdf: Vec<f64>,
}

impl TrainingScene {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Stateful training loop. Batches are drawn from a counter-based RNG
/// stream per iteration, so a resumed run matches an uninterrupted one.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub network: SdfNetwork,
    pub adam: AdamState,
    pub config: TrainConfig,
    pub exec: Execution,
}

impl Trainer {
    pub fn new(network: SdfNetwork, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = AdamState::new(network.num_params(), config.learning_rate);
        Ok(Self { network, adam, config, exec: Execution::default() })
    }

    pub fn resume(network: SdfNetwork, adam: AdamState, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if adam.m.len() != network.num_params() {
            return Err(Error::Shape { expected: network.num_params(), actual: adam.m.len() });
        }
        Ok(Self { network, adam, config, exec: Execution::default() })
    }

    pub fn iteration(&self) -> u64 {
        self.adam.step
    }

    fn draw_batch<'a>(&self, data: &'a [TrainingScene], iteration: u64) -> Result<Vec<BatchItem<'a>>> {
        let total: usize = data.iter().map(|s| s.len()).sum();
        if total == 0 {
            return Err(invalid("training data has no samples"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(iteration);
        let mut items = Vec::with_capacity(self.config.batch_size);
        for _ in 0..self.config.batch_size {
            let mut k = rng.random_range(0..total);
            let mut s = 0;
            while k >= data[s].len() {
                k -= data[s].len();
                s += 1;
            }
            let scene = &data[s];
            let prep = if self.config.articulation_jitter > 0.0 {
                let jittered = pose_jitter(&scene.context.pose, self.config.articulation_jitter, rng.random());
                self.network.prepare_with(&scene.context, &jittered.articulation)?
            } else {
                self.network.prepare(&scene.context)?
            };
            debug_assert_eq!(prep.articulation.len(), ARTICULATION_DIM);
            items.push(BatchItem { scene: prep, point: scene.points[k], target: scene.sdf[k] });
        }
        Ok(items)
    }

    pub fn step(&mut self, data: &[TrainingScene]) -> Result<LossReport> {
        let batch = self.draw_batch(data, self.adam.step)?;
        train_step(&mut self.network, &mut self.adam, &batch, &self.config, self.exec)
    }

    /// Runs until `config.iterations`, calling `after_step` after every step.
    pub fn run<F>(&mut self, data: &[TrainingScene], mut after_step: F) -> Result<Vec<LossReport>>
    where
        F: FnMut(&Trainer, &LossReport) -> Result<()>,
    {
        let mut log = Vec::new();
        while self.adam.step < self.config.iterations {
            let r = self.step(data)?;
            after_step(self, &r)?;
            log.push(r);
        }
        Ok(log)
    }
}

/// Mean |s - s_hat| over every sample of `scene`.
pub fn mean_abs_error(net: &SdfNetwork, scene: &TrainingScene, exec: Execution) -> Result<f64> {
    let prep = net.prepare(&scene.context)?;
    let pred = net.eval_points(&prep, &scene.points, exec);
    Ok(pred.iter().zip(&scene.sdf).map(|(a, b)| (a - b).abs()).sum::<f64>() / scene.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_of_exact_distance_has_no_loss() {
        let cfg = TrainConfig::default();
        let x = Vec3::new(30.0, 40.0, 0.0);
        let values = stencil_points(&x, cfg.eikonal_step).map(|p| p.norm() - 45.0);
        let t = stencil_loss(&values, x.norm() - 45.0, &cfg);
        assert_eq!(t.data, 0.0);
        assert!(t.eikonal < 1e-6);
    }

    #[test]
    fn zero_coefficient_gives_zero_eikonal() {
        let cfg = TrainConfig { eikonal_coefficient: 0.0, ..TrainConfig::default() };
        let t = stencil_loss(&[1.0, 5.0, -3.0, 0.0, 0.0, 2.0, 2.0], 0.5, &cfg);
        assert_eq!(t.eikonal, 0.0);
        assert_eq!(t.upstream, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn stencil_upstream_matches_finite_differences() {
        let cfg = TrainConfig { eikonal_step: 0.7, ..TrainConfig::default() };
        let v = [0.3, 1.1, -0.4, 0.2, 0.9, -1.3, 0.05];
        let t = stencil_loss(&v, -0.2, &cfg);
        let total = |v: &[f64; STENCIL]| {
            let s = stencil_loss(v, -0.2, &cfg);
            s.data + s.eikonal
        };
        for k in 0..STENCIL {
            let (mut a, mut b) = (v, v);
            a[k] += 1e-6;
            b[k] -= 1e-6;
            let fd = (total(&a) - total(&b)) / 2e-6;
            assert!((fd - t.upstream[k]).abs() < 1e-6, "{k}: {fd} vs {}", t.upstream[k]);
        }
    }
}
