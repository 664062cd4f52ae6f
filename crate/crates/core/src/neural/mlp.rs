use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Result};

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Softplus { beta: f64 },
    Relu,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::Softplus { beta: 100.0 }
    }
}

impl Activation {
    #[inline]
    fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Softplus { beta } => z.max(0.0) + (-(beta * z).abs()).exp().ln_1p() / beta,
            Activation::Relu => z.max(0.0),
        }
    }

    #[inline]
    fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Softplus { beta } => {
                let t = beta * z;
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Layer layout of a perceptron with an optional input skip.
///
/// Layer `skip_layer` (0-based) receives `[previous activations, input]`.
/// Every layer but the last is followed by the activation; the last layer is
/// linear with one output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_width: usize,
    pub hidden_width: usize,
    pub num_layers: usize,
    pub skip_layer: Option<usize>,
    pub activation: Activation,
}

impl MlpConfig {
    /// Eight affine layers, hidden width 64, input re-injected at the fifth layer.
    pub fn decoder(input_width: usize) -> Self {
        Self { input_width, hidden_width: 64, num_layers: 8, skip_layer: Some(4), activation: Activation::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.num_layers == 0 || (self.num_layers > 1 && self.hidden_width == 0) {
            return Err(invalid("mlp widths and layer count must be positive"));
        }
        if let Some(s) = self.skip_layer {
            if s == 0 || s >= self.num_layers {
                return Err(invalid("skip layer must be an interior layer"));
            }
        }
        if let Activation::Softplus { beta } = self.activation {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(invalid("softplus beta must be positive"));
            }
        }
        Ok(())
    }

    /// `(inputs, outputs)` of layer `l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        let input = if l == 0 {
            self.input_width
        } else if Some(l) == self.skip_layer {
            self.hidden_width + self.input_width
        } else {
            self.hidden_width
        };
        let output = if l + 1 == self.num_layers { 1 } else { self.hidden_width };
        (input, output)
    }

    pub fn num_params(&self) -> usize {
        (0..self.num_layers).map(|l| {
            let (i, o) = self.layer_shape(l);
            o * i + o
        }).sum()
    }
}

/// Flat parameter vector: per layer, the `out x in` row-major weights then the biases.
#[derive(Debug)]
pub struct Mlp {
    config: MlpConfig,
    params: Vec<f64>,
    offsets: Vec<usize>,
    version: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self { config: self.config.clone(), params: self.params.clone(), offsets: self.offsets.clone(), version: self.version }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

impl Mlp {
    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut offsets = Vec::with_capacity(config.num_layers + 1);
        let mut o = 0;
        for l in 0..config.num_layers {
            offsets.push(o);
            let (i, out) = config.layer_shape(l);
            o += out * i + out;
        }
        offsets.push(o);
        Ok(Self { params: vec![0.0; o], config, offsets, version: fresh_version() })
    }

    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// rounded to f32.
    pub fn init(config: MlpConfig, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..m.config.num_layers {
            let (i, _) = m.config.layer_shape(l);
            let bound = 1.0 / (i as f64).sqrt();
            for p in &mut m.params[m.offsets[l]..m.offsets[l + 1]] {
                *p = rng.random_range(-bound..bound) as f32 as f64;
            }
        }
        Ok(m)
    }

    pub fn from_params(config: MlpConfig, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        m.set_params(&params)?;
        Ok(m)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Identifies the current parameter values; changes on every mutation.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape { expected: self.params.len(), actual: params.len() });
        }
        self.params.copy_from_slice(params);
        self.version = fresh_version();
        Ok(())
    }

    /// Mutable access; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version = fresh_version();
        &mut self.params
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (i, o) = self.config.layer_shape(l);
        let s = &self.params[self.offsets[l]..self.offsets[l + 1]];
        s.split_at(o * i)
    }

    pub fn layer_offset(&self, l: usize) -> usize {
        self.offsets[l]
    }

    /// Forward pass over `n` row-major inputs.
    pub fn forward_batch(&self, inputs: &[f64], n: usize) -> Result<MlpCache> {
        let w0 = self.config.input_width;
        if inputs.len() != n * w0 {
            return Err(Error::Shape { expected: n * w0, actual: inputs.len() });
        }
        let layers = self.config.num_layers;
        let h = self.config.hidden_width;
        let mut pre = Vec::with_capacity(layers);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(layers);
        for l in 0..layers {
            let (fan_in, out) = self.config.layer_shape(l);
            let (w, b) = self.layer(l);
            let mut z = vec![0.0; n * out];
            for row in z.chunks_exact_mut(out) {
                row.copy_from_slice(b);
            }
            if l == 0 {
                gemm_nt(n, w0, out, inputs, w0, w, fan_in, 0, &mut z);
            } else {
                let prev = &post[l - 1];
                gemm_nt(n, h, out, prev, h, w, fan_in, 0, &mut z);
                if Some(l) == self.config.skip_layer {
                    gemm_nt(n, w0, out, inputs, w0, w, fan_in, h, &mut z);
                }
            }
            if l + 1 < layers {
                post.push(z.iter().map(|v| self.config.activation.apply(*v)).collect());
            } else {
                post.push(Vec::new());
            }
            pre.push(z);
        }
        Ok(MlpCache { version: self.version, n, inputs: inputs.to_vec(), pre, post })
    }

    /// Reverse pass for per-row upstream derivatives `upstream` (length `n`).
    ///
    /// Parameter gradients are accumulated into `grad` (length
    /// [`num_params`](Self::num_params)). When `input_cols` is given, the
    /// gradient with respect to those input columns is returned, row-major.
    pub fn backward_batch(
        &self,
        cache: &MlpCache,
        upstream: &[f64],
        grad: &mut [f64],
        input_cols: Option<Range<usize>>,
    ) -> Result<Option<Vec<f64>>> {
        if cache.version != self.version {
            return Err(Error::StaleCache);
        }
        let n = cache.n;
        if upstream.len() != n {
            return Err(Error::Shape { expected: n, actual: upstream.len() });
        }
        if grad.len() != self.params.len() {
            return Err(Error::Shape { expected: self.params.len(), actual: grad.len() });
        }
        let cols = input_cols.unwrap_or(0..0);
        if cols.end > self.config.input_width || cols.start > cols.end {
            return Err(invalid("input gradient columns out of range"));
        }
        let w0 = self.config.input_width;
        let h = self.config.hidden_width;
        let nc = cols.len();
        let mut dx = vec![0.0; n * nc];
        let mut dz = upstream.to_vec();
        for l in (0..self.config.num_layers).rev() {
            let (fan_in, out) = self.config.layer_shape(l);
            let (w, _) = self.layer(l);
            let off = self.offsets[l];
            let (gw, gb) = grad[off..off + out * fan_in + out].split_at_mut(out * fan_in);
            for row in dz.chunks_exact(out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // dW[o, i] += sum_r dz[r, o] * in[r, i]
            let is_skip = Some(l) == self.config.skip_layer;
            if l == 0 {
                gemm_tn(out, n, w0, &dz, out, &cache.inputs, w0, gw, fan_in, 0);
            } else {
                gemm_tn(out, n, h, &dz, out, &cache.post[l - 1], h, gw, fan_in, 0);
                if is_skip {
                    gemm_tn(out, n, w0, &dz, out, &cache.inputs, w0, gw, fan_in, h);
                }
            }
            let input_offset = if l == 0 { 0 } else if is_skip { h } else { usize::MAX };
            if nc > 0 && input_offset != usize::MAX {
                gemm_nn(n, out, nc, &dz, out, w, fan_in, input_offset + cols.start, &mut dx, nc);
            }
            if l == 0 {
                break;
            }
            let mut da = vec![0.0; n * h];
            gemm_nn(n, out, h, &dz, out, w, fan_in, 0, &mut da, h);
            for (d, z) in da.iter_mut().zip(&cache.pre[l - 1]) {
                *d *= self.config.activation.derivative(*z);
            }
            dz = da;
        }
        Ok((nc > 0).then_some(dx))
    }
}

/// Activations recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    version: u64,
    n: usize,
    inputs: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn rows(&self) -> usize {
        self.n
    }

    /// Network outputs, one per row.
    pub fn outputs(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

/// Gradients of the scalar output for a single input.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

pub fn mlp_forward(mlp: &Mlp, input: &[f64]) -> Result<(f64, MlpCache)> {
    let cache = mlp.forward_batch(input, 1)?;
    Ok((cache.outputs()[0], cache))
}

pub fn mlp_backward(mlp: &Mlp, cache: &MlpCache, upstream: f64) -> Result<MlpGradients> {
    if cache.rows() != 1 {
        return Err(invalid("mlp_backward expects a single-row cache"));
    }
    let mut params = vec![0.0; mlp.num_params()];
    let input = mlp
        .backward_batch(cache, &[upstream], &mut params, Some(0..mlp.config.input_width))?
        .unwrap_or_default();
    Ok(MlpGradients { params, input })
}

// C[m x n] += A[m x k] * W^T where W is row-major with row stride `ldw`,
// using W's columns starting at `col0`.
#[allow(clippy::too_many_arguments)]
fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], lda: usize, w: &[f64], ldw: usize, col0: usize, c: &mut [f64]) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(a.len() >= (m - 1) * lda + k);
    assert!(w.len() >= (n - 1) * ldw + col0 + k);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), lda as isize, 1,
            w.as_ptr().add(col0), 1, ldw as isize,
            1.0,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

// G[m x n] += D^T * X where D is `k x m` (row stride `ldd`) and X is `k x n`
// (row stride `ldx`); G is row-major with stride `ldg`, starting at column `col0`.
#[allow(clippy::too_many_arguments)]
fn gemm_tn(m: usize, k: usize, n: usize, d: &[f64], ldd: usize, x: &[f64], ldx: usize, g: &mut [f64], ldg: usize, col0: usize) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(d.len() >= (k - 1) * ldd + m);
    assert!(x.len() >= (k - 1) * ldx + n);
    assert!(g.len() >= (m - 1) * ldg + col0 + n);
    // SAFETY: the asserts bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            d.as_ptr(), 1, ldd as isize,
            x.as_ptr(), ldx as isize, 1,
            1.0,
            g.as_mut_ptr().add(col0), ldg as isize, 1,
        );
    }
}

// C[m x n] += D[m x k] * W[:, col0..col0+n] where W is `k x ldw` row-major.
#[allow(clippy::too_many_arguments)]
fn gemm_nn(m: usize, k: usize, n: usize, d: &[f64], ldd: usize, w: &[f64], ldw: usize, col0: usize, c: &mut [f64], ldc: usize) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(d.len() >= (m - 1) * ldd + k);
    assert!(w.len() >= (k - 1) * ldw + col0 + n);
    assert!(c.len() >= (m - 1) * ldc + n);
    // SAFETY: the asserts bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            d.as_ptr(), ldd as isize, 1,
            w.as_ptr().add(col0), ldw as isize, 1,
            1.0,
            c.as_mut_ptr(), ldc as isize, 1,
        );
    }
}
