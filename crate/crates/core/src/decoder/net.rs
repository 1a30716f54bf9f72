//! Parameter storage, batched forward/backward passes and the Adam update.
//!
//! All tensors are row-major `Vec<f64>`; faer provides the matrix products.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Layer sizes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub k0: usize,
    pub n_channels: usize,
    pub n_vertices: usize,
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub latent: usize,
    pub hidden: [usize; 2],
}

impl Architecture {
    /// Conv 8 filters 5×5 stride 2, latent 128, decoder 256 → 512 → 3n.
    pub fn standard(k0: usize, n_channels: usize, n_vertices: usize) -> Self {
        Architecture {
            k0,
            n_channels,
            n_vertices,
            filters: 8,
            kernel: 5,
            stride: 2,
            latent: 128,
            hidden: [256, 512],
        }
    }

    /// Side length of the conv output map.
    pub fn conv_side(&self) -> usize {
        (self.k0 - self.kernel) / self.stride + 1
    }

    pub fn conv_positions(&self) -> usize {
        self.conv_side() * self.conv_side()
    }

    pub fn patch_len(&self) -> usize {
        self.n_channels * self.kernel * self.kernel
    }

    pub fn input_len(&self) -> usize {
        self.n_channels * self.k0 * self.k0
    }

    pub fn output_len(&self) -> usize {
        3 * self.n_vertices
    }

    /// (in, out) of the four dense layers.
    pub fn dense_dims(&self) -> [(usize, usize); 4] {
        let flat = self.conv_positions() * self.filters;
        [
            (flat, self.latent),
            (self.latent, self.hidden[0]),
            (self.hidden[0], self.hidden[1]),
            (self.hidden[1], self.output_len()),
        ]
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.k0 < self.kernel || self.kernel == 0 || self.stride == 0 {
            return Err(format!(
                "k0 = {} is smaller than the {}×{} kernel",
                self.k0, self.kernel, self.kernel
            ));
        }
        if self.n_channels == 0 || self.n_channels > 3 {
            return Err(format!("{} channels (expected 1 to 3)", self.n_channels));
        }
        if self.n_vertices < 3 {
            return Err("the template needs at least three vertices".into());
        }
        if self.filters == 0 || self.latent == 0 || self.hidden.contains(&0) {
            return Err("layer widths must be positive".into());
        }
        Ok(())
    }
}

/// Initial bias of layers followed by a ReLU.
pub const RELU_BIAS: f64 = 0.01;

/// Weights `out × in` (row-major) plus bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            n_in,
            n_out,
            w: vec![0.0; n_in * n_out],
            b: vec![0.0; n_out],
        }
    }

    fn w_ref(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.w, self.n_out, self.n_in)
    }

    fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// All trainable parameters: the conv layer (filters × patch) and four
/// dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub conv: Layer,
    pub dense: [Layer; 4],
}

impl Params {
    pub fn zeros(arch: &Architecture) -> Self {
        let d = arch.dense_dims();
        Params {
            conv: Layer::zeros(arch.patch_len(), arch.filters),
            dense: [
                Layer::zeros(d[0].0, d[0].1),
                Layer::zeros(d[1].0, d[1].1),
                Layer::zeros(d[2].0, d[2].1),
                Layer::zeros(d[3].0, d[3].1),
            ],
        }
    }

    /// He-normal weights with a small positive bias for the ReLU layers; the
    /// output layer uses `1/√fan_in` weights (or zeros) and a zero bias.
    pub fn init(arch: &Architecture, seed: u64, zero_output: bool) -> Self {
        let mut p = Params::zeros(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |layer: &mut Layer, gain: f64| {
            let std = (gain / layer.n_in as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("positive std");
            for w in &mut layer.w {
                *w = dist.sample(&mut rng);
            }
        };
        for l in std::iter::once(&mut p.conv).chain(&mut p.dense[..3]) {
            l.b.fill(RELU_BIAS);
        }
        fill(&mut p.conv, 2.0);
        for l in &mut p.dense[..3] {
            fill(l, 2.0);
        }
        if !zero_output {
            fill(&mut p.dense[3], 1.0);
        }
        p
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        std::iter::once(&self.conv).chain(self.dense.iter())
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        std::iter::once(&mut self.conv).chain(self.dense.iter_mut())
    }

    pub fn n_params(&self) -> usize {
        self.layers().map(Layer::n_params).sum()
    }

    /// Parameter `idx` in the flat order (per layer: weights then bias).
    pub fn get(&self, mut idx: usize) -> f64 {
        for l in self.layers() {
            if idx < l.w.len() {
                return l.w[idx];
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set(&mut self, mut idx: usize, value: f64) {
        for l in self.layers_mut() {
            if idx < l.w.len() {
                l.w[idx] = value;
                return;
            }
            idx -= l.w.len();
            if idx < l.b.len() {
                l.b[idx] = value;
                return;
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }
}

/// Activations kept for the backward pass.
pub(crate) struct Cache {
    batch: usize,
    patches: Vec<f64>,
    /// Post-ReLU activations: conv (flattened per sample), latent, hidden.
    acts: [Vec<f64>; 4],
}

fn mat(data: &[f64], rows: usize, cols: usize) -> MatRef<'_, f64> {
    MatRef::from_row_major_slice(data, rows, cols)
}

fn mat_mut(data: &mut [f64], rows: usize, cols: usize) -> MatMut<'_, f64> {
    MatMut::from_row_major_slice_mut(data, rows, cols)
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// `y = x Wᵀ + b` for a `batch × n_in` input.
fn dense_forward(layer: &Layer, x: &[f64], batch: usize) -> Vec<f64> {
    let mut y = vec![0.0; batch * layer.n_out];
    for row in y.chunks_exact_mut(layer.n_out) {
        row.copy_from_slice(&layer.b);
    }
    matmul(
        mat_mut(&mut y, batch, layer.n_out),
        Accum::Add,
        mat(x, batch, layer.n_in),
        layer.w_ref().transpose(),
        1.0,
        Par::Seq,
    );
    y
}

/// Rows of `C·K·K` patch values, one row per (sample, output position).
fn im2col(arch: &Architecture, inputs: &[f64], batch: usize) -> Vec<f64> {
    let (k0, kk, s, side) = (arch.k0, arch.kernel, arch.stride, arch.conv_side());
    let plen = arch.patch_len();
    let ilen = arch.input_len();
    let mut out = vec![0.0; batch * side * side * plen];
    for b in 0..batch {
        let x = &inputs[b * ilen..(b + 1) * ilen];
        for r in 0..side {
            for c in 0..side {
                let row = (b * side + r) * side + c;
                let dst = &mut out[row * plen..(row + 1) * plen];
                let mut q = 0;
                for ch in 0..arch.n_channels {
                    for dr in 0..kk {
                        let base = ch * k0 * k0 + (r * s + dr) * k0 + c * s;
                        dst[q..q + kk].copy_from_slice(&x[base..base + kk]);
                        q += kk;
                    }
                }
            }
        }
    }
    out
}

/// Batched forward pass. `inputs` holds `batch` standardized inputs of
/// length `input_len`; returns `batch × 3n` outputs.
pub(crate) fn forward(
    arch: &Architecture,
    p: &Params,
    inputs: &[f64],
    batch: usize,
) -> (Vec<f64>, Cache) {
    let patches = im2col(arch, inputs, batch);
    // conv rows are (sample, position) with one column per filter, which
    // flattens to position-major, filter-minor per sample
    let mut conv = dense_forward(&p.conv, &patches, batch * arch.conv_positions());
    relu(&mut conv);
    let mut h1 = dense_forward(&p.dense[0], &conv, batch);
    relu(&mut h1);
    let mut h2 = dense_forward(&p.dense[1], &h1, batch);
    relu(&mut h2);
    let mut h3 = dense_forward(&p.dense[2], &h2, batch);
    relu(&mut h3);
    let out = dense_forward(&p.dense[3], &h3, batch);
    (
        out,
        Cache {
            batch,
            patches,
            acts: [conv, h1, h2, h3],
        },
    )
}

/// Accumulates `dW = dYᵀ X`, `db = Σ dY` into `g`.
fn dense_grads(g: &mut Layer, dy: &[f64], x: &[f64], rows: usize) {
    matmul(
        mat_mut(&mut g.w, g.n_out, g.n_in),
        Accum::Add,
        mat(dy, rows, g.n_out).transpose(),
        mat(x, rows, g.n_in),
        1.0,
        Par::Seq,
    );
    for row in dy.chunks_exact(g.n_out) {
        for (b, d) in g.b.iter_mut().zip(row) {
            *b += d;
        }
    }
}

/// `dX = dY W`, masked by the ReLU that produced `x`.
fn dense_back_input(layer: &Layer, dy: &[f64], x_act: &[f64], rows: usize) -> Vec<f64> {
    let mut dx = vec![0.0; rows * layer.n_in];
    matmul(
        mat_mut(&mut dx, rows, layer.n_in),
        Accum::Replace,
        mat(dy, rows, layer.n_out),
        layer.w_ref(),
        1.0,
        Par::Seq,
    );
    for (d, a) in dx.iter_mut().zip(x_act) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

/// Gradients of all parameters given `d_out` (`batch × 3n`).
pub(crate) fn backward(arch: &Architecture, p: &Params, cache: &Cache, d_out: &[f64]) -> Params {
    let mut g = Params::zeros(arch);
    backward_into(arch, p, cache, d_out, &mut g);
    g
}

/// As [`backward`], overwriting a preallocated gradient buffer.
pub(crate) fn backward_into(
    arch: &Architecture,
    p: &Params,
    cache: &Cache,
    d_out: &[f64],
    g: &mut Params,
) {
    let batch = cache.batch;
    for l in g.layers_mut() {
        l.w.fill(0.0);
        l.b.fill(0.0);
    }
    let [conv, h1, h2, h3] = &cache.acts;

    dense_grads(&mut g.dense[3], d_out, h3, batch);
    let d3 = dense_back_input(&p.dense[3], d_out, h3, batch);
    dense_grads(&mut g.dense[2], &d3, h2, batch);
    let d2 = dense_back_input(&p.dense[2], &d3, h2, batch);
    dense_grads(&mut g.dense[1], &d2, h1, batch);
    let d1 = dense_back_input(&p.dense[1], &d2, h1, batch);
    dense_grads(&mut g.dense[0], &d1, conv, batch);
    let d0 = dense_back_input(&p.dense[0], &d1, conv, batch);
    dense_grads(
        &mut g.conv,
        &d0,
        &cache.patches,
        batch * arch.conv_positions(),
    );
}

/// Fixed Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub(crate) struct Adam {
    cfg: AdamConfig,
    m: Params,
    v: Params,
    t: i32,
}

impl Adam {
    pub fn new(arch: &Architecture, cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            m: Params::zeros(arch),
            v: Params::zeros(arch),
            t: 0,
        }
    }

    pub fn step(&mut self, p: &mut Params, g: &Params) {
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let layers = p
            .layers_mut()
            .zip(g.layers())
            .zip(self.m.layers_mut().zip(self.v.layers_mut()));
        for ((pl, gl), (ml, vl)) in layers {
            let pairs = [
                (&mut pl.w, &gl.w, &mut ml.w, &mut vl.w),
                (&mut pl.b, &gl.b, &mut ml.b, &mut vl.b),
            ];
            for (pw, gw, mw, vw) in pairs {
                let it = pw
                    .iter_mut()
                    .zip(gw.iter())
                    .zip(mw.iter_mut().zip(vw.iter_mut()));
                for ((p, &g), (m, v)) in it {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}
