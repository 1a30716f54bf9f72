//! Trainable decoder from shape-difference channels to vertex coordinates,
//! a nearest-neighbour retrieval baseline, and a synthetic training family.
//!
//! Input channels are stacked in the fixed order Area, Conformal, Extrinsic
//! (absent kinds are dropped), standardized per entry, passed through one
//! strided convolution and a dense encoder to a latent code, then decoded by
//! three dense layers into `3·n` coordinates.
//!
//! Training minimizes the mean squared residual after rigidly aligning the
//! output onto the ground truth. The alignment is recomputed every step but
//! held constant when differentiating.

mod io;
mod net;
mod synth;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Point3, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align;
use crate::error::{Error, Result};
use crate::linalg;
use crate::shapediff::{DiffKind, ShapeDifference};

pub use io::{
    format_model, load_manifest, load_model, parse_model, save_manifest, save_model, ManifestEntry,
    MODEL_HEADER,
};
pub use net::{AdamConfig, Architecture, Layer, Params};
pub use synth::{channels_for, deform, generate_family, FamilyBase, SyntheticFamilyConfig};

/// A nonempty subset of difference kinds, kept in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelSet(Vec<DiffKind>);

impl ChannelSet {
    pub fn new(kinds: &[DiffKind]) -> Result<Self> {
        let v: Vec<DiffKind> = DiffKind::ALL
            .into_iter()
            .filter(|k| kinds.contains(k))
            .collect();
        if v.is_empty() {
            return Err(Error::InvalidArgument("channel set is empty".into()));
        }
        Ok(ChannelSet(v))
    }

    pub fn all() -> Self {
        ChannelSet(DiffKind::ALL.to_vec())
    }

    pub fn kinds(&self) -> &[DiffKind] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|k| k.letter().to_string()).collect();
        f.write_str(&s.join(","))
    }
}

/// Accepts `a,c,e`, `ace`, `A+E` and full kind names separated by `,` or `+`.
impl FromStr for ChannelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut kinds = Vec::new();
        for part in s.split([',', '+']).map(str::trim).filter(|p| !p.is_empty()) {
            if part.len() > 1 && part.chars().all(|c| "aceACE".contains(c)) {
                for c in part.chars() {
                    kinds.push(c.to_string().parse()?);
                }
            } else {
                kinds.push(part.parse()?);
            }
        }
        ChannelSet::new(&kinds)
    }
}

/// Difference channels plus ground-truth coordinates of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub channels: Vec<ShapeDifference>,
    pub gt_coords: Vec<Point3<f64>>,
}

impl TrainingSample {
    pub fn new(channels: Vec<ShapeDifference>, gt_coords: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(first) = channels.first() {
            for c in &channels[1..] {
                if c.k() != first.k() || c.base_id != first.base_id {
                    return Err(Error::ShapeMismatch(
                        "channels disagree on size or base shape".into(),
                    ));
                }
            }
        }
        Ok(TrainingSample {
            channels,
            gt_coords,
        })
    }

    pub fn channel(&self, kind: DiffKind) -> Option<&ShapeDifference> {
        find_channel(&self.channels, kind)
    }
}

fn find_channel(channels: &[ShapeDifference], kind: DiffKind) -> Option<&ShapeDifference> {
    channels.iter().find(|c| c.kind == kind)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub channels: ChannelSet,
    pub k0: usize,
    pub n_vertices: usize,
    pub seed: u64,
    /// Start the output layer at zero (the network then outputs zeros).
    pub zero_output: bool,
}

/// Network weights together with everything needed to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    pub arch: Architecture,
    pub channels: ChannelSet,
    pub base_id: String,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Per-entry input mean and standard deviation, `input_len` each.
    pub channel_mean: Vec<f64>,
    pub channel_std: Vec<f64>,
    pub params: Params,
    /// Template connectivity for writing meshes; may be empty.
    pub faces: Vec<[usize; 3]>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl DecoderModel {
    /// Freshly initialized model with identity standardization.
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let arch = Architecture::standard(cfg.k0, cfg.channels.len(), cfg.n_vertices);
        Self::with_architecture(arch, cfg.channels.clone(), cfg.seed, cfg.zero_output)
    }

    pub fn with_architecture(
        arch: Architecture,
        channels: ChannelSet,
        seed: u64,
        zero_output: bool,
    ) -> Result<Self> {
        arch.validate().map_err(Error::InvalidArgument)?;
        if arch.n_channels != channels.len() {
            return Err(Error::InvalidArgument(
                "architecture and channel set disagree".into(),
            ));
        }
        Ok(DecoderModel {
            params: Params::init(&arch, seed, zero_output),
            channel_mean: vec![0.0; arch.input_len()],
            channel_std: vec![1.0; arch.input_len()],
            arch,
            channels,
            base_id: crate::shapediff::DEFAULT_BASE_ID.to_string(),
            seed,
            adam: AdamConfig::default(),
            faces: Vec::new(),
        })
    }

    /// New model sized for `dataset`, with input statistics fitted to it.
    pub fn for_dataset(
        channels: ChannelSet,
        seed: u64,
        dataset: &[TrainingSample],
    ) -> Result<Self> {
        let first = dataset.first().ok_or(Error::EmptyDataset)?;
        let k0 = first
            .channels
            .first()
            .ok_or_else(|| Error::ShapeMismatch("sample has no channels".into()))?
            .k();
        let mut m = DecoderModel::new(&ModelConfig {
            channels,
            k0,
            n_vertices: first.gt_coords.len(),
            seed,
            zero_output: false,
        })?;
        m.base_id = first.channels[0].base_id.clone();
        m.fit_standardization(dataset)?;
        Ok(m)
    }

    /// Sets the per-entry mean/std from `dataset`.
    pub fn fit_standardization(&mut self, dataset: &[TrainingSample]) -> Result<()> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let len = self.arch.input_len();
        let mut mean = vec![0.0; len];
        let mut sq = vec![0.0; len];
        for s in dataset {
            let x = self.raw_input(&s.channels)?;
            for i in 0..len {
                mean[i] += x[i];
            }
        }
        let n = dataset.len() as f64;
        for m in &mut mean {
            *m /= n;
        }
        for s in dataset {
            let x = self.raw_input(&s.channels)?;
            for i in 0..len {
                sq[i] += (x[i] - mean[i]).powi(2);
            }
        }
        self.channel_std = sq.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        self.channel_mean = mean;
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.arch.n_vertices
    }

    fn raw_input(&self, channels: &[ShapeDifference]) -> Result<Vec<f64>> {
        let k0 = self.arch.k0;
        let mut x = Vec::with_capacity(self.arch.input_len());
        for &kind in self.channels.kinds() {
            let d = find_channel(channels, kind)
                .ok_or_else(|| Error::ShapeMismatch(format!("missing {kind} channel")))?;
            if d.k() != k0 {
                return Err(Error::ShapeMismatch(format!(
                    "{kind} channel is {}×{}, model expects {k0}×{k0}",
                    d.k(),
                    d.k()
                )));
            }
            for r in 0..k0 {
                for c in 0..k0 {
                    x.push(d.matrix[(r, c)]);
                }
            }
        }
        Ok(x)
    }

    /// Selected channels, stacked and standardized.
    pub fn input_vector(&self, channels: &[ShapeDifference]) -> Result<Vec<f64>> {
        let mut x = self.raw_input(channels)?;
        for ((v, m), s) in x.iter_mut().zip(&self.channel_mean).zip(&self.channel_std) {
            *v = (*v - m) / s;
        }
        Ok(x)
    }

    fn outputs_to_points(&self, out: &[f64]) -> Vec<Point3<f64>> {
        out.chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect()
    }
}

/// Network output for one set of channels, `n × 3`.
pub fn forward(model: &DecoderModel, channels: &[ShapeDifference]) -> Result<faer::Mat<f64>> {
    let pts = reconstruct(model, channels)?;
    Ok(faer::Mat::from_fn(pts.len(), 3, |i, j| pts[i][j]))
}

/// Coordinates synthesized from (possibly interpolated or combined)
/// difference channels.
pub fn reconstruct(model: &DecoderModel, channels: &[ShapeDifference]) -> Result<Vec<Point3<f64>>> {
    let x = model.input_vector(channels)?;
    let (out, _) = net::forward(&model.arch, &model.params, &x, 1);
    Ok(model.outputs_to_points(&out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 200,
            lr: AdamConfig::default().lr,
            batch_size: 16,
        }
    }
}

/// Per-epoch mean of the batch losses, measured before each update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
}

/// Aligned loss of one output and its gradient with `(R, t)` frozen.
fn loss_and_grad(out: &[f64], gt: &[Point3<f64>], grad: &mut [f64]) -> Result<f64> {
    let pts: Vec<Point3<f64>> = out
        .chunks_exact(3)
        .map(|c| Point3::new(c[0], c[1], c[2]))
        .collect();
    let al = align::kabsch(&pts, gt)?.transform;
    let (loss, g) = frozen_loss(&al.rotation, &al.translation, &pts, gt);
    grad.copy_from_slice(&g);
    Ok(loss)
}

/// `mean ‖R x_i + t − g_i‖²` and its gradient in `x`.
fn frozen_loss(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    pts: &[Point3<f64>],
    gt: &[Point3<f64>],
) -> (f64, Vec<f64>) {
    let n = pts.len() as f64;
    let rt = r.transpose();
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(3 * pts.len());
    for (x, g) in pts.iter().zip(gt) {
        let res = r * x.coords + t - g.coords;
        loss += res.norm_squared();
        let d = rt * res * (2.0 / n);
        grad.extend_from_slice(&[d.x, d.y, d.z]);
    }
    (loss / n, grad)
}

fn check_sample(model: &DecoderModel, s: &TrainingSample) -> Result<()> {
    if s.gt_coords.len() != model.n_vertices() {
        return Err(Error::ShapeMismatch(format!(
            "sample has {} vertices, model outputs {}",
            s.gt_coords.len(),
            model.n_vertices()
        )));
    }
    Ok(())
}

/// Mini-batch Adam on the aligned reconstruction loss. The channel subset
/// is the model's own; `opts.lr` is recorded in the model.
pub fn train(
    model: &mut DecoderModel,
    dataset: &[TrainingSample],
    opts: &TrainOptions,
) -> Result<TrainReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if opts.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let inputs = dataset
        .iter()
        .map(|s| {
            check_sample(model, s)?;
            model.input_vector(&s.channels)
        })
        .collect::<Result<Vec<_>>>()?;

    model.adam.lr = opts.lr;
    let arch = model.arch;
    let ilen = arch.input_len();
    let olen = arch.output_len();
    let mut adam = net::Adam::new(&arch, model.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0x005e_ed0f_da7a);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut grads = Params::zeros(&arch);
    let mut history = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(opts.batch_size) {
            let b = chunk.len();
            let mut x = Vec::with_capacity(b * ilen);
            for &i in chunk {
                x.extend_from_slice(&inputs[i]);
            }
            let (out, cache) = net::forward(&arch, &model.params, &x, b);
            let mut d_out = vec![0.0; b * olen];
            let mut loss = 0.0;
            for (j, &i) in chunk.iter().enumerate() {
                let range = j * olen..(j + 1) * olen;
                loss += loss_and_grad(
                    &out[range.clone()],
                    &dataset[i].gt_coords,
                    &mut d_out[range],
                )?;
            }
            loss /= b as f64;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            for d in &mut d_out {
                *d /= b as f64;
            }
            net::backward_into(&arch, &model.params, &cache, &d_out, &mut grads);
            adam.step(&mut model.params, &grads);
            if !model.params.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        log::debug!("epoch {epoch}: loss {mean:.6e}");
        history.push(mean);
    }
    Ok(TrainReport {
        epoch_loss: history,
    })
}

/// Mean aligned reconstruction loss of the model over `dataset`.
pub fn dataset_loss(model: &DecoderModel, dataset: &[TrainingSample]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for s in dataset {
        check_sample(model, s)?;
        total += align::recon_loss(&s.gt_coords, &reconstruct(model, &s.channels)?)?;
    }
    Ok(total / dataset.len() as f64)
}

/// Analytic gradient of the frozen-alignment loss of one sample.
pub fn loss_gradient(model: &DecoderModel, sample: &TrainingSample) -> Result<(f64, Params)> {
    check_sample(model, sample)?;
    let x = model.input_vector(&sample.channels)?;
    let (out, cache) = net::forward(&model.arch, &model.params, &x, 1);
    let mut d_out = vec![0.0; out.len()];
    let loss = loss_and_grad(&out, &sample.gt_coords, &mut d_out)?;
    Ok((
        loss,
        net::backward(&model.arch, &model.params, &cache, &d_out),
    ))
}

/// Maximum relative deviation between the analytic gradient and central
/// differences with step `epsilon`, over `probes_per_layer` randomly chosen
/// weights and biases of every layer. The alignment is fixed at its value
/// for the unperturbed weights. Entries where both gradients are below
/// `1e-6 · max|∇|` are compared against that floor instead.
pub fn gradient_check(
    model: &DecoderModel,
    sample: &TrainingSample,
    epsilon: f64,
    probes_per_layer: usize,
    seed: u64,
) -> Result<f64> {
    let (_, grad) = loss_gradient(model, sample)?;
    let x = model.input_vector(&sample.channels)?;
    let (out, _) = net::forward(&model.arch, &model.params, &x, 1);
    let pts = model.outputs_to_points(&out);
    let al = align::kabsch(&pts, &sample.gt_coords)?.transform;

    let eval = |p: &Params| {
        let (o, _) = net::forward(&model.arch, p, &x, 1);
        frozen_loss(
            &al.rotation,
            &al.translation,
            &model.outputs_to_points(&o),
            &sample.gt_coords,
        )
        .0
    };

    let gmax = grad
        .layers()
        .flat_map(|l| l.w.iter().chain(&l.b))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-6 * gmax).max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::new();
    let mut offset = 0;
    for l in model.params.layers() {
        for (start, len) in [(offset, l.w.len()), (offset + l.w.len(), l.b.len())] {
            let mut idx: Vec<usize> = (start..start + len).collect();
            idx.shuffle(&mut rng);
            probes.extend(idx.into_iter().take(probes_per_layer));
        }
        offset += l.w.len() + l.b.len();
    }

    let mut p = model.params.clone();
    let mut worst = 0.0f64;
    for idx in probes {
        let w0 = p.get(idx);
        p.set(idx, w0 + epsilon);
        let up = eval(&p);
        p.set(idx, w0 - epsilon);
        let down = eval(&p);
        p.set(idx, w0);
        let fd = (up - down) / (2.0 * epsilon);
        let an = grad.get(idx);
        let dev = (an - fd).abs() / an.abs().max(fd.abs()).max(floor);
        worst = worst.max(dev);
    }
    Ok(worst)
}

/// Index of the training sample closest to `query` (sum over the query's
/// channels of Frobenius distances) and that distance. Ties go to the lowest
/// index.
pub fn nn_retrieve(query: &[ShapeDifference], dataset: &[TrainingSample]) -> Result<(usize, f64)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if query.is_empty() {
        return Err(Error::ShapeMismatch("query has no channels".into()));
    }
    let mut best = (0, f64::INFINITY);
    for (i, s) in dataset.iter().enumerate() {
        let mut d = 0.0;
        for q in query {
            let c = s
                .channel(q.kind)
                .ok_or_else(|| Error::ShapeMismatch(format!("sample {i} lacks {}", q.kind)))?;
            if c.k() != q.k() {
                return Err(Error::ShapeMismatch(format!(
                    "sample {i} {} channel is {}×{}, query is {}×{}",
                    q.kind,
                    c.k(),
                    c.k(),
                    q.k(),
                    q.k()
                )));
            }
            d += linalg::frobenius_diff(c.matrix(), q.matrix());
        }
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}
