//! Command-line front end. Every command prints one summary line
//! `OK <command> <metric>` on success.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Point3;

use crate::algebra::{self, InterpolationScheme, DEFAULT_PINV_TOL};
use crate::align;
use crate::decoder::{
    self, ChannelSet, DecoderModel, ManifestEntry, SyntheticFamilyConfig, TrainOptions,
};
use crate::error::{Error, Result};
use crate::extrinsic;
use crate::fmap::{self, FunctionalMap, PointToPointMap};
use crate::linalg;
use crate::meshio::{self, LoadOptions, MeshFormat, TriMesh};
use crate::shapediff::{self, BaseOperators, DiffKind, ShapeDifference};
use crate::spectral;

/// Shared pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub base_mesh: Option<PathBuf>,
    pub k0: usize,
    /// Largest target basis; `None` means full basis up to 3000 vertices
    /// and 300 functions above that.
    pub target_basis_cap: Option<usize>,
    pub pinv_tol: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            base_mesh: None,
            k0: 60,
            target_basis_cap: None,
            pinv_tol: DEFAULT_PINV_TOL,
            output_dir: PathBuf::from("."),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k0 == 0 {
            return Err(Error::InvalidArgument("k0 must be at least 1".into()));
        }
        if let Some(cap) = self.target_basis_cap {
            if cap < self.k0 {
                return Err(Error::InvalidArgument(format!(
                    "target basis cap {cap} is below k0 = {}",
                    self.k0
                )));
            }
        }
        Ok(())
    }

    /// Basis size used on a target with `n` vertices.
    pub fn target_basis_size(&self, n: usize) -> usize {
        let cap = self
            .target_basis_cap
            .unwrap_or(if n <= 3000 { n } else { 300 });
        cap.min(n)
    }
}

#[derive(Debug, Parser)]
#[command(name = "opnet", version, about = "Spectral shape differences toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Laplace–Beltrami eigenbasis of a mesh.
    Basis(BasisArgs),
    /// Shape differences of a target relative to a base.
    Diff(DiffArgs),
    /// Recover a mesh embedding from its Gram operator.
    Recover(RecoverArgs),
    /// Interpolate between two sets of differences and decode each step.
    Interp(InterpArgs),
    /// Decode the analogy D_C D_A⁺ D_B.
    Analogy(AnalogyArgs),
    /// Train a decoder on a dataset manifest.
    Train(TrainArgs),
    /// Reconstruction metrics d_R, d_V, d_E.
    Eval(EvalArgs),
    /// Write a synthetic training family and its manifest.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct BasisArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long, default_value_t = 60)]
    pub k0: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Point-to-point map: one base vertex index per target vertex.
    #[arg(long, conflicts_with = "fmap")]
    pub map: Option<PathBuf>,
    /// Functional map file (target basis × k0).
    #[arg(long)]
    pub fmap: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    pub k0: usize,
    #[arg(long, default_value = "a,c,e")]
    pub kinds: ChannelSet,
    /// Largest target basis (default: full up to 3000 vertices, else 300).
    #[arg(long)]
    pub target_cap: Option<usize>,
    /// Identifier written into the SDIFF headers (default: base file stem).
    #[arg(long)]
    pub base_id: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub target: PathBuf,
    /// Basis size (default: full basis).
    #[arg(long)]
    pub k0: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpArgs {
    /// SDIFF files of the start shape (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub d0: Vec<PathBuf>,
    /// SDIFF files of the end shape (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub d1: Vec<PathBuf>,
    /// Number of samples including both endpoints.
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long, default_value = "mul")]
    pub scheme: InterpolationScheme,
    #[arg(long)]
    pub model: PathBuf,
    /// Mesh supplying connectivity when the model stores none.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalogyArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub da: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub db: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dc: Vec<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Output OBJ.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "a,c,e")]
    pub kinds: ChannelSet,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Output loss CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub recon: PathBuf,
    /// Output CSV (printed to the summary line only when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 3)]
    pub level: u32,
    #[arg(long, default_value_t = 60)]
    pub k0: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one parsed command and returns its summary line.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Basis(a) => cmd_basis(&a),
        Command::Diff(a) => cmd_diff(&a),
        Command::Recover(a) => cmd_recover(&a),
        Command::Interp(a) => cmd_interp(&a),
        Command::Analogy(a) => cmd_analogy(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Generate(a) => cmd_generate(&a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    run(cli)
}

fn ok(cmd: &str, metric: impl std::fmt::Display) -> String {
    format!("OK {cmd} {metric}")
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn file_stem(path: &Path) -> String {
    let s: String = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    if s.is_empty() {
        shapediff::DEFAULT_BASE_ID.to_string()
    } else {
        s
    }
}

fn load_any_faces(path: &Path) -> Result<TriMesh> {
    let fmt = MeshFormat::from_path(path)?;
    meshio::load_mesh_with(
        path,
        fmt,
        &LoadOptions {
            degenerate_area: -1.0,
        },
    )
}

pub fn cmd_basis(a: &BasisArgs) -> Result<String> {
    let mesh = meshio::load_mesh_auto(&a.base)?;
    let basis = spectral::eigenbasis(&mesh, a.k0)?;
    spectral::save_basis(&basis, &a.out)?;
    Ok(ok("basis", basis.orthonormality_error()))
}

pub fn cmd_diff(a: &DiffArgs) -> Result<String> {
    let cfg = PipelineConfig {
        k0: a.k0,
        target_basis_cap: a.target_cap,
        ..Default::default()
    };
    cfg.validate()?;
    let base = meshio::load_mesh_auto(&a.base)?;
    let target = meshio::load_mesh_auto(&a.target)?;
    let base_id = a.base_id.clone().unwrap_or_else(|| file_stem(&a.base));
    let b0 = spectral::eigenbasis(&base, a.k0)?;

    let (tb, c) = if let Some(p) = &a.fmap {
        let c = fmap::load_fmap(p)?;
        if c.source_dim() != a.k0 {
            return Err(Error::dims(format!(
                "functional map has {} columns, k0 = {}",
                c.source_dim(),
                a.k0
            )));
        }
        let tb = spectral::eigenbasis(&target, c.target_dim())?;
        (tb, c)
    } else {
        let map = match &a.map {
            Some(p) => fmap::load_p2p(p, base.n_vertices())?,
            None if base.n_vertices() == target.n_vertices() => {
                PointToPointMap::identity(target.n_vertices())
            }
            None => {
                return Err(Error::InvalidArgument(
                    "meshes differ in size; pass --map or --fmap".into(),
                ))
            }
        };
        let tb = spectral::eigenbasis(&target, cfg.target_basis_size(target.n_vertices()))?;
        let c = fmap::fmap_from_p2p(&b0, &tb, &map)?;
        (tb, c)
    };

    let diffs = differences(&base, b0, &base_id, &target, &tb, &c, &a.kinds)?;
    create_dir(&a.out)?;
    let stem = file_stem(&a.target);
    for d in &diffs {
        let name = format!("{stem}_{}.sdiff", d.kind.to_string().to_lowercase());
        shapediff::save_sdiff(d, a.out.join(name))?;
    }
    let first = &diffs[0];
    let metric = if first.kind == DiffKind::Area {
        linalg::frobenius_diff(first.matrix(), linalg::identity(first.k()).as_ref())
    } else {
        linalg::frobenius(first.matrix())
    };
    Ok(ok("diff", metric))
}

fn differences(
    base: &TriMesh,
    b0: spectral::SpectralBasis,
    base_id: &str,
    target: &TriMesh,
    tb: &spectral::SpectralBasis,
    c: &FunctionalMap,
    kinds: &ChannelSet,
) -> Result<Vec<ShapeDifference>> {
    let mut out = Vec::new();
    if kinds.kinds().contains(&DiffKind::Extrinsic) {
        let ops = BaseOperators::new(base, b0, base_id)?;
        let all = ops.differences(target, tb, c)?;
        out.extend(all.into_iter().filter(|d| kinds.kinds().contains(&d.kind)));
    } else {
        for &k in kinds.kinds() {
            let d = match k {
                DiffKind::Area => shapediff::area_difference(c)?,
                _ => shapediff::conformal_difference(&b0.eigenvalues, &tb.eigenvalues, c)?,
            };
            out.push(d.with_base_id(base_id)?);
        }
    }
    Ok(out)
}

fn points(m: faer::MatRef<'_, f64>) -> Vec<Point3<f64>> {
    (0..m.nrows())
        .map(|i| Point3::new(m[(i, 0)], m[(i, 1)], m[(i, 2)]))
        .collect()
}

pub fn cmd_recover(a: &RecoverArgs) -> Result<String> {
    let mesh = meshio::load_mesh_auto(&a.target)?;
    let k = a.k0.unwrap_or(mesh.n_vertices());
    let basis = spectral::eigenbasis(&mesh, k)?;
    let g = extrinsic::gram_operator(&mesh, &basis)?;
    let mut x = points(extrinsic::recover_from_gram(&g, &basis)?.as_ref());
    if align::signed_volume(mesh.faces(), &x) * mesh.volume() < 0.0 {
        x.iter_mut().for_each(|p| p.x = -p.x);
    }
    meshio::save_points_obj(&x, mesh.faces(), &a.out)?;
    let rmse = align::procrustes_rmse(&x, mesh.vertices());
    Ok(ok("recover", rmse / mesh.bbox_diagonal()))
}

fn load_channels(paths: &[PathBuf]) -> Result<Vec<ShapeDifference>> {
    paths.iter().map(shapediff::load_sdiff).collect()
}

fn pick(channels: &[ShapeDifference], kind: DiffKind) -> Result<&ShapeDifference> {
    channels
        .iter()
        .find(|d| d.kind == kind)
        .ok_or_else(|| Error::ShapeMismatch(format!("no {kind} difference given")))
}

fn model_faces(model: &DecoderModel, base: Option<&PathBuf>) -> Result<Vec<[usize; 3]>> {
    if let Some(p) = base {
        let m = load_any_faces(p)?;
        if m.n_vertices() != model.n_vertices() {
            return Err(Error::ConnectivityMismatch);
        }
        return Ok(m.faces().to_vec());
    }
    Ok(model.faces.clone())
}

/// `step,t,distance` rows; distance is the aligned RMSE to the previous
/// step (empty on the first row).
pub fn cmd_interp(a: &InterpArgs) -> Result<String> {
    if a.steps < 2 {
        return Err(Error::InvalidArgument("steps must be at least 2".into()));
    }
    let model = decoder::load_model(&a.model)?;
    let faces = model_faces(&model, a.base.as_ref())?;
    let d0 = load_channels(&a.d0)?;
    let d1 = load_channels(&a.d1)?;
    create_dir(&a.out)?;

    let mut csv = String::from("step,t,distance\n");
    let mut prev: Option<Vec<Point3<f64>>> = None;
    let mut worst = 0.0f64;
    for i in 0..a.steps {
        let t = i as f64 / (a.steps - 1) as f64;
        let mut chans = Vec::new();
        for &k in model.channels.kinds() {
            chans.push(algebra::interpolate(
                pick(&d0, k)?,
                pick(&d1, k)?,
                t,
                a.scheme,
            )?);
        }
        let x = decoder::reconstruct(&model, &chans)?;
        meshio::save_points_obj(&x, &faces, a.out.join(format!("interp_{i:03}.obj")))?;
        match &prev {
            Some(p) => {
                let d = align::recon_loss(p, &x)?.sqrt();
                worst = worst.max(d);
                let _ = writeln!(csv, "{i},{t},{d}");
            }
            None => {
                let _ = writeln!(csv, "{i},{t},");
            }
        }
        prev = Some(x);
    }
    write_file(&a.out.join("distances.csv"), &csv)?;
    Ok(ok("interp", worst))
}

pub fn cmd_analogy(a: &AnalogyArgs) -> Result<String> {
    let model = decoder::load_model(&a.model)?;
    let faces = model_faces(&model, a.base.as_ref())?;
    let (da, db, dc) = (
        load_channels(&a.da)?,
        load_channels(&a.db)?,
        load_channels(&a.dc)?,
    );
    let mut chans = Vec::new();
    for &k in model.channels.kinds() {
        chans.push(algebra::analogy_difference(
            pick(&da, k)?,
            pick(&db, k)?,
            pick(&dc, k)?,
        )?);
    }
    let x = decoder::reconstruct(&model, &chans)?;
    meshio::save_points_obj(&x, &faces, &a.out)?;
    Ok(ok("analogy", linalg::frobenius(chans[0].matrix())))
}

/// `epoch,loss` rows.
pub fn cmd_train(a: &TrainArgs) -> Result<String> {
    let data = decoder::load_manifest(&a.manifest)?;
    let faces = data[0].0.faces().to_vec();
    let samples: Vec<_> = data.into_iter().map(|(_, s)| s).collect();
    let mut model = DecoderModel::for_dataset(a.kinds.clone(), a.seed, &samples)?;
    model.faces = faces;
    let rep = decoder::train(
        &mut model,
        &samples,
        &TrainOptions {
            epochs: a.epochs,
            lr: a.lr,
            batch_size: a.batch,
        },
    )?;
    decoder::save_model(&model, &a.model)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in rep.epoch_loss.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l}");
    }
    write_file(&a.out, &csv)?;
    let last = rep.epoch_loss.last().copied().unwrap_or(f64::NAN);
    Ok(ok("train", last))
}

/// `d_R,d_V,d_E` header and one row. Values at round-off level relative to
/// the squared coordinate scale are written as 0.
pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let gt = meshio::load_mesh_auto(&a.gt)?;
    let recon = load_any_faces(&a.recon)?;
    if recon.faces() != gt.faces() || recon.n_vertices() != gt.n_vertices() {
        return Err(Error::ConnectivityMismatch);
    }
    let m = align::evaluate(&gt, recon.vertices())?;
    let scale = gt.bbox_diagonal().powi(2);
    let d_r = if m.d_r <= 1e-24 * scale { 0.0 } else { m.d_r };
    let row = format!("{},{},{}", d_r, m.d_v, m.d_e);
    if let Some(out) = &a.out {
        write_file(out, &format!("d_R,d_V,d_E\n{row}\n"))?;
    }
    Ok(ok("eval", row))
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<String> {
    let cfg = SyntheticFamilyConfig {
        template_level: a.level,
        sample_count: a.samples,
        seed: a.seed,
        k0: a.k0,
        ..Default::default()
    };
    let family = decoder::generate_family(&cfg)?;
    create_dir(&a.out)?;
    meshio::save_mesh(&cfg.template(), a.out.join("template.obj"), MeshFormat::Obj)?;
    let mut entries = Vec::with_capacity(family.len());
    for (i, (mesh, sample)) in family.iter().enumerate() {
        let mesh_name = PathBuf::from(format!("shape_{i:04}.obj"));
        meshio::save_mesh(mesh, a.out.join(&mesh_name), MeshFormat::Obj)?;
        let mut names = Vec::new();
        for d in &sample.channels {
            let n = PathBuf::from(format!(
                "shape_{i:04}_{}.sdiff",
                d.kind.to_string().to_lowercase()
            ));
            shapediff::save_sdiff(d, a.out.join(&n))?;
            names.push(n);
        }
        let sdiffs: [PathBuf; 3] = names
            .try_into()
            .map_err(|_| Error::ShapeMismatch("expected three channels".into()))?;
        entries.push(ManifestEntry {
            mesh: mesh_name,
            sdiffs,
        });
    }
    decoder::save_manifest(&entries, a.out.join("manifest.txt"))?;
    Ok(ok("generate", family.len()))
}
