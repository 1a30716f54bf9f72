//! Synthetic training family: an icosphere template deformed by per-axis
//! scaling and a y-dependent bend about the x axis.

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainingSample;
use crate::error::{Error, Result};
use crate::fmap::{fmap_from_p2p, PointToPointMap};
use crate::meshio::TriMesh;
use crate::shapediff::{BaseOperators, ShapeDifference, DEFAULT_BASE_ID};
use crate::shapes;
use crate::spectral::eigenbasis;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFamilyConfig {
    /// Icosphere subdivision level of the template.
    pub template_level: u32,
    /// Range of each axis scale factor.
    pub axis_scales: (f64, f64),
    /// Range of the bend angle (radians per unit of template y).
    pub bend_angle: (f64, f64),
    pub sample_count: usize,
    pub seed: u64,
    /// Basis size on the base shape.
    pub k0: usize,
}

impl Default for SyntheticFamilyConfig {
    fn default() -> Self {
        SyntheticFamilyConfig {
            template_level: 3,
            axis_scales: (0.6, 1.6),
            bend_angle: (-std::f64::consts::FRAC_PI_3, std::f64::consts::FRAC_PI_3),
            sample_count: 500,
            seed: 0,
            k0: 60,
        }
    }
}

impl SyntheticFamilyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(self.axis_scales) || !ok(self.bend_angle) {
            return Err(Error::InvalidArgument("empty or non-finite range".into()));
        }
        if self.axis_scales.0 <= 0.0 {
            return Err(Error::InvalidArgument(
                "axis scales must be positive".into(),
            ));
        }
        if self.sample_count == 0 {
            return Err(Error::InvalidArgument(
                "sample_count must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The undeformed template mesh.
    pub fn template(&self) -> TriMesh {
        shapes::icosphere(self.template_level, 1.0)
    }
}

/// Targets with at most this many vertices get the full basis.
pub const FULL_BASIS_LIMIT: usize = 3000;
pub const LARGE_TARGET_BASIS: usize = 300;

/// Base-shape data shared by every sample of a family.
#[derive(Debug, Clone)]
pub struct FamilyBase {
    pub template: TriMesh,
    pub operators: BaseOperators,
}

impl FamilyBase {
    pub fn new(template: TriMesh, k0: usize, base_id: &str) -> Result<Self> {
        let basis = eigenbasis(&template, k0)?;
        let operators = BaseOperators::new(&template, basis, base_id)?;
        Ok(FamilyBase {
            template,
            operators,
        })
    }
}

/// Area, conformal and extrinsic differences of `mesh` (same connectivity
/// as the template) through the identity correspondence.
pub fn channels_for(base: &FamilyBase, mesh: &TriMesh) -> Result<Vec<ShapeDifference>> {
    if mesh.faces() != base.template.faces() {
        return Err(Error::ConnectivityMismatch);
    }
    let n = mesh.n_vertices();
    let k = if n <= FULL_BASIS_LIMIT {
        n
    } else {
        LARGE_TARGET_BASIS
    };
    let tb = eigenbasis(mesh, k)?;
    let c = fmap_from_p2p(&base.operators.basis, &tb, &PointToPointMap::identity(n))?;
    Ok(base.operators.differences(mesh, &tb, &c)?.to_vec())
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// Scales each axis, then rotates every point about the x axis by
/// `bend · y` (template y).
pub fn deform(template: &TriMesh, scales: [f64; 3], bend: f64) -> Result<TriMesh> {
    template.map_vertices(|p| {
        let (x, y, z) = (p.x * scales[0], p.y * scales[1], p.z * scales[2]);
        let (s, c) = (bend * p.y).sin_cos();
        Point3::new(x, c * y - s * z, s * y + c * z)
    })
}

/// Deterministic family of deformed templates with their difference
/// channels. Sample `i` draws its parameters from its own random stream, so
/// samples do not depend on `sample_count`.
pub fn generate_family(cfg: &SyntheticFamilyConfig) -> Result<Vec<(TriMesh, TrainingSample)>> {
    cfg.validate()?;
    let base = FamilyBase::new(cfg.template(), cfg.k0, DEFAULT_BASE_ID)?;
    (0..cfg.sample_count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let scales = [
                draw(&mut rng, cfg.axis_scales),
                draw(&mut rng, cfg.axis_scales),
                draw(&mut rng, cfg.axis_scales),
            ];
            let bend = draw(&mut rng, cfg.bend_angle);
            let mesh = deform(&base.template, scales, bend)?;
            let channels = channels_for(&base, &mesh)?;
            let sample = TrainingSample::new(channels, mesh.vertices().to_vec())?;
            Ok((mesh, sample))
        })
        .collect()
}
