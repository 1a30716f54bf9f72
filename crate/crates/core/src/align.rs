//! Rigid alignment, the aligned reconstruction loss and evaluation metrics.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::meshio::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }
}

/// Result of a Kabsch fit. `degenerate` marks inputs whose centered
/// covariance has rank below two; the transform is then one of many
/// minimizers.
#[derive(Debug, Clone, Copy)]
pub struct Alignment {
    pub transform: RigidTransform,
    pub degenerate: bool,
}

fn centroid(p: &[Point3<f64>]) -> Vector3<f64> {
    p.iter().fold(Vector3::zeros(), |acc, q| acc + q.coords) / p.len() as f64
}

/// Best `R`, `t` (optionally allowing det(R) = −1) minimizing
/// `Σ‖R s_i + t − t_i‖²`.
fn fit(source: &[Point3<f64>], target: &[Point3<f64>], allow_reflection: bool) -> Alignment {
    let cs = centroid(source);
    let ct = centroid(target);
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (s.coords - cs) * (t.coords - ct).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let sv = svd.singular_values;

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let degenerate = sv[order[1]] <= 1e-12 * sv[order[0]] || sv[order[0]] == 0.0;

    let mut rotation = v_t.transpose() * u.transpose();
    if !allow_reflection && rotation.determinant() < 0.0 {
        // flip the axis of the smallest singular value
        let mut d = Matrix3::identity();
        d[(order[2], order[2])] = -1.0;
        rotation = v_t.transpose() * d * u.transpose();
    }
    let translation = ct - rotation * cs;
    Alignment {
        transform: RigidTransform {
            rotation,
            translation,
        },
        degenerate,
    }
}

/// Proper rigid transform (det R = +1) taking `source` onto `target`,
/// row i corresponding to row i.
pub fn kabsch(source: &[Point3<f64>], target: &[Point3<f64>]) -> Result<Alignment> {
    if source.len() != target.len() {
        return Err(Error::dims(format!(
            "{} source points vs {} target points",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::InvalidArgument(
            "alignment needs at least three points".into(),
        ));
    }
    Ok(fit(source, target, false))
}

fn mean_sq_residual(t: &RigidTransform, source: &[Point3<f64>], target: &[Point3<f64>]) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(s, g)| (t.apply(s) - g).norm_squared())
        .sum::<f64>()
        / source.len() as f64
}

/// Mean squared residual of `recon` after aligning it onto `gt`. The
/// alignment is fitted recon → gt, so the loss is not symmetric in its
/// arguments.
pub fn recon_loss(gt: &[Point3<f64>], recon: &[Point3<f64>]) -> Result<f64> {
    let al = kabsch(recon, gt)?;
    Ok(mean_sq_residual(&al.transform, recon, gt))
}

/// Root mean squared distance after the best orthogonal (reflections
/// allowed) transform plus translation.
pub fn procrustes_rmse(source: &[Point3<f64>], target: &[Point3<f64>]) -> f64 {
    assert_eq!(source.len(), target.len());
    let al = fit(source, target, true);
    mean_sq_residual(&al.transform, source, target).sqrt()
}

/// The three reconstruction metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub d_r: f64,
    pub d_v: f64,
    pub d_e: f64,
}

pub fn metric_dr(gt: &TriMesh, recon: &[Point3<f64>]) -> Result<f64> {
    if recon.len() != gt.n_vertices() {
        return Err(Error::ConnectivityMismatch);
    }
    recon_loss(gt.vertices(), recon)
}

fn check_connectivity(gt: &TriMesh, recon: &TriMesh) -> Result<()> {
    if gt.faces() != recon.faces() || gt.n_vertices() != recon.n_vertices() {
        return Err(Error::ConnectivityMismatch);
    }
    Ok(())
}

/// Relative volume error `|V_gt − V_recon| / |V_gt|`.
pub fn metric_dv(gt: &TriMesh, recon: &TriMesh) -> Result<f64> {
    check_connectivity(gt, recon)?;
    Ok(volume_error(gt, recon.vertices()))
}

/// Mean relative edge-length error over the edges of `gt`.
pub fn metric_de(gt: &TriMesh, recon: &TriMesh) -> Result<f64> {
    check_connectivity(gt, recon)?;
    Ok(edge_error(gt, recon.vertices()))
}

fn volume_error(gt: &TriMesh, recon: &[Point3<f64>]) -> f64 {
    let v_gt = gt.volume();
    let v_rec = signed_volume(gt.faces(), recon);
    (v_gt - v_rec).abs() / v_gt.abs()
}

/// Signed volume of `p` under the connectivity `faces`.
pub fn signed_volume(faces: &[[usize; 3]], p: &[Point3<f64>]) -> f64 {
    faces
        .iter()
        .map(|&[a, b, c]| p[a].coords.dot(&p[b].coords.cross(&p[c].coords)))
        .sum::<f64>()
        / 6.0
}

fn edge_error(gt: &TriMesh, recon: &[Point3<f64>]) -> f64 {
    let lengths = gt.edge_lengths();
    let total: f64 = lengths
        .iter()
        .map(|(&(i, j), &l)| ((recon[i] - recon[j]).norm() - l).abs() / l)
        .sum();
    total / lengths.len() as f64
}

/// All three metrics for raw reconstructed positions sharing `gt`'s
/// connectivity. Degenerate reconstructed faces are allowed here.
pub fn evaluate(gt: &TriMesh, recon: &[Point3<f64>]) -> Result<Metrics> {
    let d_r = metric_dr(gt, recon)?;
    Ok(Metrics {
        d_r,
        d_v: volume_error(gt, recon),
        d_e: edge_error(gt, recon),
    })
}
