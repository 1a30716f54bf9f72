//! Extrinsic inner products and coordinate recovery from the Gram operator.
//!
//! `G = Φᵀ A X Xᵀ A Φ` has rank at most three and determines the projection
//! of the coordinate functions onto `span(Φ)` up to an orthogonal 3×3
//! transform: with `G = U Σ Uᵀ` (top three eigenpairs), `Φ U √Σ` is that
//! projection. At full basis the recovery is exact.
//!
//! The complete-graph form `E^D` weighs squared vertex distances by the two
//! vertex areas and is used for the extrinsic shape difference.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg;
use crate::meshio::TriMesh;
use crate::spectral::SpectralBasis;

/// Tiny negative eigenvalues of G above `-PSD_REPAIR_TOL · σ_1` are clamped.
pub const PSD_REPAIR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GramOperator {
    pub matrix: Mat<f64>,
}

impl GramOperator {
    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Dense `n × n` complete-graph Laplacian of area-weighted squared distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrinsicInner {
    pub matrix: Mat<f64>,
}

pub fn gram_operator(mesh: &TriMesh, basis: &SpectralBasis) -> Result<GramOperator> {
    if mesh.n_vertices() != basis.n() {
        return Err(Error::dims(format!(
            "mesh has {} vertices, basis has {}",
            mesh.n_vertices(),
            basis.n()
        )));
    }
    let f = basis.phi_t_mass() * mesh.coords();
    let g = &f * f.transpose();
    Ok(GramOperator {
        matrix: linalg::symmetrize(g.as_ref()),
    })
}

pub fn euclidean_inner(mesh: &TriMesh) -> Result<ExtrinsicInner> {
    let a = mesh.vertex_areas()?;
    let v = mesh.vertices();
    let n = v.len();
    let mut m = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let e = (v[i] - v[j]).norm_squared() * a[i] * a[j];
            m[(i, j)] = -e;
            m[(j, i)] = -e;
        }
    }
    // fixed left-to-right summation per row
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s -= m[(i, j)];
            }
        }
        m[(i, i)] = s;
    }
    Ok(ExtrinsicInner { matrix: m })
}

/// `Φᵀ E^D Φ`, formed as `(Φᵀ E^D) Φ`.
pub fn projected_inner(mesh: &TriMesh, basis: &SpectralBasis) -> Result<Mat<f64>> {
    if mesh.n_vertices() != basis.n() {
        return Err(Error::dims(format!(
            "mesh has {} vertices, basis has {}",
            mesh.n_vertices(),
            basis.n()
        )));
    }
    let e = euclidean_inner(mesh)?;
    let left = basis.phi().transpose() * &e.matrix;
    let p = left * basis.phi();
    Ok(linalg::symmetrize(p.as_ref()))
}

/// Coordinates `Φ U₃ √Σ₃` recovered from the Gram operator (n × 3).
pub fn recover_from_gram(g: &GramOperator, basis: &SpectralBasis) -> Result<Mat<f64>> {
    recover_from_matrix(g.matrix.as_ref(), basis)
}

fn recover_from_matrix(g: MatRef<'_, f64>, basis: &SpectralBasis) -> Result<Mat<f64>> {
    let k = basis.k();
    if g.nrows() != k || g.ncols() != k {
        return Err(Error::dims(format!(
            "Gram operator is {}×{}, basis has {k} functions",
            g.nrows(),
            g.ncols()
        )));
    }
    let (vals, vecs) = linalg::sym_eigen(g)?;
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -PSD_REPAIR_TOL * top {
        return Err(Error::NegativeSpectrum { min, scale: top });
    }
    // eigenvalues ascending: the top three sit at the end
    let r = k.min(3);
    let mut factor = Mat::<f64>::zeros(k, 3);
    for c in 0..r {
        let idx = k - 1 - c;
        let s = vals[idx].max(0.0).sqrt();
        for i in 0..k {
            factor[(i, c)] = vecs[(i, idx)] * s;
        }
    }
    Ok(basis.phi() * factor)
}
