//! Cotangent Laplacian, lumped mass and the truncated Laplace–Beltrami
//! eigenbasis.
//!
//! The generalized problem `W Φ = A Φ Λ` is reduced to the symmetric
//! problem `A^{-1/2} W A^{-1/2} Y = Y Λ` and solved densely; `Φ = A^{-1/2} Y`.
//! This is O(n³) and intended for meshes up to a few thousand vertices.

use std::path::Path;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, Tokens};
use crate::meshio::TriMesh;

/// Compressed-row symmetric sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            // stable sort keeps the summation order of duplicates
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseSym {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn mul_mat(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = Mat::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            for i in 0..self.n {
                out[(i, c)] = self.row(i).map(|(j, v)| v * x[(j, c)]).sum();
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LaplacianOptions {
    /// Replace negative cotangent weights by zero.
    pub clamp_negative: bool,
}

/// Edge weights `w_ij = ½ Σ cot(opposite angle)` as triplets `(i, j, w)`,
/// `i < j`, in face order.
fn cotan_weights(mesh: &TriMesh) -> Result<Vec<(usize, usize, f64)>> {
    let v = mesh.vertices();
    let mut out = Vec::with_capacity(3 * mesh.n_faces());
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let o = f[k];
            let i = f[(k + 1) % 3];
            let j = f[(k + 2) % 3];
            let e1 = v[i] - v[o];
            let e2 = v[j] - v[o];
            let cross = e1.cross(&e2).norm();
            let cot = e1.dot(&e2) / cross;
            if !cot.is_finite() {
                return Err(Error::NonFiniteCotangent { face: fi });
            }
            out.push((i.min(j), i.max(j), 0.5 * cot));
        }
    }
    Ok(out)
}

/// Cotangent stiffness matrix: `W_ij = −w_ij` off the diagonal and
/// `W_ii = Σ_j w_ij`, so that `W·1 = 0`.
pub fn cotan_stiffness(mesh: &TriMesh, opts: &LaplacianOptions) -> Result<SparseSym> {
    let n = mesh.n_vertices();
    let weights = cotan_weights(mesh)?;
    // merge the (up to two) contributions per edge before clamping
    let merged = SparseSym::from_triplets(n, &weights);
    let mut trip = Vec::with_capacity(2 * merged.nnz() + n);
    let mut diag = vec![0.0; n];
    for i in 0..n {
        for (j, w) in merged.row(i) {
            let w = if opts.clamp_negative { w.max(0.0) } else { w };
            trip.push((i, j, -w));
            trip.push((j, i, -w));
        }
    }
    let off = SparseSym::from_triplets(n, &trip);
    for (i, d) in diag.iter_mut().enumerate() {
        *d = -off.row(i).map(|(_, v)| v).sum::<f64>();
    }
    trip.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    Ok(SparseSym::from_triplets(n, &trip))
}

/// Mass, stiffness and the `k` lowest generalized eigenpairs of one mesh.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub mass: Vec<f64>,
    /// Absent when the basis was read back from a file.
    pub stiffness: Option<SparseSym>,
    pub eigenvalues: Vec<f64>,
    /// n × k, columns are A-orthonormal.
    pub eigenfunctions: Mat<f64>,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn phi(&self) -> MatRef<'_, f64> {
        self.eigenfunctions.as_ref()
    }

    /// `Φᵀ A` as a k × n matrix.
    pub fn phi_t_mass(&self) -> Mat<f64> {
        let phi = &self.eigenfunctions;
        Mat::from_fn(self.k(), self.n(), |r, c| phi[(c, r)] * self.mass[c])
    }

    /// Leading `k` columns of this basis.
    pub fn truncated(&self, k: usize) -> Result<SpectralBasis> {
        if k == 0 || k > self.k() {
            return Err(Error::KTooLarge { k, n: self.k() });
        }
        Ok(SpectralBasis {
            mass: self.mass.clone(),
            stiffness: self.stiffness.clone(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenfunctions: self.eigenfunctions.subcols(0, k).to_owned(),
        })
    }

    /// `ΦᵀAΦ − I` Frobenius norm.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.phi_t_mass() * &self.eigenfunctions;
        linalg::frobenius_diff(g.as_ref(), linalg::identity(self.k()).as_ref())
    }
}

pub fn eigenbasis(mesh: &TriMesh, k: usize) -> Result<SpectralBasis> {
    eigenbasis_with(mesh, k, &LaplacianOptions::default())
}

pub fn eigenbasis_with(mesh: &TriMesh, k: usize, opts: &LaplacianOptions) -> Result<SpectralBasis> {
    let n = mesh.n_vertices();
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let mass = mesh.vertex_areas()?;
    let stiffness = cotan_stiffness(mesh, opts)?;
    let inv_sqrt: Vec<f64> = mass.iter().map(|a| 1.0 / a.sqrt()).collect();

    let mut sym = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, w) in stiffness.row(i) {
            sym[(i, j)] = inv_sqrt[i] * w * inv_sqrt[j];
        }
    }
    let (vals, vecs) = linalg::sym_eigen(sym.as_ref())?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigensolveFailure("non-finite eigenvalue".into()));
    }

    let mut phi = Mat::<f64>::zeros(n, k);
    for c in 0..k {
        let col = vecs.col(c);
        // sign: entry of largest magnitude (first on ties) is positive
        let mut best = 0;
        for i in 1..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        let sign = if col[best] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            phi[(i, c)] = sign * inv_sqrt[i] * col[i];
        }
    }
    // the cotangent Laplacian is PSD; negatives are round-off
    let eigenvalues = vals[..k].iter().map(|&v| v.max(0.0)).collect();
    Ok(SpectralBasis {
        mass,
        stiffness: Some(stiffness),
        eigenvalues,
        eigenfunctions: phi,
    })
}

/// A-orthogonal projection coefficients `ΦᵀA f`.
pub fn project(basis: &SpectralBasis, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != basis.n() {
        return Err(Error::dims(format!(
            "function has {} values, basis has {} vertices",
            f.len(),
            basis.n()
        )));
    }
    let phi = &basis.eigenfunctions;
    Ok((0..basis.k())
        .map(|c| {
            (0..basis.n())
                .map(|i| phi[(i, c)] * basis.mass[i] * f[i])
                .sum()
        })
        .collect())
}

/// `Φ a`.
pub fn unproject(basis: &SpectralBasis, a: &[f64]) -> Result<Vec<f64>> {
    if a.len() != basis.k() {
        return Err(Error::dims(format!(
            "coefficient vector has {} entries, basis has {}",
            a.len(),
            basis.k()
        )));
    }
    let phi = &basis.eigenfunctions;
    Ok((0..basis.n())
        .map(|i| (0..basis.k()).map(|c| phi[(i, c)] * a[c]).sum())
        .collect())
}

/// `SPECTRAL n k`, then Λ, then Φ row-major, then the mass diagonal.
pub fn format_basis(basis: &SpectralBasis) -> String {
    let mut s = format!("SPECTRAL {} {}\n", basis.n(), basis.k());
    linalg::write_row(&mut s, basis.eigenvalues.iter().copied());
    linalg::write_rows(&mut s, basis.phi());
    linalg::write_row(&mut s, basis.mass.iter().copied());
    s
}

pub fn parse_basis(text: &str) -> Result<SpectralBasis> {
    let mut t = Tokens::new(text);
    let head = t.line()?;
    if head.first() != Some(&"SPECTRAL") {
        return Err(Error::parse(t.line_no(), "missing SPECTRAL header"));
    }
    let n = linalg::parse_header_usize(head.get(1), t.line_no(), "n")?;
    let k = linalg::parse_header_usize(head.get(2), t.line_no(), "k")?;
    let eigenvalues = t.vector(k)?;
    let eigenfunctions = t.matrix(n, k)?;
    let mass = t.vector(n)?;
    Ok(SpectralBasis {
        mass,
        stiffness: None,
        eigenvalues,
        eigenfunctions,
    })
}

pub fn save_basis(basis: &SpectralBasis, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_basis(basis)).map_err(|e| Error::io(path, e))
}

pub fn load_basis(path: impl AsRef<Path>) -> Result<SpectralBasis> {
    let path = path.as_ref();
    parse_basis(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn square_cotan_weights() {
        let w = cotan_stiffness(&shapes::unit_square(), &LaplacianOptions::default()).unwrap();
        // diagonal edge: both opposite angles are right angles
        assert!(w.get(0, 2).abs() < 1e-15);
        // boundary edge (0,1): one opposite angle of 45°
        assert!((w.get(0, 1) + 0.5).abs() < 1e-15);
        assert!((w.get(1, 0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn equilateral_weights() {
        let w = cotan_stiffness(
            &shapes::equilateral_triangle(),
            &LaplacianOptions::default(),
        )
        .unwrap();
        let want = 1.0 / (2.0 * 3f64.sqrt());
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!((w.get(i, j) + want).abs() < 1e-15);
        }
    }

    #[test]
    fn rows_sum_to_zero() {
        for m in [
            shapes::icosphere(2, 1.0),
            shapes::grid(5),
            shapes::torus(2.0, 0.7, 12, 8),
        ] {
            let w = cotan_stiffness(&m, &LaplacianOptions::default()).unwrap();
            let r = w.mul_vec(&vec![1.0; m.n_vertices()]);
            let scale = w.frobenius();
            assert!(r.iter().all(|x| x.abs() < 1e-14 * scale), "{r:?}");
        }
    }

    #[test]
    fn clamping_removes_negative_weights() {
        // obtuse triangle pair produces a negative cotangent weight
        let m = TriMesh::new(
            vec![
                nalgebra::Point3::new(0.0, 0.0, 0.0),
                nalgebra::Point3::new(4.0, 0.0, 0.0),
                nalgebra::Point3::new(2.0, 0.3, 0.0),
                nalgebra::Point3::new(2.0, -0.3, 0.0),
            ],
            vec![[0, 3, 1], [0, 1, 2]],
        )
        .unwrap();
        let raw = cotan_stiffness(&m, &LaplacianOptions::default()).unwrap();
        assert!(raw.get(0, 1) > 0.0);
        let clamped = cotan_stiffness(
            &m,
            &LaplacianOptions {
                clamp_negative: true,
            },
        )
        .unwrap();
        assert_eq!(clamped.get(0, 1), 0.0);
    }

    #[test]
    fn constant_first_eigenfunction() {
        let m = shapes::icosphere(2, 1.0);
        let b = eigenbasis(&m, 1).unwrap();
        assert!(b.eigenvalues[0].abs() < 1e-10);
        let c = 1.0 / m.surface_area().sqrt();
        for i in 0..m.n_vertices() {
            assert!((b.eigenfunctions[(i, 0)] - c).abs() < 1e-10);
        }
    }

    #[test]
    fn generalized_residual_small() {
        let m = shapes::torus(2.0, 0.6, 16, 10);
        let b = eigenbasis(&m, 20).unwrap();
        let w = b.stiffness.as_ref().unwrap();
        let lhs = w.mul_mat(b.phi());
        let rhs = Mat::from_fn(b.n(), b.k(), |i, c| {
            b.mass[i] * b.eigenfunctions[(i, c)] * b.eigenvalues[c]
        });
        assert!(linalg::frobenius_diff(lhs.as_ref(), rhs.as_ref()) < 1e-6 * w.frobenius());
        assert!(b.orthonormality_error() < 1e-8);
        assert!(b.eigenvalues.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn k_bounds() {
        let m = shapes::icosphere(0, 1.0);
        assert!(matches!(eigenbasis(&m, 0), Err(Error::KTooLarge { .. })));
        assert!(matches!(
            eigenbasis(&m, 13),
            Err(Error::KTooLarge { k: 13, n: 12 })
        ));
        let full = eigenbasis(&m, 12).unwrap();
        assert!(full.orthonormality_error() < 1e-8);
    }

    #[test]
    fn project_examples() {
        let m = shapes::icosphere(2, 1.0);
        let b = eigenbasis(&m, 10).unwrap();
        let phi3: Vec<f64> = b.eigenfunctions.col(3).iter().copied().collect();
        let a = project(&b, &phi3).unwrap();
        for (j, x) in a.iter().enumerate() {
            let want = if j == 3 { 1.0 } else { 0.0 };
            assert!((x - want).abs() < 1e-8);
        }
        let c = 2.5;
        let a = project(&b, &vec![c; b.n()]).unwrap();
        assert!((a[0] - c * m.surface_area().sqrt()).abs() < 1e-8);
        assert!(a[1..].iter().all(|x| x.abs() < 1e-8));
        assert!(project(&b, &vec![0.0; b.n()])
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
        assert!(matches!(
            project(&b, &[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn unproject_examples() {
        let m = shapes::icosphere(1, 1.0);
        let full = eigenbasis(&m, m.n_vertices()).unwrap();
        let mut e = vec![0.0; full.k()];
        e[4] = 1.0;
        let f = unproject(&full, &e).unwrap();
        for i in 0..full.n() {
            assert_eq!(f[i], full.eigenfunctions[(i, 4)]);
        }
        let f: Vec<f64> = m.vertices().iter().map(|p| p.x * p.y + p.z).collect();
        let back = unproject(&full, &project(&full, &f).unwrap()).unwrap();
        assert!(f.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-6));

        let tr = full.truncated(9).unwrap();
        let p = unproject(&tr, &project(&tr, &f).unwrap()).unwrap();
        let resid: Vec<f64> = f.iter().zip(&p).map(|(a, b)| a - b).collect();
        assert!(project(&tr, &resid).unwrap().iter().all(|x| x.abs() < 1e-8));
        assert!(matches!(
            unproject(&tr, &[1.0; 3]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn deterministic() {
        let m = shapes::torus(1.5, 0.5, 12, 8);
        let a = eigenbasis(&m, 15).unwrap();
        let b = eigenbasis(&m, 15).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenfunctions, b.eigenfunctions);
    }

    #[test]
    fn text_round_trip() {
        let b = eigenbasis(&shapes::icosphere(1, 1.0), 7).unwrap();
        let text = format_basis(&b);
        assert!(text.starts_with("SPECTRAL 42 7\n"));
        let back = parse_basis(&text).unwrap();
        assert_eq!(back.eigenvalues, b.eigenvalues);
        assert_eq!(back.eigenfunctions, b.eigenfunctions);
        assert_eq!(back.mass, b.mass);
    }
}
