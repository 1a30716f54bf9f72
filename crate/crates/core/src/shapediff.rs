//! Area, conformal and extrinsic shape-difference operators.
//!
//! Every operator has the form `D = K_0⁺ (Cᵀ K_i C)` for a pair of inner
//! products `K_0` on the base and `K_i` on the target, transported through
//! the functional map `C = C_0i`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use faer::{Mat, MatRef};

use crate::algebra::{pseudo_inverse, DEFAULT_PINV_TOL};
use crate::error::{Error, Result};
use crate::extrinsic;
use crate::fmap::FunctionalMap;
use crate::linalg::{self, Tokens};
use crate::meshio::TriMesh;
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiffKind {
    Area,
    Conformal,
    Extrinsic,
}

impl DiffKind {
    /// Canonical channel order.
    pub const ALL: [DiffKind; 3] = [DiffKind::Area, DiffKind::Conformal, DiffKind::Extrinsic];

    pub fn letter(self) -> char {
        match self {
            DiffKind::Area => 'a',
            DiffKind::Conformal => 'c',
            DiffKind::Extrinsic => 'e',
        }
    }
}

impl fmt::Display for DiffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiffKind::Area => "Area",
            DiffKind::Conformal => "Conformal",
            DiffKind::Extrinsic => "Extrinsic",
        })
    }
}

impl FromStr for DiffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "area" => Ok(DiffKind::Area),
            "c" | "conformal" => Ok(DiffKind::Conformal),
            "e" | "extrinsic" => Ok(DiffKind::Extrinsic),
            _ => Err(Error::InvalidArgument(format!(
                "unknown difference kind {s:?}"
            ))),
        }
    }
}

/// Square `k0 × k0` operator anchored on a base shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDifference {
    pub kind: DiffKind,
    pub matrix: Mat<f64>,
    /// Whitespace-free identifier of the base shape.
    pub base_id: String,
}

impl ShapeDifference {
    pub fn new(kind: DiffKind, matrix: Mat<f64>, base_id: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::dims(format!(
                "shape difference must be square, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !linalg::is_finite(matrix.as_ref()) {
            return Err(Error::InvalidArgument(
                "shape difference has non-finite entries".into(),
            ));
        }
        let base_id = base_id.into();
        if base_id.is_empty() || base_id.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad base id {base_id:?}")));
        }
        Ok(ShapeDifference {
            kind,
            matrix,
            base_id,
        })
    }

    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn with_base_id(mut self, base_id: impl Into<String>) -> Result<Self> {
        let m = std::mem::replace(&mut self.matrix, Mat::zeros(0, 0));
        ShapeDifference::new(self.kind, m, base_id)
    }
}

pub const DEFAULT_BASE_ID: &str = "base";

/// `K_0⁺ (Cᵀ K_i C)`.
pub fn generic_difference(
    kind: DiffKind,
    k0_inner: MatRef<'_, f64>,
    ki_inner: MatRef<'_, f64>,
    c: &FunctionalMap,
    pinv_tol: f64,
) -> Result<ShapeDifference> {
    let (k0, ki) = (c.source_dim(), c.target_dim());
    if k0_inner.nrows() != k0 || k0_inner.ncols() != k0 {
        return Err(Error::dims(format!(
            "base inner product is {}×{}, map source dimension is {k0}",
            k0_inner.nrows(),
            k0_inner.ncols()
        )));
    }
    if ki_inner.nrows() != ki || ki_inner.ncols() != ki {
        return Err(Error::dims(format!(
            "target inner product is {}×{}, map target dimension is {ki}",
            ki_inner.nrows(),
            ki_inner.ncols()
        )));
    }
    let cm = c.matrix();
    let transported = cm.transpose() * ki_inner * cm;
    let d = pseudo_inverse(k0_inner, pinv_tol) * transported;
    ShapeDifference::new(kind, d, DEFAULT_BASE_ID)
}

/// `CᵀC`.
pub fn area_difference(c: &FunctionalMap) -> Result<ShapeDifference> {
    let cm = c.matrix();
    ShapeDifference::new(
        DiffKind::Area,
        linalg::symmetrize((cm.transpose() * cm).as_ref()),
        DEFAULT_BASE_ID,
    )
}

/// `Λ_0⁺ Cᵀ Λ_i C`.
pub fn conformal_difference(
    lambda0: &[f64],
    lambdai: &[f64],
    c: &FunctionalMap,
) -> Result<ShapeDifference> {
    conformal_difference_with_tol(lambda0, lambdai, c, DEFAULT_PINV_TOL)
}

pub fn conformal_difference_with_tol(
    lambda0: &[f64],
    lambdai: &[f64],
    c: &FunctionalMap,
    pinv_tol: f64,
) -> Result<ShapeDifference> {
    if lambda0.len() != c.source_dim() || lambdai.len() != c.target_dim() {
        return Err(Error::dims(format!(
            "eigenvalue counts ({}, {}) do not match map {}×{}",
            lambda0.len(),
            lambdai.len(),
            c.target_dim(),
            c.source_dim()
        )));
    }
    generic_difference(
        DiffKind::Conformal,
        linalg::diag(lambda0).as_ref(),
        linalg::diag(lambdai).as_ref(),
        c,
        pinv_tol,
    )
}

/// `(Φ_0ᵀ E_0 Φ_0)⁺ (Cᵀ Φ_iᵀ E_i Φ_i C)` with `E` the complete-graph
/// extrinsic inner product.
pub fn extrinsic_difference(
    base: (&TriMesh, &SpectralBasis),
    target: (&TriMesh, &SpectralBasis),
    c: &FunctionalMap,
) -> Result<ShapeDifference> {
    let k0 = extrinsic::projected_inner(base.0, base.1)?;
    let ki = extrinsic::projected_inner(target.0, target.1)?;
    generic_difference(
        DiffKind::Extrinsic,
        k0.as_ref(),
        ki.as_ref(),
        c,
        DEFAULT_PINV_TOL,
    )
}

/// Precomputed base-side quantities, reused across many targets.
#[derive(Debug, Clone)]
pub struct BaseOperators {
    pub basis: SpectralBasis,
    pub extrinsic_inner: Mat<f64>,
    pub base_id: String,
    pub pinv_tol: f64,
}

impl BaseOperators {
    pub fn new(mesh: &TriMesh, basis: SpectralBasis, base_id: &str) -> Result<Self> {
        let extrinsic_inner = extrinsic::projected_inner(mesh, &basis)?;
        Ok(BaseOperators {
            basis,
            extrinsic_inner,
            base_id: base_id.to_string(),
            pinv_tol: DEFAULT_PINV_TOL,
        })
    }

    /// All three differences of `target` (with its own basis) through `c`,
    /// in channel order.
    pub fn differences(
        &self,
        target: &TriMesh,
        target_basis: &SpectralBasis,
        c: &FunctionalMap,
    ) -> Result<[ShapeDifference; 3]> {
        let area = area_difference(c)?;
        let conf = conformal_difference_with_tol(
            &self.basis.eigenvalues,
            &target_basis.eigenvalues,
            c,
            self.pinv_tol,
        )?;
        let ki = extrinsic::projected_inner(target, target_basis)?;
        let ext = generic_difference(
            DiffKind::Extrinsic,
            self.extrinsic_inner.as_ref(),
            ki.as_ref(),
            c,
            self.pinv_tol,
        )?;
        Ok([
            area.with_base_id(&self.base_id)?,
            conf.with_base_id(&self.base_id)?,
            ext.with_base_id(&self.base_id)?,
        ])
    }
}

/// `SDIFF kind k0 base_id` followed by the matrix row-major.
pub fn format_sdiff(d: &ShapeDifference) -> String {
    let mut s = format!("SDIFF {} {} {}\n", d.kind, d.k(), d.base_id);
    linalg::write_rows(&mut s, d.matrix());
    s
}

pub fn parse_sdiff(text: &str) -> Result<ShapeDifference> {
    let mut t = Tokens::new(text);
    let head = t.line()?;
    if head.first() != Some(&"SDIFF") || head.len() != 4 {
        return Err(Error::parse(
            t.line_no(),
            "expected `SDIFF kind k0 base_id`",
        ));
    }
    let kind: DiffKind = head[1].parse()?;
    let k = linalg::parse_header_usize(head.get(2), t.line_no(), "k0")?;
    let m = t.matrix(k, k)?;
    ShapeDifference::new(kind, m, head[3])
}

pub fn save_sdiff(d: &ShapeDifference, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_sdiff(d)).map_err(|e| Error::io(path, e))
}

pub fn load_sdiff(path: impl AsRef<Path>) -> Result<ShapeDifference> {
    let path = path.as_ref();
    parse_sdiff(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
