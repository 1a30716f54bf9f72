//! Functional maps between spectral bases.
//!
//! Convention: a point map goes from `S_1` to `S_0` (entry `p` is the
//! vertex of `S_0` that vertex `p` of `S_1` lands on) and the induced
//! functional map `C_01 = Φ_1ᵀ A_1 Π_01 Φ_0` carries spectral coefficients
//! on `S_0` to coefficients on `S_1`.

use std::fmt::Write as _;
use std::path::Path;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, Tokens};
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointToPointMap {
    assignment: Vec<usize>,
}

impl PointToPointMap {
    /// `source_len` is the vertex count of `S_0`.
    pub fn new(assignment: Vec<usize>, source_len: usize) -> Result<Self> {
        if let Some((p, &q)) = assignment
            .iter()
            .enumerate()
            .find(|(_, &q)| q >= source_len)
        {
            return Err(Error::dims(format!(
                "map entry {p} points at vertex {q}, source has {source_len}"
            )));
        }
        Ok(PointToPointMap { assignment })
    }

    pub fn identity(n: usize) -> Self {
        PointToPointMap {
            assignment: (0..n).collect(),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Given `self: S_1 → S_0` and `next: S_2 → S_1`, the chained map
    /// `S_2 → S_0`.
    pub fn chain(&self, next: &PointToPointMap) -> PointToPointMap {
        PointToPointMap {
            assignment: next
                .assignment
                .iter()
                .map(|&q| self.assignment[q])
                .collect(),
        }
    }

    /// Inverse of a bijection, `None` otherwise.
    pub fn inverse(&self) -> Option<PointToPointMap> {
        let n = self.assignment.len();
        let mut inv = vec![usize::MAX; n];
        for (p, &q) in self.assignment.iter().enumerate() {
            if q >= n || inv[q] != usize::MAX {
                return None;
            }
            inv[q] = p;
        }
        Some(PointToPointMap { assignment: inv })
    }
}

/// `target_dim × source_dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalMap {
    matrix: Mat<f64>,
}

impl FunctionalMap {
    pub fn new(matrix: Mat<f64>) -> Result<Self> {
        if !linalg::is_finite(matrix.as_ref()) {
            return Err(Error::InvalidArgument(
                "functional map has non-finite entries".into(),
            ));
        }
        Ok(FunctionalMap { matrix })
    }

    pub fn identity(k: usize) -> Self {
        FunctionalMap {
            matrix: Mat::identity(k, k),
        }
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.matrix
    }

    pub fn source_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `C_01 = Φ_1ᵀ A_1 Π_01 Φ_0`, with `Π_01 Φ_0` formed by gathering rows.
pub fn fmap_from_p2p(
    basis0: &SpectralBasis,
    basis1: &SpectralBasis,
    map: &PointToPointMap,
) -> Result<FunctionalMap> {
    if map.len() != basis1.n() {
        return Err(Error::dims(format!(
            "point map has {} entries, target mesh has {} vertices",
            map.len(),
            basis1.n()
        )));
    }
    if let Some(&q) = map.assignment.iter().find(|&&q| q >= basis0.n()) {
        return Err(Error::dims(format!(
            "point map references vertex {q}, source has {}",
            basis0.n()
        )));
    }
    let phi0 = &basis0.eigenfunctions;
    let pulled = Mat::from_fn(basis1.n(), basis0.k(), |p, c| phi0[(map.assignment[p], c)]);
    FunctionalMap::new(basis1.phi_t_mass() * pulled)
}

/// `C_01 = Φ_1ᵀ A_1 M Φ_0` for a soft correspondence `M` (`n_1 × n_0`,
/// rows expected to be probability vectors).
pub fn fmap_from_matrix(
    basis0: &SpectralBasis,
    basis1: &SpectralBasis,
    map: MatRef<'_, f64>,
) -> Result<FunctionalMap> {
    if map.nrows() != basis1.n() || map.ncols() != basis0.n() {
        return Err(Error::dims(format!(
            "soft map is {}×{}, expected {}×{}",
            map.nrows(),
            map.ncols(),
            basis1.n(),
            basis0.n()
        )));
    }
    for i in 0..map.nrows() {
        let s: f64 = (0..map.ncols()).map(|j| map[(i, j)]).sum();
        if (s - 1.0).abs() > 1e-6 {
            log::warn!("soft map row {i} sums to {s}, not 1");
            break;
        }
    }
    FunctionalMap::new(basis1.phi_t_mass() * (map * &basis0.eigenfunctions))
}

/// `C_02 = C_12 C_01`.
pub fn compose(c01: &FunctionalMap, c12: &FunctionalMap) -> Result<FunctionalMap> {
    if c12.source_dim() != c01.target_dim() {
        return Err(Error::dims(format!(
            "cannot compose {}×{} after {}×{}",
            c12.target_dim(),
            c12.source_dim(),
            c01.target_dim(),
            c01.source_dim()
        )));
    }
    FunctionalMap::new(&c12.matrix * &c01.matrix)
}

pub fn format_fmap(c: &FunctionalMap) -> String {
    let mut s = format!("FMAP {} {}\n", c.target_dim(), c.source_dim());
    linalg::write_rows(&mut s, c.matrix());
    s
}

pub fn parse_fmap(text: &str) -> Result<FunctionalMap> {
    let mut t = Tokens::new(text);
    let head = t.line()?;
    if head.first() != Some(&"FMAP") {
        return Err(Error::parse(t.line_no(), "missing FMAP header"));
    }
    let k1 = linalg::parse_header_usize(head.get(1), t.line_no(), "k1")?;
    let k0 = linalg::parse_header_usize(head.get(2), t.line_no(), "k0")?;
    FunctionalMap::new(t.matrix(k1, k0)?)
}

pub fn save_fmap(c: &FunctionalMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_fmap(c)).map_err(|e| Error::io(path, e))
}

pub fn load_fmap(path: impl AsRef<Path>) -> Result<FunctionalMap> {
    let path = path.as_ref();
    parse_fmap(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn format_p2p(map: &PointToPointMap) -> String {
    let mut s = String::new();
    for q in &map.assignment {
        let _ = writeln!(s, "{q}");
    }
    s
}

pub fn parse_p2p(text: &str, source_len: usize) -> Result<PointToPointMap> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        out.push(
            l.parse::<usize>()
                .map_err(|_| Error::parse(i + 1, format!("bad index {l:?}")))?,
        );
    }
    PointToPointMap::new(out, source_len)
}

pub fn load_p2p(path: impl AsRef<Path>, source_len: usize) -> Result<PointToPointMap> {
    let path = path.as_ref();
    parse_p2p(
        &std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
        source_len,
    )
}
