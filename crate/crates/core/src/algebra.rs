//! Operator algebra on shape differences: pseudo-inverse, matrix log/exp,
//! interpolation, functoriality and analogies.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::fmap::FunctionalMap;
use crate::linalg;
use crate::shapediff::ShapeDifference;

/// Singular values below `DEFAULT_PINV_TOL · σ_max` are treated as zero.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;
/// Eigenvalues with real part at or below this are clamped before `log`.
pub const DEFAULT_EIG_FLOOR: f64 = 1e-8;
/// Largest accepted eigenvector condition number in [`matrix_log`].
pub const MAX_EIGVEC_COND: f64 = 1e10;
/// Largest accepted relative imaginary part in [`matrix_log`].
pub const MAX_IMAG: f64 = 1e-8;

/// Moore–Penrose pseudo-inverse through the SVD.
pub fn pseudo_inverse(m: MatRef<'_, f64>, rel_tol: f64) -> Mat<f64> {
    let (r, c) = (m.nrows(), m.ncols());
    if r == 0 || c == 0 {
        return Mat::zeros(c, r);
    }
    let svd = match m.thin_svd() {
        Ok(s) => s,
        Err(_) => return Mat::from_fn(c, r, |_, _| f64::NAN),
    };
    let s = svd.S().column_vector();
    let smax = s.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = rel_tol * smax;
    let inv: Vec<f64> = s
        .iter()
        .map(|&x| if x > cutoff && x > 0.0 { 1.0 / x } else { 0.0 })
        .collect();
    // V diag(1/s) Uᵀ
    let v_scaled = Mat::from_fn(c, inv.len(), |i, j| svd.V()[(i, j)] * inv[j]);
    v_scaled * svd.U().transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolationScheme {
    /// `exp((1−t) log D_0 + t log D_1)`.
    Multiplicative,
    /// `(1−t) D_0 + t D_1`.
    Linear,
}

impl std::str::FromStr for InterpolationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mul" | "multiplicative" => Ok(InterpolationScheme::Multiplicative),
            "lin" | "linear" => Ok(InterpolationScheme::Linear),
            _ => Err(Error::InvalidArgument(format!("unknown scheme {s:?}"))),
        }
    }
}

/// Principal logarithm through an eigendecomposition.
///
/// Eigenvalues whose real part is at or below `eig_floor` are replaced by
/// `eig_floor`. Fails when the eigenvector matrix is ill-conditioned or the
/// spectrum leaves the real line.
pub fn matrix_log(m: MatRef<'_, f64>, eig_floor: f64) -> Result<Mat<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::dims(format!("log of a {}×{} matrix", n, m.ncols())));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let evd = m
        .eigen()
        .map_err(|e| Error::EigensolveFailure(format!("{e:?}")))?;
    let vals: Vec<c64> = evd.S().column_vector().iter().copied().collect();
    let vecs = evd.U().to_owned();

    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.norm())).max(1.0);
    let imag = vals.iter().fold(0.0f64, |a, v| a.max(v.im.abs()));
    if imag > MAX_IMAG * scale {
        return Err(Error::ComplexBranch { imag });
    }

    let sv = vecs
        .singular_values()
        .map_err(|e| Error::EigensolveFailure(format!("{e:?}")))?;
    let cond = sv[0] / sv[sv.len() - 1];
    if !(cond <= MAX_EIGVEC_COND) {
        return Err(Error::NonDiagonalizable { cond });
    }

    let logs: Vec<c64> = vals
        .iter()
        .map(|v| {
            let re = if v.re <= eig_floor { eig_floor } else { v.re };
            c64::new(re, 0.0).ln()
        })
        .collect();
    let inv = vecs.partial_piv_lu().inverse();
    let scaled = Mat::from_fn(n, n, |i, j| vecs[(i, j)] * logs[j]);
    let out = scaled * inv;

    let mut re = Mat::<f64>::zeros(n, n);
    let mut im_norm = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            re[(i, j)] = out[(i, j)].re;
            im_norm += out[(i, j)].im * out[(i, j)].im;
        }
    }
    let im_norm = im_norm.sqrt();
    if im_norm > MAX_IMAG * linalg::frobenius(re.as_ref()).max(1.0) {
        return Err(Error::ComplexBranch { imag: im_norm });
    }
    Ok(re)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn matrix_exp(m: MatRef<'_, f64>) -> Mat<f64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;

    let n = m.nrows();
    assert_eq!(n, m.ncols(), "exp of a non-square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m * faer::Scale(0.5f64.powi(squarings));
    let id = Mat::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let inner_u = &a6
        * (&a6 * faer::Scale(B[13]) + &a4 * faer::Scale(B[11]) + &a2 * faer::Scale(B[9]))
        + &a6 * faer::Scale(B[7])
        + &a4 * faer::Scale(B[5])
        + &a2 * faer::Scale(B[3])
        + &id * faer::Scale(B[1]);
    let u = &a * inner_u;
    let v = &a6 * (&a6 * faer::Scale(B[12]) + &a4 * faer::Scale(B[10]) + &a2 * faer::Scale(B[8]))
        + &a6 * faer::Scale(B[6])
        + &a4 * faer::Scale(B[4])
        + &a2 * faer::Scale(B[2])
        + &id * faer::Scale(B[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn check_pair(a: &ShapeDifference, b: &ShapeDifference) -> Result<()> {
    if a.kind != b.kind {
        return Err(Error::InvalidArgument(format!(
            "cannot combine {} and {} differences",
            a.kind, b.kind
        )));
    }
    if a.k() != b.k() {
        return Err(Error::dims(format!("{}×{0} vs {}×{1}", a.k(), b.k())));
    }
    Ok(())
}

/// Interpolates between two differences of the same kind. The endpoints
/// `t = 0` and `t = 1` return the inputs unchanged.
pub fn interpolate(
    d0: &ShapeDifference,
    d1: &ShapeDifference,
    t: f64,
    scheme: InterpolationScheme,
) -> Result<ShapeDifference> {
    interpolate_with_floor(d0, d1, t, scheme, DEFAULT_EIG_FLOOR)
}

pub fn interpolate_with_floor(
    d0: &ShapeDifference,
    d1: &ShapeDifference,
    t: f64,
    scheme: InterpolationScheme,
    eig_floor: f64,
) -> Result<ShapeDifference> {
    check_pair(d0, d1)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
    }
    if t == 0.0 {
        return Ok(d0.clone());
    }
    if t == 1.0 {
        return Ok(d1.clone());
    }
    let m = match scheme {
        InterpolationScheme::Linear => {
            d0.matrix() * faer::Scale(1.0 - t) + d1.matrix() * faer::Scale(t)
        }
        InterpolationScheme::Multiplicative => {
            let l0 = matrix_log(d0.matrix(), eig_floor)?;
            let l1 = matrix_log(d1.matrix(), eig_floor)?;
            matrix_exp((l0 * faer::Scale(1.0 - t) + l1 * faer::Scale(t)).as_ref())
        }
    };
    ShapeDifference::new(d0.kind, m, d0.base_id.clone())
}

#[derive(Debug, Clone, Copy)]
pub struct FunctorialOptions {
    pub pinv_tol: f64,
    /// Use `C⁺` when `C` is rectangular or numerically singular.
    pub allow_pinv_fallback: bool,
}

impl Default for FunctorialOptions {
    fn default() -> Self {
        FunctorialOptions {
            pinv_tol: DEFAULT_PINV_TOL,
            allow_pinv_fallback: true,
        }
    }
}

/// `D_ij = C_0i D_0i⁺ D_0j C_0i⁻¹`, expressed in the basis of `S_i`. The
/// result keeps the kind and base id of `d0i`.
pub fn functorial_difference(
    c0i: &FunctionalMap,
    d0i: &ShapeDifference,
    d0j: &ShapeDifference,
) -> Result<ShapeDifference> {
    functorial_difference_with(c0i, d0i, d0j, &FunctorialOptions::default())
}

pub fn functorial_difference_with(
    c0i: &FunctionalMap,
    d0i: &ShapeDifference,
    d0j: &ShapeDifference,
    opts: &FunctorialOptions,
) -> Result<ShapeDifference> {
    check_pair(d0i, d0j)?;
    if c0i.source_dim() != d0i.k() {
        return Err(Error::dims(format!(
            "map source dimension {} vs difference size {}",
            c0i.source_dim(),
            d0i.k()
        )));
    }
    let c = c0i.matrix();
    let square = c.nrows() == c.ncols();
    let invertible = square && {
        let sv = linalg::singular_values(c)?;
        sv.last().copied().unwrap_or(0.0) > opts.pinv_tol * sv[0]
    };
    let c_inv = if invertible {
        c.partial_piv_lu().inverse()
    } else if opts.allow_pinv_fallback {
        log::warn!(
            "functional map {}×{} is not invertible; using its pseudo-inverse",
            c.nrows(),
            c.ncols()
        );
        pseudo_inverse(c, opts.pinv_tol)
    } else {
        return Err(Error::SingularMap);
    };
    let inner = pseudo_inverse(d0i.matrix(), opts.pinv_tol) * d0j.matrix();
    let m = c * inner * c_inv;
    ShapeDifference::new(d0i.kind, m, d0i.base_id.clone())
}

/// `D_X = D_C D_A⁺ D_B`: X relates to C as B relates to A.
pub fn analogy_difference(
    d_a: &ShapeDifference,
    d_b: &ShapeDifference,
    d_c: &ShapeDifference,
) -> Result<ShapeDifference> {
    check_pair(d_a, d_b)?;
    check_pair(d_a, d_c)?;
    let m = d_c.matrix() * pseudo_inverse(d_a.matrix(), DEFAULT_PINV_TOL) * d_b.matrix();
    ShapeDifference::new(d_a.kind, m, d_a.base_id.clone())
}
