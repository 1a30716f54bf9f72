//! C interface to `opnet-core`.
//!
//! Objects are handed out as opaque pointers and released with the matching
//! `*_free` function. Every fallible call returns an [`OpnetStatus`]; on
//! failure the message is available from [`opnet_last_error`] on the same
//! thread. Matrices cross the boundary as row-major `double` buffers.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use faer::Mat;
use nalgebra::Point3;
use opnet::algebra::{self, InterpolationScheme};
use opnet::decoder::{self, DecoderModel};
use opnet::fmap::{fmap_from_p2p, PointToPointMap};
use opnet::shapediff::{self, BaseOperators, DiffKind, ShapeDifference, DEFAULT_BASE_ID};
use opnet::spectral::{self, SpectralBasis};
use opnet::{align, extrinsic, meshio, Error, TriMesh};

/// Status codes. Values 1–19 mirror the library's error kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpnetStatus {
    Ok = 0,
    Io = 1,
    Parse = 2,
    DegenerateFace = 3,
    IndexOutOfRange = 4,
    RepeatedIndex = 5,
    IsolatedVertex = 6,
    NonFiniteCotangent = 7,
    KTooLarge = 8,
    EigensolveFailure = 9,
    DimensionMismatch = 10,
    NegativeSpectrum = 11,
    NonDiagonalizable = 12,
    ComplexBranch = 13,
    SingularMap = 14,
    ConnectivityMismatch = 15,
    ShapeMismatch = 16,
    NonFiniteLoss = 17,
    EmptyDataset = 18,
    InvalidArgument = 19,
    NullPointer = 100,
    InvalidUtf8 = 101,
    BufferTooSmall = 102,
    Panic = 103,
}

impl OpnetStatus {
    fn from_error(e: &Error) -> Self {
        use OpnetStatus::*;
        match e.code() {
            1 => Io,
            2 => Parse,
            3 => DegenerateFace,
            4 => IndexOutOfRange,
            5 => RepeatedIndex,
            6 => IsolatedVertex,
            7 => NonFiniteCotangent,
            8 => KTooLarge,
            9 => EigensolveFailure,
            10 => DimensionMismatch,
            11 => NegativeSpectrum,
            12 => NonDiagonalizable,
            13 => ComplexBranch,
            14 => SingularMap,
            15 => ConnectivityMismatch,
            16 => ShapeMismatch,
            17 => NonFiniteLoss,
            18 => EmptyDataset,
            _ => InvalidArgument,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpnetDiffKind {
    Area = 0,
    Conformal = 1,
    Extrinsic = 2,
}

impl From<OpnetDiffKind> for DiffKind {
    fn from(k: OpnetDiffKind) -> Self {
        match k {
            OpnetDiffKind::Area => DiffKind::Area,
            OpnetDiffKind::Conformal => DiffKind::Conformal,
            OpnetDiffKind::Extrinsic => DiffKind::Extrinsic,
        }
    }
}

impl From<DiffKind> for OpnetDiffKind {
    fn from(k: DiffKind) -> Self {
        match k {
            DiffKind::Area => OpnetDiffKind::Area,
            DiffKind::Conformal => OpnetDiffKind::Conformal,
            DiffKind::Extrinsic => OpnetDiffKind::Extrinsic,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpnetScheme {
    Multiplicative = 0,
    Linear = 1,
}

/// Reconstruction metrics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OpnetMetrics {
    pub d_r: f64,
    pub d_v: f64,
    pub d_e: f64,
}

/// Triangle mesh.
pub struct OpnetMesh(TriMesh);
/// Laplace–Beltrami eigenbasis of one mesh.
pub struct OpnetBasis(SpectralBasis);
/// One shape-difference operator.
pub struct OpnetShapeDiff(ShapeDifference);
/// Trained decoder.
pub struct OpnetModel(DecoderModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(OpnetStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(OpnetStatus::from_error(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OpnetStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OpnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OpnetStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            OpnetStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(OpnetStatus::InvalidUtf8, "path is not valid UTF-8".into()))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_buf(src: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < src.len() {
        return Err(Failure(
            OpnetStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn opnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn opnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an OFF or OBJ file (format from the extension).
#[no_mangle]
pub unsafe extern "C" fn opnet_mesh_load(
    path: *const c_char,
    out: *mut *mut OpnetMesh,
) -> OpnetStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, OpnetMesh(meshio::load_mesh_auto(p)?))
    })
}

/// Builds a mesh from `n_vertices × 3` coordinates and `n_faces × 3`
/// zero-based indices.
#[no_mangle]
pub unsafe extern "C" fn opnet_mesh_from_arrays(
    vertices: *const f64,
    n_vertices: usize,
    faces: *const u32,
    n_faces: usize,
    out: *mut *mut OpnetMesh,
) -> OpnetStatus {
    guard(|| {
        if vertices.is_null() || faces.is_null() {
            return Err(null("vertex or face array"));
        }
        let v = std::slice::from_raw_parts(vertices, 3 * n_vertices);
        let f = std::slice::from_raw_parts(faces, 3 * n_faces);
        let verts = v
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        let tris = f
            .chunks_exact(3)
            .map(|c| [c[0] as usize, c[1] as usize, c[2] as usize])
            .collect();
        put(out, OpnetMesh(TriMesh::new(verts, tris)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_mesh_save(
    mesh: *const OpnetMesh,
    path: *const c_char,
) -> OpnetStatus {
    guard(|| {
        let m = borrow(mesh, "mesh")?;
        let p = path_arg(path)?;
        let fmt = meshio::MeshFormat::from_path(p.as_ref())?;
        Ok(meshio::save_mesh(&m.0, p, fmt)?)
    })
}

/// Vertex count, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn opnet_mesh_vertex_count(mesh: *const OpnetMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.n_vertices())
}

#[no_mangle]
pub unsafe extern "C" fn opnet_mesh_face_count(mesh: *const OpnetMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.n_faces())
}

/// Copies the `n × 3` vertex coordinates into `out` (row-major).
#[no_mangle]
pub unsafe extern "C" fn opnet_mesh_vertices(
    mesh: *const OpnetMesh,
    out: *mut f64,
    len: usize,
) -> OpnetStatus {
    guard(|| {
        let m = borrow(mesh, "mesh")?;
        let flat: Vec<f64> =
            m.0.vertices()
                .iter()
                .flat_map(|p| [p.x, p.y, p.z])
                .collect();
        write_buf(&flat, out, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_mesh_volume(mesh: *const OpnetMesh, out: *mut f64) -> OpnetStatus {
    guard(|| {
        let m = borrow(mesh, "mesh")?;
        write_buf(&[m.0.volume()], out, 1)
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_mesh_free(mesh: *mut OpnetMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// The `k` lowest eigenpairs of the cotangent Laplacian.
#[no_mangle]
pub unsafe extern "C" fn opnet_basis_compute(
    mesh: *const OpnetMesh,
    k: usize,
    out: *mut *mut OpnetBasis,
) -> OpnetStatus {
    guard(|| {
        let m = borrow(mesh, "mesh")?;
        put(out, OpnetBasis(spectral::eigenbasis(&m.0, k)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_basis_size(basis: *const OpnetBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.0.k())
}

/// Copies the `k` eigenvalues (ascending) into `out`.
#[no_mangle]
pub unsafe extern "C" fn opnet_basis_eigenvalues(
    basis: *const OpnetBasis,
    out: *mut f64,
    len: usize,
) -> OpnetStatus {
    guard(|| {
        let b = borrow(basis, "basis")?;
        write_buf(&b.0.eigenvalues, out, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_basis_free(basis: *mut OpnetBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Shape difference of `target` relative to `base` through the identity
/// correspondence (both meshes must have the same vertex count).
#[no_mangle]
pub unsafe extern "C" fn opnet_shapediff_compute(
    base: *const OpnetMesh,
    base_basis: *const OpnetBasis,
    target: *const OpnetMesh,
    target_basis: *const OpnetBasis,
    kind: OpnetDiffKind,
    out: *mut *mut OpnetShapeDiff,
) -> OpnetStatus {
    guard(|| {
        let (m0, b0) = (borrow(base, "base")?, borrow(base_basis, "base basis")?);
        let (m1, b1) = (
            borrow(target, "target")?,
            borrow(target_basis, "target basis")?,
        );
        if m0.0.n_vertices() != m1.0.n_vertices() {
            return Err(Error::ConnectivityMismatch.into());
        }
        let c = fmap_from_p2p(&b0.0, &b1.0, &PointToPointMap::identity(m1.0.n_vertices()))?;
        let d = match DiffKind::from(kind) {
            DiffKind::Area => shapediff::area_difference(&c)?,
            DiffKind::Conformal => {
                shapediff::conformal_difference(&b0.0.eigenvalues, &b1.0.eigenvalues, &c)?
            }
            DiffKind::Extrinsic => {
                let ops = BaseOperators::new(&m0.0, b0.0.clone(), DEFAULT_BASE_ID)?;
                let [_, _, e] = ops.differences(&m1.0, &b1.0, &c)?;
                e
            }
        };
        put(out, OpnetShapeDiff(d))
    })
}

/// Wraps a `k × k` row-major matrix.
#[no_mangle]
pub unsafe extern "C" fn opnet_shapediff_from_matrix(
    kind: OpnetDiffKind,
    data: *const f64,
    k: usize,
    out: *mut *mut OpnetShapeDiff,
) -> OpnetStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("matrix data"));
        }
        let v = std::slice::from_raw_parts(data, k * k);
        let m = Mat::from_fn(k, k, |i, j| v[i * k + j]);
        put(
            out,
            OpnetShapeDiff(ShapeDifference::new(kind.into(), m, DEFAULT_BASE_ID)?),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_shapediff_load(
    path: *const c_char,
    out: *mut *mut OpnetShapeDiff,
) -> OpnetStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, OpnetShapeDiff(shapediff::load_sdiff(p)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_shapediff_save(
    d: *const OpnetShapeDiff,
    path: *const c_char,
) -> OpnetStatus {
    guard(|| {
        let d = borrow(d, "shape difference")?;
        let p = path_arg(path)?;
        Ok(shapediff::save_sdiff(&d.0, p)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_shapediff_size(d: *const OpnetShapeDiff) -> usize {
    d.as_ref().map_or(0, |d| d.0.k())
}

#[no_mangle]
pub unsafe extern "C" fn opnet_shapediff_kind(
    d: *const OpnetShapeDiff,
    out: *mut OpnetDiffKind,
) -> OpnetStatus {
    guard(|| {
        let d = borrow(d, "shape difference")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = d.0.kind.into();
        Ok(())
    })
}

/// Copies the `k × k` matrix row-major into `out`.
#[no_mangle]
pub unsafe extern "C" fn opnet_shapediff_matrix(
    d: *const OpnetShapeDiff,
    out: *mut f64,
    len: usize,
) -> OpnetStatus {
    guard(|| {
        let d = borrow(d, "shape difference")?;
        let k = d.0.k();
        let flat: Vec<f64> = (0..k * k).map(|i| d.0.matrix[(i / k, i % k)]).collect();
        write_buf(&flat, out, len)
    })
}

/// Operator at parameter `t ∈ [0, 1]` between `d0` and `d1`.
#[no_mangle]
pub unsafe extern "C" fn opnet_interpolate(
    d0: *const OpnetShapeDiff,
    d1: *const OpnetShapeDiff,
    t: f64,
    scheme: OpnetScheme,
    out: *mut *mut OpnetShapeDiff,
) -> OpnetStatus {
    guard(|| {
        let (a, b) = (borrow(d0, "d0")?, borrow(d1, "d1")?);
        let s = match scheme {
            OpnetScheme::Multiplicative => InterpolationScheme::Multiplicative,
            OpnetScheme::Linear => InterpolationScheme::Linear,
        };
        put(out, OpnetShapeDiff(algebra::interpolate(&a.0, &b.0, t, s)?))
    })
}

/// `D_C D_A⁺ D_B`.
#[no_mangle]
pub unsafe extern "C" fn opnet_analogy(
    da: *const OpnetShapeDiff,
    db: *const OpnetShapeDiff,
    dc: *const OpnetShapeDiff,
    out: *mut *mut OpnetShapeDiff,
) -> OpnetStatus {
    guard(|| {
        let (a, b, c) = (borrow(da, "da")?, borrow(db, "db")?, borrow(dc, "dc")?);
        put(
            out,
            OpnetShapeDiff(algebra::analogy_difference(&a.0, &b.0, &c.0)?),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_shapediff_free(d: *mut OpnetShapeDiff) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Coordinates recovered from the Gram operator of `mesh` in `basis`,
/// written as `n × 3` row-major.
#[no_mangle]
pub unsafe extern "C" fn opnet_recover_embedding(
    mesh: *const OpnetMesh,
    basis: *const OpnetBasis,
    out: *mut f64,
    len: usize,
) -> OpnetStatus {
    guard(|| {
        let (m, b) = (borrow(mesh, "mesh")?, borrow(basis, "basis")?);
        let g = extrinsic::gram_operator(&m.0, &b.0)?;
        let x = extrinsic::recover_from_gram(&g, &b.0)?;
        let flat: Vec<f64> = (0..x.nrows() * 3).map(|i| x[(i / 3, i % 3)]).collect();
        write_buf(&flat, out, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_model_load(
    path: *const c_char,
    out: *mut *mut OpnetModel,
) -> OpnetStatus {
    guard(|| {
        let p = path_arg(path)?;
        put(out, OpnetModel(decoder::load_model(p)?))
    })
}

/// Number of output vertices, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn opnet_model_vertex_count(model: *const OpnetModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_vertices())
}

/// Decodes `n_channels` differences into `n × 3` coordinates (row-major).
#[no_mangle]
pub unsafe extern "C" fn opnet_model_reconstruct(
    model: *const OpnetModel,
    channels: *const *const OpnetShapeDiff,
    n_channels: usize,
    out: *mut f64,
    len: usize,
) -> OpnetStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        if channels.is_null() {
            return Err(null("channel array"));
        }
        let chans = std::slice::from_raw_parts(channels, n_channels)
            .iter()
            .map(|&p| borrow(p, "channel").map(|d| d.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let x = decoder::reconstruct(&m.0, &chans)?;
        let flat: Vec<f64> = x.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        write_buf(&flat, out, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn opnet_model_free(model: *mut OpnetModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// d_R, d_V and d_E of `n × 3` coordinates against `gt`.
#[no_mangle]
pub unsafe extern "C" fn opnet_evaluate(
    gt: *const OpnetMesh,
    coords: *const f64,
    n_vertices: usize,
    out: *mut OpnetMetrics,
) -> OpnetStatus {
    guard(|| {
        let g = borrow(gt, "ground truth")?;
        if coords.is_null() || out.is_null() {
            return Err(null("coordinate or output pointer"));
        }
        let v = std::slice::from_raw_parts(coords, 3 * n_vertices);
        let pts: Vec<Point3<f64>> = v
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        let m = align::evaluate(&g.0, &pts)?;
        *out = OpnetMetrics {
            d_r: m.d_r,
            d_v: m.d_v,
            d_e: m.d_e,
        };
        Ok(())
    })
}
