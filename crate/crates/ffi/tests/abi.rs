use std::ffi::{CStr, CString};
use std::ptr;

use opnet_ffi::*;

fn tetra() -> *mut OpnetMesh {
    let v = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let f: [u32; 12] = [0, 2, 1, 0, 1, 3, 0, 3, 2, 1, 2, 3];
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { opnet_mesh_from_arrays(v.as_ptr(), 4, f.as_ptr(), 4, &mut m) },
        OpnetStatus::Ok
    );
    m
}

fn last_error() -> String {
    let p = opnet_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn mesh_roundtrip_and_counts() {
    let m = tetra();
    unsafe {
        assert_eq!(opnet_mesh_vertex_count(m), 4);
        assert_eq!(opnet_mesh_face_count(m), 4);
        let mut vol = 0.0;
        assert_eq!(opnet_mesh_volume(m, &mut vol), OpnetStatus::Ok);
        assert!((vol - 1.0 / 6.0).abs() < 1e-15);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("t.off").to_str().unwrap()).unwrap();
        assert_eq!(opnet_mesh_save(m, path.as_ptr()), OpnetStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(opnet_mesh_load(path.as_ptr(), &mut back), OpnetStatus::Ok);
        let mut a = [0.0; 12];
        let mut b = [0.0; 12];
        assert_eq!(opnet_mesh_vertices(m, a.as_mut_ptr(), 12), OpnetStatus::Ok);
        assert_eq!(
            opnet_mesh_vertices(back, b.as_mut_ptr(), 12),
            OpnetStatus::Ok
        );
        assert_eq!(a, b);
        opnet_mesh_free(back);
        opnet_mesh_free(m);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut m = ptr::null_mut();
        let missing = CString::new("/nonexistent/mesh.off").unwrap();
        assert_eq!(opnet_mesh_load(missing.as_ptr(), &mut m), OpnetStatus::Io);
        assert!(m.is_null());
        assert!(last_error().contains("nonexistent"));

        let v = [0.0; 9];
        let f: [u32; 3] = [0, 1, 2];
        assert_eq!(
            opnet_mesh_from_arrays(v.as_ptr(), 3, f.as_ptr(), 1, &mut m),
            OpnetStatus::DegenerateFace
        );
        assert_eq!(
            opnet_mesh_load(ptr::null(), &mut m),
            OpnetStatus::NullPointer
        );

        let t = tetra();
        let mut b = ptr::null_mut();
        assert_eq!(opnet_basis_compute(t, 9, &mut b), OpnetStatus::KTooLarge);
        assert_eq!(opnet_basis_compute(t, 4, &mut b), OpnetStatus::Ok);
        assert!(opnet_last_error().is_null());
        let mut small = [0.0; 2];
        assert_eq!(
            opnet_basis_eigenvalues(b, small.as_mut_ptr(), 2),
            OpnetStatus::BufferTooSmall
        );
        opnet_basis_free(b);
        opnet_mesh_free(t);
        // NULL is accepted by every destructor
        opnet_mesh_free(ptr::null_mut());
        opnet_model_free(ptr::null_mut());
    }
}

#[test]
fn identical_shapes_give_identity_area_difference() {
    unsafe {
        let m = tetra();
        let mut b = ptr::null_mut();
        assert_eq!(opnet_basis_compute(m, 4, &mut b), OpnetStatus::Ok);
        assert_eq!(opnet_basis_size(b), 4);
        let mut d = ptr::null_mut();
        assert_eq!(
            opnet_shapediff_compute(m, b, m, b, OpnetDiffKind::Area, &mut d),
            OpnetStatus::Ok
        );
        let mut kind = OpnetDiffKind::Extrinsic;
        assert_eq!(opnet_shapediff_kind(d, &mut kind), OpnetStatus::Ok);
        assert_eq!(kind, OpnetDiffKind::Area);
        let mut mat = [0.0; 16];
        assert_eq!(
            opnet_shapediff_matrix(d, mat.as_mut_ptr(), 16),
            OpnetStatus::Ok
        );
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((mat[i * 4 + j] - e).abs() < 1e-10);
            }
        }

        let mut half = ptr::null_mut();
        assert_eq!(
            opnet_interpolate(d, d, 0.5, OpnetScheme::Multiplicative, &mut half),
            OpnetStatus::Ok
        );
        let mut an = ptr::null_mut();
        assert_eq!(opnet_analogy(d, d, half, &mut an), OpnetStatus::Ok);
        assert_eq!(
            opnet_interpolate(d, d, 2.0, OpnetScheme::Linear, &mut half),
            OpnetStatus::InvalidArgument
        );

        let mut x = [0.0; 12];
        assert_eq!(
            opnet_recover_embedding(m, b, x.as_mut_ptr(), 12),
            OpnetStatus::Ok
        );
        let mut metrics = OpnetMetrics::default();
        assert_eq!(
            opnet_evaluate(m, x.as_ptr(), 4, &mut metrics),
            OpnetStatus::Ok
        );
        assert!(metrics.d_r < 1e-20 && metrics.d_v < 1e-10 && metrics.d_e < 1e-10);

        opnet_shapediff_free(an);
        opnet_shapediff_free(half);
        opnet_shapediff_free(d);
        opnet_basis_free(b);
        opnet_mesh_free(m);
    }
}

#[test]
fn matrix_wrap_and_file_roundtrip() {
    unsafe {
        let data = [2.0, 0.5, 0.5, 3.0];
        let mut d = ptr::null_mut();
        assert_eq!(
            opnet_shapediff_from_matrix(OpnetDiffKind::Conformal, data.as_ptr(), 2, &mut d),
            OpnetStatus::Ok
        );
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("d.sdiff").to_str().unwrap()).unwrap();
        assert_eq!(opnet_shapediff_save(d, path.as_ptr()), OpnetStatus::Ok);
        let mut e = ptr::null_mut();
        assert_eq!(opnet_shapediff_load(path.as_ptr(), &mut e), OpnetStatus::Ok);
        assert_eq!(opnet_shapediff_size(e), 2);
        let mut out = [0.0; 4];
        assert_eq!(
            opnet_shapediff_matrix(e, out.as_mut_ptr(), 4),
            OpnetStatus::Ok
        );
        assert_eq!(out, data);
        opnet_shapediff_free(d);
        opnet_shapediff_free(e);
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(opnet_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
