use opnet::fmap::{self, PointToPointMap};
use opnet::meshio::{self, MeshFormat};
use opnet::shapediff::{self, DiffKind, ShapeDifference};
use opnet::{linalg, shapes, spectral};

#[test]
fn mesh_round_trips_through_off_and_obj() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = shapes::torus(1.0, 0.3, 12, 8);
    for (name, fmt) in [("t.off", MeshFormat::Off), ("t.obj", MeshFormat::Obj)] {
        let path = dir.path().join(name);
        meshio::save_mesh(&mesh, &path, fmt).unwrap();
        let back = meshio::load_mesh_auto(&path).unwrap();
        assert_eq!(back.faces(), mesh.faces());
        assert_eq!(back.vertices(), mesh.vertices());
    }
}

#[test]
fn basis_and_sdiff_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = shapes::icosphere(2, 1.0);
    let basis = spectral::eigenbasis(&mesh, 15).unwrap();
    let bp = dir.path().join("b.basis");
    spectral::save_basis(&basis, &bp).unwrap();
    let back = spectral::load_basis(&bp).unwrap();
    assert_eq!(back.eigenvalues, basis.eigenvalues);

    let c = fmap::fmap_from_p2p(
        &basis,
        &basis,
        &PointToPointMap::identity(mesh.n_vertices()),
    )
    .unwrap();
    let d = shapediff::area_difference(&c).unwrap();
    let sp = dir.path().join("a.sdiff");
    shapediff::save_sdiff(&d, &sp).unwrap();
    let back = shapediff::load_sdiff(&sp).unwrap();
    assert_eq!(back, d);
    assert!(linalg::max_abs((back.matrix() - linalg::identity(15)).as_ref()) < 1e-10);
}

#[test]
fn malformed_inputs_are_rejected() {
    let opts = meshio::LoadOptions::default();
    assert!(meshio::parse_mesh(
        "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n",
        MeshFormat::Off,
        &opts
    )
    .is_err());
    assert!(meshio::parse_mesh("OFF\n3 1 0\n0 0 0\n1 0 0\n", MeshFormat::Off, &opts).is_err());
    assert!(shapediff::parse_sdiff("garbage").is_err());
    let m = faer::Mat::<f64>::zeros(2, 3);
    assert!(ShapeDifference::new(DiffKind::Area, m, "b").is_err());
    assert!(ShapeDifference::new(DiffKind::Area, linalg::identity(2), "has space").is_err());
}
