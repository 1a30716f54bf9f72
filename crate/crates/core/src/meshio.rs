//! Triangle meshes: loading, validation, saving and elementary measures.
//!
//! Two plain-text formats are understood. OFF files carry an `OFF` header,
//! a counts line and then vertex and face records; faces must be triangles
//! (`3 i j k`, 0-based). OBJ files contribute only `v x y z` and `f i j k`
//! records (1-based, `i/t/n` tokens accepted); everything else is skipped.
//! In both formats `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use faer::Mat;
use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Faces with area at or below this value are rejected.
pub const DEFAULT_DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Ok(MeshFormat::Off),
            Some("obj") => Ok(MeshFormat::Obj),
            _ => Err(Error::InvalidArgument(format!(
                "cannot infer mesh format of {}",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub degenerate_area: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            degenerate_area: DEFAULT_DEGENERATE_AREA,
        }
    }
}

/// A validated triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        Self::with_options(vertices, faces, &LoadOptions::default())
    }

    pub fn with_options(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
        opts: &LoadOptions,
    ) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &idx in f {
                if idx >= n {
                    return Err(Error::IndexOutOfRange {
                        face: fi,
                        index: idx,
                        n_vertices: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::RepeatedIndex { face: fi });
            }
        }
        let mesh = TriMesh { vertices, faces };
        for fi in 0..mesh.faces.len() {
            let area = mesh.face_area(fi);
            if !(area > opts.degenerate_area) {
                return Err(Error::DegenerateFace { face: fi, area });
            }
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Same connectivity, new vertex positions. Degenerate faces are rejected.
    pub fn with_vertices(&self, vertices: Vec<Point3<f64>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::dims(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        TriMesh::new(vertices, self.faces.clone())
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Result<Self> {
        self.with_vertices(self.vertices.iter().map(f).collect())
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        self.map_vertices(|p| Point3::from(p.coords * s))
    }

    /// Every face with its winding reversed.
    pub fn flipped(&self) -> Self {
        TriMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    /// n×3 coordinate matrix.
    pub fn coords(&self) -> Mat<f64> {
        Mat::from_fn(self.vertices.len(), 3, |i, j| self.vertices[i][j])
    }

    pub fn face_normal(&self, fi: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[fi];
        let (pa, pb, pc) = (&self.vertices[a], &self.vertices[b], &self.vertices[c]);
        (pb - pa).cross(&(pc - pa))
    }

    pub fn face_area(&self, fi: usize) -> f64 {
        0.5 * self.face_normal(fi).norm()
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len()).map(|f| self.face_area(f)).collect()
    }

    pub fn surface_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    /// Diagonal of the lumped mass matrix: a third of the incident face area
    /// at every vertex.
    pub fn vertex_areas(&self) -> Result<Vec<f64>> {
        let mut areas = vec![0.0; self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            let a = self.face_area(fi) / 3.0;
            for &v in f {
                areas[v] += a;
            }
        }
        if let Some(i) = areas.iter().position(|&a| a <= 0.0) {
            return Err(Error::IsolatedVertex(i));
        }
        Ok(areas)
    }

    /// Signed volume enclosed by the surface (divergence theorem).
    pub fn volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let (pa, pb, pc) = (
                    &self.vertices[a].coords,
                    &self.vertices[b].coords,
                    &self.vertices[c].coords,
                );
                pa.dot(&pb.cross(pc))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Undirected edges as `(min, max)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.edge_lengths().into_keys().collect()
    }

    pub fn edge_lengths(&self) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        for f in &self.faces {
            for e in 0..3 {
                let (i, j) = (f[e], f[(e + 1) % 3]);
                let key = (i.min(j), i.max(j));
                out.entry(key)
                    .or_insert_with(|| (self.vertices[i] - self.vertices[j]).norm());
            }
        }
        out
    }

    /// Axis-aligned bounding box diagonal length.
    pub fn bbox_diagonal(&self) -> f64 {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = lo.inf(&p.coords);
            hi = hi.sup(&p.coords);
        }
        (hi - lo).norm()
    }
}

/// Volume, free-function spelling.
pub fn mesh_volume(mesh: &TriMesh) -> f64 {
    mesh.volume()
}

pub fn vertex_areas(mesh: &TriMesh) -> Result<Vec<f64>> {
    mesh.vertex_areas()
}

pub fn edge_lengths(mesh: &TriMesh) -> BTreeMap<(usize, usize), f64> {
    mesh.edge_lengths()
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriMesh> {
    load_mesh_with(path, format, &LoadOptions::default())
}

/// Loads a mesh, inferring the format from the extension.
pub fn load_mesh_auto(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    load_mesh(path, MeshFormat::from_path(path)?)
}

pub fn load_mesh_with(
    path: impl AsRef<Path>,
    format: MeshFormat,
    opts: &LoadOptions,
) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, format, opts)
}

pub fn parse_mesh(text: &str, format: MeshFormat, opts: &LoadOptions) -> Result<TriMesh> {
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::Obj => parse_obj(text)?,
    };
    TriMesh::with_options(vertices, faces, opts)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::parse(line, format!("expected a number, found {tok:?}")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::parse(line, format!("expected an index, found {tok:?}")))
}

type RawMesh = (Vec<Point3<f64>>, Vec<[usize; 3]>);

fn parse_off(text: &str) -> Result<RawMesh> {
    // (line number, tokens) for every non-empty line
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            (
                i + 1,
                strip_comment(l).split_whitespace().collect::<Vec<_>>(),
            )
        })
        .filter(|(_, t)| !t.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, "empty file"))?;
    if header[0] != "OFF" {
        return Err(Error::parse(ln, "missing OFF header"));
    }
    let counts: Vec<&str> = if header.len() > 1 {
        header[1..].to_vec()
    } else {
        lines
            .next()
            .ok_or_else(|| Error::parse(ln, "missing counts line"))?
            .1
    };
    if counts.len() < 2 {
        return Err(Error::parse(ln, "counts line needs vertex and face counts"));
    }
    let nv = parse_usize(counts[0], ln)?;
    let nf = parse_usize(counts[1], ln)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, t) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "unexpected end of file in vertex block"))?;
        if t.len() < 3 {
            return Err(Error::parse(ln, "vertex needs three coordinates"));
        }
        vertices.push(Point3::new(
            parse_f64(t[0], ln)?,
            parse_f64(t[1], ln)?,
            parse_f64(t[2], ln)?,
        ));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, t) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "unexpected end of file in face block"))?;
        if t.len() < 4 || t[0] != "3" {
            return Err(Error::parse(
                ln,
                "only triangle faces (3 i j k) are supported",
            ));
        }
        faces.push([
            parse_usize(t[1], ln)?,
            parse_usize(t[2], ln)?,
            parse_usize(t[3], ln)?,
        ]);
    }
    Ok((vertices, faces))
}

fn parse_obj(text: &str) -> Result<RawMesh> {
    let mut vertices = Vec::new();
    let mut raw_faces: Vec<(usize, [i64; 3])> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let t: Vec<&str> = strip_comment(line).split_whitespace().collect();
        match t.first() {
            Some(&"v") => {
                if t.len() < 4 {
                    return Err(Error::parse(ln, "vertex needs three coordinates"));
                }
                vertices.push(Point3::new(
                    parse_f64(t[1], ln)?,
                    parse_f64(t[2], ln)?,
                    parse_f64(t[3], ln)?,
                ));
            }
            Some(&"f") => {
                if t.len() != 4 {
                    return Err(Error::parse(ln, "only triangle faces are supported"));
                }
                let mut idx = [0i64; 3];
                for (slot, tok) in idx.iter_mut().zip(&t[1..]) {
                    let head = tok.split('/').next().unwrap_or("");
                    *slot = head
                        .parse::<i64>()
                        .map_err(|_| Error::parse(ln, format!("bad face index {tok:?}")))?;
                    if *slot == 0 {
                        return Err(Error::parse(ln, "OBJ indices are 1-based"));
                    }
                }
                raw_faces.push((ln, idx));
            }
            _ => {}
        }
    }
    let n = vertices.len() as i64;
    let faces = raw_faces
        .into_iter()
        .enumerate()
        .map(|(fi, (_, idx))| {
            let mut out = [0usize; 3];
            for (o, &r) in out.iter_mut().zip(&idx) {
                // negative indices count back from the end
                let z = if r < 0 { n + r } else { r - 1 };
                if z < 0 {
                    return Err(Error::IndexOutOfRange {
                        face: fi,
                        index: r.unsigned_abs() as usize,
                        n_vertices: n as usize,
                    });
                }
                *o = z as usize;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((vertices, faces))
}

pub fn format_off(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF");
    let _ = writeln!(s, "{} {} 0", mesh.n_vertices(), mesh.n_faces());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

pub fn format_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for p in &mesh.vertices {
        let _ = writeln!(s, "v {:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        MeshFormat::Off => format_off(mesh),
        MeshFormat::Obj => format_obj(mesh),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes an OBJ with the given vertex positions and connectivity, without
/// validating face areas (network outputs may collapse triangles).
pub fn save_points_obj(
    points: &[Point3<f64>],
    faces: &[[usize; 3]],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    for p in points {
        let _ = writeln!(s, "v {:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for f in faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    const SQUARE_OFF: &str =
        "OFF\n# unit square\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n";

    #[test]
    fn off_unit_square() {
        let m = parse_mesh(SQUARE_OFF, MeshFormat::Off, &LoadOptions::default()).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_faces(), 2);
        assert_eq!(m.faces()[1], [0, 2, 3]);
    }

    #[test]
    fn obj_index_out_of_range() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1 2 9\n";
        let err = parse_mesh(src, MeshFormat::Obj, &LoadOptions::default()).unwrap_err();
        assert!(
            matches!(err, Error::IndexOutOfRange { index: 8, .. }),
            "{err}"
        );
    }

    #[test]
    fn obj_skips_normals_and_textures() {
        let src = "o sq\nv 0 0 0\nv 1 0 0\nv 1 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/1/1 3/1/1\n";
        let m = parse_mesh(src, MeshFormat::Obj, &LoadOptions::default()).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn off_collinear_face_is_degenerate() {
        let src = "OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n";
        let err = parse_mesh(src, MeshFormat::Off, &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFace { face: 0, .. }));
    }

    #[test]
    fn degenerate_threshold_is_configurable() {
        let src = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1e-3 0\n3 0 1 2\n";
        assert!(parse_mesh(src, MeshFormat::Off, &LoadOptions::default()).is_ok());
        let strict = LoadOptions {
            degenerate_area: 1e-3,
        };
        assert!(parse_mesh(src, MeshFormat::Off, &strict).is_err());
    }

    #[test]
    fn repeated_index_rejected() {
        let err = TriMesh::new(shapes::unit_square().vertices().to_vec(), vec![[0, 0, 1]]);
        assert!(matches!(err, Err(Error::RepeatedIndex { face: 0 })));
    }

    #[test]
    fn malformed_off_is_parse_error() {
        for src in [
            "",
            "PLY\n",
            "OFF\n2 1\n0 0 0\n",
            "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n",
        ] {
            let err = parse_mesh(src, MeshFormat::Off, &LoadOptions::default()).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{src:?} -> {err}");
        }
    }

    #[test]
    fn square_vertex_areas() {
        let a = shapes::unit_square().vertex_areas().unwrap();
        let want = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0];
        for (x, y) in a.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_vertex() {
        let mut v = shapes::unit_square().vertices().to_vec();
        v.push(Point3::new(5.0, 5.0, 5.0));
        let m = TriMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        assert!(matches!(m.vertex_areas(), Err(Error::IsolatedVertex(4))));
    }

    #[test]
    fn vertex_areas_scale_quadratically() {
        let m = shapes::icosphere(1, 1.0);
        let a = m.vertex_areas().unwrap();
        let b = m.scaled(3.0).unwrap().vertex_areas().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y / x - 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cube_volume() {
        let c = shapes::unit_cube();
        assert!((c.volume() - 1.0).abs() < 1e-12);
        assert!((c.flipped().volume() + 1.0).abs() < 1e-12);
        assert!((c.scaled(2.0).unwrap().volume() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn edge_lengths_square_and_triangle() {
        let e = shapes::unit_square().edge_lengths();
        assert_eq!(e.len(), 5);
        assert!((e[&(0, 1)] - 1.0).abs() < 1e-15);
        assert!((e[&(0, 2)] - 2f64.sqrt()).abs() < 1e-15);

        let tri = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let mut l: Vec<f64> = tri.edge_lengths().into_values().collect();
        l.sort_by(f64::total_cmp);
        assert_eq!(l.len(), 3);
        assert!((l[0] - 1.0).abs() < 1e-15 && (l[1] - 1.0).abs() < 1e-15);
        assert!((l[2] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn edge_lengths_scale_linearly() {
        let m = shapes::icosphere(1, 1.0);
        let s = m.scaled(0.25).unwrap();
        for (a, b) in m.edge_lengths().values().zip(s.edge_lengths().values()) {
            assert!((b / a - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(
            MeshFormat::from_path(Path::new("a/b.OFF")).unwrap(),
            MeshFormat::Off
        );
        assert_eq!(
            MeshFormat::from_path(Path::new("x.obj")).unwrap(),
            MeshFormat::Obj
        );
        assert!(MeshFormat::from_path(Path::new("x.ply")).is_err());
    }
}
