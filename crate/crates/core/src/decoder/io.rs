//! Text model files and dataset manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::net::{AdamConfig, Architecture, Layer, Params};
use super::{ChannelSet, DecoderModel, TrainingSample};
use crate::error::{Error, Result};
use crate::linalg::{self, parse_header_usize, Tokens};
use crate::meshio::load_mesh_auto;
use crate::shapediff::load_sdiff;

pub const MODEL_HEADER: &str = "OPNET-MODEL v1";

const LAYER_NAMES: [&str; 5] = ["conv", "dense0", "dense1", "dense2", "dense3"];

/// Serializes the model. Floats use 17 significant digits, so a
/// save/load round trip is exact.
pub fn format_model(m: &DecoderModel) -> String {
    let a = &m.arch;
    let mut s = String::new();
    let _ = writeln!(s, "{MODEL_HEADER}");
    let _ = writeln!(
        s,
        "arch {} {} {} {} {} {} {} {} {}",
        a.k0,
        a.n_channels,
        a.n_vertices,
        a.filters,
        a.kernel,
        a.stride,
        a.latent,
        a.hidden[0],
        a.hidden[1]
    );
    let _ = writeln!(s, "channels {}", m.channels);
    let _ = writeln!(s, "base_id {}", m.base_id);
    let _ = writeln!(s, "seed {}", m.seed);
    let _ = writeln!(
        s,
        "adam {:.16e} {:.16e} {:.16e} {:.16e}",
        m.adam.lr, m.adam.beta1, m.adam.beta2, m.adam.eps
    );
    s.push_str("mean\n");
    linalg::write_row(&mut s, m.channel_mean.iter().copied());
    s.push_str("std\n");
    linalg::write_row(&mut s, m.channel_std.iter().copied());
    for (name, l) in LAYER_NAMES.iter().zip(m.params.layers()) {
        let _ = writeln!(s, "layer {name} {} {}", l.n_out, l.n_in);
        for row in l.w.chunks_exact(l.n_in) {
            linalg::write_row(&mut s, row.iter().copied());
        }
        linalg::write_row(&mut s, l.b.iter().copied());
    }
    let _ = writeln!(s, "faces {}", m.faces.len());
    for f in &m.faces {
        let _ = writeln!(s, "{} {} {}", f[0], f[1], f[2]);
    }
    s
}

fn expect_key<'a>(t: &mut Tokens<'a>, key: &str, n_values: usize) -> Result<Vec<&'a str>> {
    let toks = t.line()?;
    if toks.first() != Some(&key) || toks.len() != n_values + 1 {
        return Err(Error::parse(
            t.line_no(),
            format!("expected `{key}` with {n_values} value(s)"),
        ));
    }
    Ok(toks[1..].to_vec())
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("bad value {tok:?}")))
}

pub fn parse_model(text: &str) -> Result<DecoderModel> {
    let mut t = Tokens::new(text);
    if t.line()?.join(" ") != MODEL_HEADER {
        return Err(Error::parse(
            t.line_no(),
            format!("expected `{MODEL_HEADER}`"),
        ));
    }
    let v = expect_key(&mut t, "arch", 9)?;
    let ln = t.line_no();
    let d: Vec<usize> = v
        .iter()
        .map(|x| parse_header_usize(Some(x), ln, "dimension"))
        .collect::<Result<_>>()?;
    let arch = Architecture {
        k0: d[0],
        n_channels: d[1],
        n_vertices: d[2],
        filters: d[3],
        kernel: d[4],
        stride: d[5],
        latent: d[6],
        hidden: [d[7], d[8]],
    };
    arch.validate().map_err(|e| Error::parse(ln, e))?;
    let channels: ChannelSet = expect_key(&mut t, "channels", 1)?[0].parse()?;
    if channels.len() != arch.n_channels {
        return Err(Error::parse(
            t.line_no(),
            "channel list disagrees with arch",
        ));
    }
    let base_id = expect_key(&mut t, "base_id", 1)?[0].to_string();
    let seed = num(expect_key(&mut t, "seed", 1)?[0], t.line_no())?;
    let ad = expect_key(&mut t, "adam", 4)?;
    let ln = t.line_no();
    let adam = AdamConfig {
        lr: num(ad[0], ln)?,
        beta1: num(ad[1], ln)?,
        beta2: num(ad[2], ln)?,
        eps: num(ad[3], ln)?,
    };
    expect_key(&mut t, "mean", 0)?;
    let channel_mean = t.vector(arch.input_len())?;
    expect_key(&mut t, "std", 0)?;
    let channel_std = t.vector(arch.input_len())?;

    let mut params = Params::zeros(&arch);
    for (name, l) in LAYER_NAMES.iter().zip(params.layers_mut()) {
        let v = expect_key(&mut t, "layer", 3)?;
        let ln = t.line_no();
        let (n_out, n_in): (usize, usize) = (num(v[1], ln)?, num(v[2], ln)?);
        if v[0] != *name || n_out != l.n_out || n_in != l.n_in {
            return Err(Error::parse(
                ln,
                format!("expected layer {name} {} {}", l.n_out, l.n_in),
            ));
        }
        *l = Layer {
            n_in,
            n_out,
            w: t.vector(n_in * n_out)?,
            b: t.vector(n_out)?,
        };
    }
    if !params.is_finite() {
        return Err(Error::parse(t.line_no(), "non-finite weights"));
    }
    let nf: usize = num(expect_key(&mut t, "faces", 1)?[0], t.line_no())?;
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let toks = t.line()?;
        let ln = t.line_no();
        if toks.len() != 3 {
            return Err(Error::parse(ln, "face needs three indices"));
        }
        let f = [num(toks[0], ln)?, num(toks[1], ln)?, num(toks[2], ln)?];
        if f.iter().any(|&i| i >= arch.n_vertices) {
            return Err(Error::parse(ln, "face index out of range"));
        }
        faces.push(f);
    }
    Ok(DecoderModel {
        arch,
        channels,
        base_id,
        seed,
        adam,
        channel_mean,
        channel_std,
        params,
        faces,
    })
}

pub fn save_model(m: &DecoderModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_model(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DecoderModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

/// One manifest line: a mesh and its Area, Conformal and Extrinsic files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub mesh: PathBuf,
    pub sdiffs: [PathBuf; 3],
}

/// Writes one whitespace-separated line per entry. Relative paths are
/// resolved against the manifest's directory when loading.
pub fn save_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::new();
    for e in entries {
        let _ = writeln!(
            s,
            "{} {} {} {}",
            e.mesh.display(),
            e.sdiffs[0].display(),
            e.sdiffs[1].display(),
            e.sdiffs[2].display()
        );
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads a manifest and every file it references. Blank lines and lines
/// starting with `#` are skipped.
pub fn load_manifest(
    path: impl AsRef<Path>,
) -> Result<Vec<(crate::meshio::TriMesh, TrainingSample)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::parse(
                i + 1,
                "expected mesh path and three SDIFF paths",
            ));
        }
        let mesh = load_mesh_auto(dir.join(toks[0]))?;
        let channels = toks[1..]
            .iter()
            .map(|p| load_sdiff(dir.join(p)))
            .collect::<Result<Vec<_>>>()?;
        let sample = TrainingSample::new(channels, mesh.vertices().to_vec())?;
        out.push((mesh, sample));
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_roundtrip_is_exact() {
        let arch = Architecture {
            k0: 9,
            n_channels: 2,
            n_vertices: 4,
            filters: 2,
            kernel: 5,
            stride: 2,
            latent: 3,
            hidden: [4, 5],
        };
        let mut m =
            DecoderModel::with_architecture(arch, "a,e".parse().unwrap(), 3, false).unwrap();
        m.faces = vec![[0, 1, 2], [0, 2, 3]];
        m.channel_mean[3] = std::f64::consts::PI;
        m.channel_std[1] = 1e-8;
        let text = format_model(&m);
        assert!(text.starts_with("OPNET-MODEL v1\n"));
        let back = parse_model(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(format_model(&back), text);
    }

    #[test]
    fn corrupt_model_rejected() {
        let arch = Architecture {
            k0: 5,
            n_channels: 1,
            n_vertices: 3,
            filters: 1,
            kernel: 5,
            stride: 1,
            latent: 2,
            hidden: [2, 2],
        };
        let m = DecoderModel::with_architecture(arch, "a".parse().unwrap(), 0, false).unwrap();
        let text = format_model(&m);
        assert!(parse_model(&text.replace("OPNET-MODEL v1", "OPNET-MODEL v2")).is_err());
        assert!(parse_model(&text.replace("layer dense1", "layer dense9")).is_err());
        let cut = &text[..text.len() / 2];
        assert!(matches!(parse_model(cut), Err(Error::Parse { .. })));
    }
}
