use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::Mesh;
use crate::error::invalid;
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        path.extension()
            .and_then(|e| e.to_str())
            .ok_or_else(|| invalid(format!("cannot infer mesh format of {}", path.display())))?
            .parse()
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            other => Err(invalid(format!("unsupported mesh format '{other}'"))),
        }
    }
}

/// Serializes vertices as f32.
pub fn export_mesh(mesh: &Mesh, format: MeshFormat) -> Result<Vec<u8>> {
    mesh.validate()?;
    Ok(match format {
        MeshFormat::Obj => {
            let mut s = String::new();
            for v in &mesh.vertices {
                writeln!(s, "v {} {} {}", v.x as f32, v.y as f32, v.z as f32).unwrap();
            }
            for t in &mesh.triangles {
                writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
            }
            s.into_bytes()
        }
        MeshFormat::Ply => {
            let header = format!(
                "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
                mesh.vertices.len(),
                mesh.triangles.len()
            );
            let mut out = header.into_bytes();
            for v in &mesh.vertices {
                for c in v.iter() {
                    out.extend_from_slice(&(*c as f32).to_le_bytes());
                }
            }
            for t in &mesh.triangles {
                out.push(3);
                for i in t {
                    out.extend_from_slice(&(*i as i32).to_le_bytes());
                }
            }
            out
        }
    })
}

pub fn import_mesh(bytes: &[u8], format: MeshFormat) -> Result<Mesh> {
    let mesh = match format {
        MeshFormat::Obj => import_obj(bytes)?,
        MeshFormat::Ply => import_ply(bytes)?,
    };
    mesh.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(mesh)
}

fn import_obj(bytes: &[u8]) -> Result<Mesh> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("OBJ is not UTF-8".into()))?;
    let mut mesh = Mesh::empty();
    let bad = |line: &str| Error::Format(format!("malformed OBJ line '{line}'"));
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f32> = it.take(3).map(|t| t.parse::<f32>()).collect::<std::result::Result<_, _>>().map_err(|_| bad(line))?;
                if c.len() != 3 {
                    return Err(bad(line));
                }
                mesh.vertices.push(Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64));
            }
            Some("f") => {
                let n = mesh.vertices.len() as i64;
                let idx: Vec<u32> = it
                    .map(|t| {
                        let i: i64 = t.split('/').next().unwrap_or("").parse().map_err(|_| bad(line))?;
                        let i = if i < 0 { n + i } else { i - 1 };
                        u32::try_from(i).map_err(|_| bad(line))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(bad(line));
                }
                for w in 1..idx.len() - 1 {
                    mesh.triangles.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

fn import_ply(bytes: &[u8]) -> Result<Mesh> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Format("PLY header not terminated".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Format("PLY header is not ASCII".into()))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(Error::Format("missing ply magic".into()));
    }
    let (mut nv, mut nf) = (0usize, 0usize);
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", f, _] if *f != "binary_little_endian" => {
                return Err(Error::Format(format!("unsupported PLY format {f}")))
            }
            ["element", "vertex", n] => nv = n.parse().map_err(|_| Error::Format("bad vertex count".into()))?,
            ["element", "face", n] => nf = n.parse().map_err(|_| Error::Format("bad face count".into()))?,
            _ => {}
        }
    }
    let mut data = &bytes[end + END.len()..];
    let mut take = |n: usize| -> Result<&[u8]> {
        if data.len() < n {
            return Err(Error::Format("PLY body truncated".into()));
        }
        let (head, rest) = data.split_at(n);
        data = rest;
        Ok(head)
    };
    let mut mesh = Mesh::empty();
    for _ in 0..nv {
        let b = take(12)?;
        let f = |k: usize| f32::from_le_bytes([b[4 * k], b[4 * k + 1], b[4 * k + 2], b[4 * k + 3]]) as f64;
        mesh.vertices.push(Vec3::new(f(0), f(1), f(2)));
    }
    for _ in 0..nf {
        let count = take(1)?[0] as usize;
        let b = take(4 * count)?;
        let idx: Vec<u32> = b.chunks_exact(4).map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as u32).collect();
        if count < 3 {
            return Err(Error::Format("PLY face with fewer than 3 vertices".into()));
        }
        for w in 1..count - 1 {
            mesh.triangles.push([idx[0], idx[w], idx[w + 1]]);
        }
    }
    Ok(mesh)
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    let bytes = export_mesh(mesh, MeshFormat::from_path(path)?)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let format = MeshFormat::from_path(path)?;
    import_mesh(&std::fs::read(path)?, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::cube_mesh;

    fn tri() -> Mesh {
        Mesh::new(vec![Vec3::zeros(), Vec3::new(1.5, 0.0, 0.0), Vec3::new(0.0, 0.1, 0.0)], vec![[0, 1, 2]])
    }

    #[test]
    fn single_triangle_obj() {
        let s = String::from_utf8(export_mesh(&tri(), MeshFormat::Obj).unwrap()).unwrap();
        assert_eq!(s.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert_eq!(s.lines().filter(|l| l.starts_with("f ")).collect::<Vec<_>>(), vec!["f 1 2 3"]);
    }

    #[test]
    fn round_trips_are_bit_exact() {
        let m = cube_mesh(Vec3::new(0.1, 0.2, 0.3), 7.77).transformed(&crate::kinematics::RigidTransform::from_axis_angle(
            &Vec3::new(0.3, 0.2, 0.1),
            Vec3::new(1.0 / 3.0, 0.0, 2.0),
        ));
        for fmt in [MeshFormat::Obj, MeshFormat::Ply] {
            let bytes = export_mesh(&m, fmt).unwrap();
            let back = import_mesh(&bytes, fmt).unwrap();
            assert_eq!(back.triangles, m.triangles);
            for (a, b) in back.vertices.iter().zip(&m.vertices) {
                assert_eq!(a.map(|v| v as f32), b.map(|v| v as f32));
            }
            assert_eq!(export_mesh(&back, fmt).unwrap(), bytes);
        }
        let ply = export_mesh(&m, MeshFormat::Ply).unwrap();
        let obj = export_mesh(&import_mesh(&ply, MeshFormat::Ply).unwrap(), MeshFormat::Obj).unwrap();
        assert_eq!(obj, export_mesh(&m, MeshFormat::Obj).unwrap());
    }

    #[test]
    fn empty_mesh_files() {
        for fmt in [MeshFormat::Obj, MeshFormat::Ply] {
            let bytes = export_mesh(&Mesh::empty(), fmt).unwrap();
            let back = import_mesh(&bytes, fmt).unwrap();
            assert!(back.vertices.is_empty() && back.triangles.is_empty());
        }
    }
}
