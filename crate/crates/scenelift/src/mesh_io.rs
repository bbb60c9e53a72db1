//! Triangle meshes as Wavefront OBJ, point clouds as ASCII PLY.
//!
//! OBJ output writes `v x y z` (plus `r g b` in `[0, 1]` when the mesh has vertex colors),
//! `vt u v` when it has UVs, and 1-based `f` records. A texture is written as a PNG next to
//! the OBJ and referenced through an MTL file with `map_Kd`. Floats use Rust's shortest
//! round-trip formatting, so output is deterministic and reloads bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use scenelift_core::cloud::PointCloud;
use scenelift_core::geometry::Vec3;
use scenelift_core::mesh::TriangleMesh;

use crate::error::{Error, Result};
use crate::raster_io::{ensure_parent, read_color, write_color};

fn to_rgb(c: &[f64]) -> [u8; 3] {
    [0, 1, 2].map(|k| (c[k].clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Loads every model in the file into one mesh and drops degenerate triangles.
pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let topo = tobj::LoadOptions {
        triangulate: true,
        ignore_points: true,
        ignore_lines: true,
        ..Default::default()
    };
    let (models, materials) = tobj::load_obj(path, &topo).map_err(|e| Error::format(path, e))?;
    let has_uv = models.iter().any(|m| !m.mesh.texcoords.is_empty());
    // Textured meshes need one index stream, which splits vertices along UV seams.
    let (models, materials) = if has_uv {
        let single = tobj::LoadOptions {
            single_index: true,
            ..topo
        };
        tobj::load_obj(path, &single).map_err(|e| Error::format(path, e))?
    } else {
        (models, materials)
    };
    let mut mesh = TriangleMesh::default();
    let all_colored = models.iter().all(|m| !m.mesh.vertex_color.is_empty());
    let all_uv = has_uv && models.iter().all(|m| !m.mesh.texcoords.is_empty());
    let mut colors = Vec::new();
    let mut uvs = Vec::new();
    for m in &models {
        let base = mesh.vertices.len() as u32;
        mesh.vertices
            .extend(m.mesh.positions.chunks_exact(3).map(|p| Vec3::new(p[0], p[1], p[2])));
        mesh.triangles
            .extend(m.mesh.indices.chunks_exact(3).map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        if all_colored {
            colors.extend(m.mesh.vertex_color.chunks_exact(3).map(to_rgb));
        }
        if all_uv {
            uvs.extend(m.mesh.texcoords.chunks_exact(2).map(|t| [t[0], t[1]]));
        }
    }
    if all_colored {
        mesh.colors = Some(colors);
    }
    if all_uv {
        let texture = materials
            .ok()
            .and_then(|mats| mats.into_iter().find_map(|m| m.diffuse_texture))
            .map(|t| path.parent().unwrap_or(Path::new(".")).join(t));
        if let Some(tex) = texture {
            mesh.uvs = Some(uvs);
            mesh.texture = Some(read_color(&tex)?);
        }
    }
    if mesh.triangles.is_empty() {
        return Err(Error::format(path, "no triangles"));
    }
    let dropped = mesh.clean().map_err(|e| Error::format(path, e))?;
    if dropped > 0 {
        log::debug!("{}: dropped {dropped} degenerate triangles", path.display());
    }
    Ok(mesh)
}

pub fn encode_obj(mesh: &TriangleMesh, mtllib: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(lib) = mtllib {
        let _ = writeln!(s, "mtllib {lib}\nusemtl textured");
    }
    for (k, v) in mesh.vertices.iter().enumerate() {
        match &mesh.colors {
            Some(c) => {
                let [r, g, b] = c[k].map(|x| x as f64 / 255.0);
                let _ = writeln!(s, "v {} {} {} {r} {g} {b}", v.x, v.y, v.z);
            }
            None => {
                let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
            }
        }
    }
    let with_uv = mtllib.is_some() && mesh.uvs.is_some();
    if let (true, Some(uvs)) = (with_uv, &mesh.uvs) {
        for t in uvs {
            let _ = writeln!(s, "vt {} {}", t[0], t[1]);
        }
    }
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| i + 1);
        if with_uv {
            let _ = writeln!(s, "f {a}/{a} {b}/{b} {c}/{c}");
        } else {
            let _ = writeln!(s, "f {a} {b} {c}");
        }
    }
    s
}

/// Writes `path`, plus `<stem>.mtl` and `<stem>.png` when the mesh is textured.
pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    ensure_parent(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
    let textured = mesh.uvs.is_some() && mesh.texture.is_some();
    let mtllib = textured.then(|| format!("{stem}.mtl"));
    if let (true, Some(tex)) = (textured, &mesh.texture) {
        let dir = path.parent().unwrap_or(Path::new("."));
        let png = format!("{stem}.png");
        write_color(&dir.join(&png), tex)?;
        let mtl = format!("newmtl textured\nKd 1 1 1\nmap_Kd {png}\n");
        let mtl_path = dir.join(mtllib.as_deref().expect("set when textured"));
        fs::write(&mtl_path, mtl).map_err(|e| Error::io(&mtl_path, e))?;
    }
    fs::write(path, encode_obj(mesh, mtllib.as_deref())).map_err(|e| Error::io(path, e))
}

/// ASCII PLY with `x y z` per point.
pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    ensure_parent(path)?;
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    );
    for p in &cloud.points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use scenelift_core::primitives::wedge_block;

    #[test]
    fn obj_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = wedge_block(Vec3::new(0.3, 0.2, 0.1), 0.3, 0.3);
        m.colors = Some(m.vertices.iter().enumerate().map(|(k, _)| [k as u8 * 10, 0, 255]).collect());
        let p = dir.path().join("w.obj");
        write_obj(&p, &m).unwrap();
        let back = read_obj(&p).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.colors, m.colors);
    }
}
