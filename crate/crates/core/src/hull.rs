//! Incremental 3D convex hull.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::geometry::Vec3;
use crate::mesh::TriangleMesh;

/// Convex hull of `points` as a closed, outward-oriented mesh over the input points.
///
/// Returns `None` when the points are coplanar (or fewer than four).
pub fn convex_hull(points: &[Vec3]) -> Option<TriangleMesh> {
    if points.len() < 4 {
        return None;
    }
    let b = crate::geometry::Aabb::from_points(points.iter())?;
    let eps = b.extent().norm() * 1e-10;
    if !(eps > 0.0) {
        return None;
    }

    let i0 = (0..points.len()).min_by(|&a, &b| points[a].x.total_cmp(&points[b].x))?;
    let i1 = farthest(points, |p| (p - points[i0]).norm())?;
    let dir = (points[i1] - points[i0]).normalize();
    let i2 = farthest(points, |p| {
        let d = p - points[i0];
        (d - dir * d.dot(&dir)).norm()
    })?;
    let n = (points[i1] - points[i0]).cross(&(points[i2] - points[i0]));
    if n.norm() <= eps * eps {
        return None;
    }
    let n = n.normalize();
    let i3 = farthest(points, |p| (p - points[i0]).dot(&n).abs())?;
    if (points[i3] - points[i0]).dot(&n).abs() <= eps {
        return None;
    }

    let interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let add = |faces: &mut Vec<[usize; 3]>, f: [usize; 3]| {
        let nrm = (points[f[1]] - points[f[0]]).cross(&(points[f[2]] - points[f[0]]));
        if nrm.dot(&(interior - points[f[0]])) > 0.0 {
            faces.push([f[0], f[2], f[1]]);
        } else {
            faces.push(f);
        }
    };
    for f in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        add(&mut faces, f);
    }

    for (pi, p) in points.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                let nrm = (points[f[1]] - points[f[0]]).cross(&(points[f[2]] - points[f[0]]));
                let len = nrm.norm();
                len > 0.0 && (p - points[f[0]]).dot(&nrm) / len > eps
            })
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut edges = BTreeSet::new();
        for &fi in &visible {
            let f = faces[fi];
            for k in 0..3 {
                edges.insert((f[k], f[(k + 1) % 3]));
            }
        }
        let horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();
        let mut keep = Vec::with_capacity(faces.len());
        let mut vis = visible.iter().peekable();
        for (i, f) in faces.iter().enumerate() {
            if vis.peek() == Some(&&i) {
                vis.next();
            } else {
                keep.push(*f);
            }
        }
        faces = keep;
        for (a, b) in horizon {
            faces.push([a, b, pi]);
        }
    }

    // Compact to the vertices actually used.
    let mut remap = alloc::vec![u32::MAX; points.len()];
    let mut vertices = Vec::new();
    let triangles = faces
        .iter()
        .map(|f| {
            f.map(|i| {
                if remap[i] == u32::MAX {
                    remap[i] = vertices.len() as u32;
                    vertices.push(points[i]);
                }
                remap[i]
            })
        })
        .collect();
    Some(TriangleMesh::new(vertices, triangles))
}

fn farthest(points: &[Vec3], f: impl Fn(&Vec3) -> f64) -> Option<usize> {
    (0..points.len()).max_by(|&a, &b| f(&points[a]).total_cmp(&f(&points[b])))
}
