//! Procedural meshes used by the synthetic scenes and tests.

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{Plane, Vec3};
use crate::hull::convex_hull;
use crate::mesh::TriangleMesh;

/// Closed, outward-facing box of the given full extents, centered at the origin.
pub fn axis_box(size: Vec3) -> TriangleMesh {
    let h = size * 0.5;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let triangles = vec![
        [0, 2, 1], [1, 2, 3], // -z
        [4, 5, 6], [5, 7, 6], // +z
        [0, 1, 4], [1, 5, 4], // -y
        [2, 6, 3], [3, 6, 7], // +y
        [0, 4, 2], [2, 4, 6], // -x
        [1, 3, 5], [3, 7, 5], // +x
    ];
    TriangleMesh::new(vertices, triangles)
}

/// Unit square `[0,1]² × {0}` as two triangles facing +Z.
pub fn unit_square() -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// Geodesic sphere from a subdivided icosahedron.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut f: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid = alloc::collections::BTreeMap::new();
        let mut midpoint = |a: u32, b: u32, v: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                v.push(((v[a as usize] + v[b as usize]) * 0.5).normalize());
                (v.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(f.len() * 4);
        for [a, b, c] in f {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = next;
    }
    TriangleMesh::new(v.into_iter().map(|p| p * radius).collect(), f)
}

/// Closed prism approximating a cylinder along +Z, centered at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let n = segments.max(3) as u32;
    let mut v = Vec::new();
    for k in 0..n {
        let a = core::f64::consts::TAU * k as f64 / n as f64;
        let (s, c) = a.sin_cos();
        v.push(Vec3::new(radius * c, radius * s, -height / 2.0));
        v.push(Vec3::new(radius * c, radius * s, height / 2.0));
    }
    let bottom = v.len() as u32;
    v.push(Vec3::new(0.0, 0.0, -height / 2.0));
    v.push(Vec3::new(0.0, 0.0, height / 2.0));
    let top = bottom + 1;
    let mut f = Vec::new();
    for k in 0..n {
        let (b0, t0) = (2 * k, 2 * k + 1);
        let (b1, t1) = (2 * ((k + 1) % n), 2 * ((k + 1) % n) + 1);
        f.push([b0, b1, t1]);
        f.push([b0, t1, t0]);
        f.push([bottom, b1, b0]);
        f.push([top, t0, t1]);
    }
    TriangleMesh::new(v, f)
}

/// Convex block with a sloped top and one chamfered vertical edge, so it has no
/// rotational symmetry. Centered on its bounding box; `size` is the full box extent.
pub fn wedge_block(size: Vec3, slope: f64, chamfer: f64) -> TriangleMesh {
    let h = size * 0.5;
    let low_top = h.z - slope.clamp(0.0, 0.9) * size.z;
    let c = chamfer.clamp(0.0, 0.9) * size.x.min(size.y);
    let mut pts = Vec::new();
    for top in [false, true] {
        let zx = |x: f64| if top { if x > 0.0 { low_top } else { h.z } } else { -h.z };
        pts.push(Vec3::new(-h.x + c, -h.y, zx(-h.x)));
        pts.push(Vec3::new(-h.x, -h.y + c, zx(-h.x)));
        pts.push(Vec3::new(h.x, -h.y, zx(h.x)));
        pts.push(Vec3::new(h.x, h.y, zx(h.x)));
        pts.push(Vec3::new(-h.x, h.y, zx(-h.x)));
    }
    let mut m = convex_hull(&pts).expect("wedge block is a solid");
    // Recenter on the bounding box.
    let center = m.aabb().expect("non-empty").center();
    m.vertices.iter_mut().for_each(|v| *v -= center);
    m
}

/// Square patch of `plane` with half-width `half_extent` centered at the projection of `around`,
/// facing along the plane normal.
pub fn plane_patch(plane: &Plane, around: &Vec3, half_extent: f64) -> TriangleMesh {
    let n = plane.normal;
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    let w = n.cross(&u);
    let c = plane.project(around);
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|&(a, b)| c + u * (a * half_extent) + w * (b * half_extent))
        .collect();
    TriangleMesh::new(corners, vec![[0, 1, 2], [0, 2, 3]])
}
