//! Triangle meshes: validation, cleaning, area-uniform sampling, volume and closure tests.

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, SimilarityTransform, Vec3};
use crate::raster::{ColorImage, Rgb};

/// Triangles at or below this area (m²) are removed by [`TriangleMesh::clean`].
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub colors: Option<Vec<Rgb>>,
    /// Per-vertex texture coordinates, `v` pointing up (OBJ convention).
    pub uvs: Option<Vec<[f64; 2]>>,
    pub texture: Option<ColorImage>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        TriangleMesh {
            vertices,
            triangles,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::Config(format!(
                "triangle {t:?} references a vertex beyond the {n} available"
            )));
        }
        if self.colors.as_ref().is_some_and(|c| c.len() != n) {
            return Err(Error::Config("vertex color count differs from vertex count".into()));
        }
        if self.uvs.as_ref().is_some_and(|c| c.len() != n) {
            return Err(Error::Config("uv count differs from vertex count".into()));
        }
        if self.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Config("mesh has non-finite vertices".into()));
        }
        Ok(())
    }

    /// Validates indices and drops triangles with area `≤ DEGENERATE_AREA`; returns how many were dropped.
    pub fn clean(&mut self) -> Result<usize> {
        self.validate()?;
        let before = self.triangles.len();
        let verts = &self.vertices;
        self.triangles
            .retain(|t| tri_area(&verts[t[0] as usize], &verts[t[1] as usize], &verts[t[2] as usize]) > DEGENERATE_AREA);
        Ok(before - self.triangles.len())
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        tri_area(&a, &b, &c)
    }

    /// Unit normal following the right-hand rule on the index order.
    pub fn triangle_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vec3::zeros)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    /// Area-weighted centroid of the surface.
    pub fn surface_centroid(&self) -> Option<Vec3> {
        let mut acc = Vec3::zeros();
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let area = tri_area(&a, &b, &c);
            acc += (a + b + c) * (area / 3.0);
            total += area;
        }
        (total > 0.0).then(|| acc / total)
    }

    /// Signed enclosed volume by the divergence theorem: `Σ a · (b × c) / 6`.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// True when every directed edge is matched by exactly one opposite edge (closed, consistently oriented).
    pub fn is_closed(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut edges: BTreeMap<(u32, u32), i32> = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a, b)).or_insert(0) += 1;
            }
        }
        edges
            .iter()
            .all(|(&(a, b), &n)| n == 1 && edges.get(&(b, a)) == Some(&1))
    }

    pub fn transformed(&self, t: &SimilarityTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| t.transform_point(v)).collect(),
            triangles: self.triangles.clone(),
            colors: self.colors.clone(),
            uvs: self.uvs.clone(),
            texture: self.texture.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> TriangleMesh {
        let mut m = self.clone();
        m.vertices.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Appends another mesh, re-indexing its triangles. Attributes survive only if both sides have them.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        match (self.colors.as_mut(), other.colors.as_ref()) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => self.colors = None,
        }
        match (self.uvs.as_mut(), other.uvs.as_ref()) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => self.uvs = None,
        }
    }
}

pub fn tri_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Surface samples together with the triangle each one was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub points: Vec<Vec3>,
    pub triangles: Vec<u32>,
}

/// Draws `n` area-uniform samples; deterministic for a given seed.
pub fn sample_surface_with_faces(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<SurfaceSamples> {
    if mesh.triangles.is_empty() {
        return Err(Error::Degenerate("cannot sample an empty mesh".into()));
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SurfaceSamples {
        points: Vec::with_capacity(n),
        triangles: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let x = rng.random::<f64>() * total;
        let t = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
        let [a, b, c] = mesh.corners(t);
        let r1 = rng.random::<f64>().sqrt();
        let r2 = rng.random::<f64>();
        out.points.push(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
        out.triangles.push(t as u32);
    }
    Ok(out)
}

/// `n` area-uniform surface samples as a point cloud.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    Ok(PointCloud::from_points(sample_surface_with_faces(mesh, n, seed)?.points))
}

/// Closest point to `p` on triangle `abc` (Ericson, Real-Time Collision Detection 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{axis_box, icosphere, unit_square};
    use alloc::vec;

    #[test]
    fn square_sampling_is_area_proportional() {
        // Unit square fanned into triangles of area 1/2, 1/4 and 1/4.
        let m = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.5, 1.0, 0.0),
            ],
            vec![[0, 1, 4], [1, 2, 4], [0, 4, 3]],
        );
        let areas: Vec<f64> = (0..3).map(|t| m.triangle_area(t)).collect();
        let n = 100_000;
        let s = sample_surface_with_faces(&m, n, 11).unwrap();
        let mut counts = [0usize; 3];
        for &t in &s.triangles {
            counts[t as usize] += 1;
        }
        for t in 0..3 {
            // Binomial oracle: expected n·p with relative tolerance 2%.
            let expect = n as f64 * areas[t];
            assert!(((counts[t] as f64 - expect) / expect).abs() < 0.02, "{counts:?} vs {areas:?}");
        }
        let sq = sample_surface(&unit_square(), n, 12).unwrap();
        assert_eq!(sq.len(), n);
    }

    #[test]
    fn single_triangle_samples_stay_inside() {
        let (a, b, c) = (Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        let m = TriangleMesh::new(vec![a, b, c], vec![[0, 1, 2]]);
        let s = sample_surface(&m, 5000, 1).unwrap();
        for p in &s.points {
            // Barycentric check in the xy plane: x/2 + y <= 1, x >= 0, y >= 0, z = 0.
            assert!(p.x >= -1e-15 && p.y >= -1e-15 && p.x / 2.0 + p.y <= 1.0 + 1e-12 && p.z == 0.0);
        }
        assert!(sample_surface(&m, 0, 1).unwrap().is_empty());
        assert!(matches!(sample_surface(&TriangleMesh::default(), 10, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn box_volume_and_closure() {
        let b = axis_box(Vec3::new(1.0, 2.0, 3.0));
        assert!(b.is_closed());
        assert!((b.signed_volume() - 6.0).abs() < 1e-12);
        let mut open = b.clone();
        open.triangles.pop();
        assert!(!open.is_closed());
        let s = icosphere(1.0, 3);
        assert!(s.is_closed());
        let rel = (s.signed_volume() - 4.0 / 3.0 * core::f64::consts::PI) / (4.0 / 3.0 * core::f64::consts::PI);
        assert!(rel.abs() < 0.02, "{rel}");
    }

    #[test]
    fn clean_drops_degenerate_and_rejects_bad_indices() {
        let mut m = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::x() * 2.0],
            vec![[0, 1, 2], [0, 1, 3]],
        );
        assert_eq!(m.clean().unwrap(), 1);
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
        m.triangles.push([0, 1, 9]);
        assert!(m.clean().is_err());
    }

    #[test]
    fn closest_point_matches_dense_search() {
        let (a, b, c) = (Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.2, 0.0), Vec3::new(0.3, 0.9, 0.4));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = Vec3::new(rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0), rng.random_range(-1.0..1.0));
            let q = closest_point_on_triangle(&p, &a, &b, &c);
            // Oracle: dense barycentric grid.
            let mut best = f64::INFINITY;
            let n = 300;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                    let x = a + (b - a) * u + (c - a) * v;
                    best = best.min((x - p).norm());
                }
            }
            assert!((q - p).norm() <= best + 1e-12);
            assert!((q - p).norm() >= best - 5e-3);
        }
    }
}
