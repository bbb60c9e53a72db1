//! Deterministic software rasterizer.
//!
//! Conventions:
//! - pixel `(i, j)` is sampled at its center `(i + 0.5, j + 0.5)`;
//! - triangles are clipped against the near plane, then rasterized with edge functions in
//!   screen space; no back-face culling;
//! - fill rule: a pixel center exactly on an edge belongs to the triangle only if the edge,
//!   walked in the triangle's positive winding, points down (`dy > 0`) or, when horizontal,
//!   right (`dy == 0, dx > 0`). Every shared edge is owned by exactly one side. Edge
//!   functions are evaluated with endpoints in a canonical order, so a shared edge gives
//!   bit-identical (negated) values from both triangles;
//! - depth is camera-space Z, interpolated as `1/z` in screen space (exact for planar
//!   triangles); attributes are interpolated perspective-correctly;
//! - z-test is strict `<` on f64 depth: among equal depths the first drawn item wins;
//! - output depth is stored as f32 meters, with `0.0` meaning no geometry unless the
//!   background policy asks for the far plane.

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::geometry::{SimilarityTransform, Vec3};
use crate::mesh::TriangleMesh;
use crate::raster::{ColorImage, DepthImage, Raster, Rgb, INVALID_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shading {
    /// One color per item.
    Flat,
    /// Interpolated per-vertex colors, falling back to flat.
    VertexColor,
    /// Nearest-texel lookup through per-vertex UVs, falling back to vertex colors.
    Textured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundPolicy {
    /// Uncovered pixels get depth `0.0` (invalid).
    InvalidDepth,
    /// Uncovered pixels get the far-plane depth.
    FarPlane,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderSettings {
    pub width: usize,
    pub height: usize,
    pub shading: Shading,
    pub background_policy: BackgroundPolicy,
    /// Near clipping distance along camera Z (meters).
    pub near: f64,
    /// Far plane (meters); fragments beyond it are discarded.
    pub far: f64,
    pub clear_color: Rgb,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            width: 640,
            height: 480,
            shading: Shading::VertexColor,
            background_policy: BackgroundPolicy::InvalidDepth,
            near: 0.01,
            far: 100.0,
            clear_color: [0, 0, 0],
        }
    }
}

impl RenderSettings {
    pub fn sized(width: usize, height: usize) -> Self {
        RenderSettings {
            width,
            height,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("render dimensions must be > 0".into()));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::Config("render clip planes need 0 < near < far".into()));
        }
        Ok(())
    }
}

/// A mesh placed in the world.
#[derive(Debug, Clone, Copy)]
pub struct RenderItem<'a> {
    /// Written to the id raster; use 0 for items that should not be labeled.
    pub id: u16,
    pub mesh: &'a TriangleMesh,
    pub pose: SimilarityTransform,
    pub color: Rgb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: ColorImage,
    pub depth: DepthImage,
    /// Id of the item visible at each pixel, 0 where nothing (or an unlabeled item) is visible.
    pub ids: Raster<u16>,
    /// Which pixels received any fragment.
    pub covered: Raster<bool>,
}

/// Clip-space vertex: camera position plus barycentric weights on the source triangle.
#[derive(Debug, Clone, Copy)]
struct ClipVertex {
    p: Vec3,
    w: [f64; 3],
}

fn lerp(a: &ClipVertex, b: &ClipVertex, t: f64) -> ClipVertex {
    ClipVertex {
        p: a.p + (b.p - a.p) * t,
        w: [0, 1, 2].map(|k| a.w[k] + (b.w[k] - a.w[k]) * t),
    }
}

/// Sutherland–Hodgman against `z ≥ near`.
fn clip_near(tri: [ClipVertex; 3], near: f64) -> Vec<ClipVertex> {
    if tri.iter().all(|v| v.p.z >= near) {
        return tri.to_vec();
    }
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let (a, b) = (&tri[k], &tri[(k + 1) % 3]);
        let (ain, bin) = (a.p.z >= near, b.p.z >= near);
        if ain {
            out.push(*a);
        }
        if ain != bin {
            let t = (near - a.p.z) / (b.p.z - a.p.z);
            let mut v = lerp(a, b, t);
            v.p.z = near;
            out.push(v);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct ScreenVertex {
    x: f64,
    y: f64,
    inv_z: f64,
    w: [f64; 3],
}

/// Edge function of `a → b` at `p`, evaluated with the endpoints in canonical order.
fn edge(a: &ScreenVertex, b: &ScreenVertex, px: f64, py: f64) -> f64 {
    let swap = (b.x, b.y) < (a.x, a.y);
    let (a, b) = if swap { (b, a) } else { (a, b) };
    let e = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
    if swap {
        -e
    } else {
        e
    }
}

fn owns_edge(a: &ScreenVertex, b: &ScreenVertex) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    dy > 0.0 || (dy == 0.0 && dx > 0.0)
}

struct Target<'a> {
    settings: &'a RenderSettings,
    zbuf: Vec<f64>,
    out: RenderOutput,
}

impl Target<'_> {
    fn fragment(&mut self, i: usize, j: usize, z: f64, id: u16, shade: impl FnOnce() -> Rgb) {
        let k = j * self.settings.width + i;
        if !(z < self.zbuf[k]) || z > self.settings.far {
            return;
        }
        self.zbuf[k] = z;
        self.out.color.set(i, j, shade());
        self.out.ids.set(i, j, id);
        self.out.covered.set(i, j, true);
    }
}

/// Renders `items` in order from `camera`.
pub fn render(camera: &Camera, items: &[RenderItem<'_>], settings: &RenderSettings) -> Result<RenderOutput> {
    settings.validate()?;
    camera.intrinsics.validate()?;
    crate::raster::check_dims("render settings vs intrinsics", camera.intrinsics.dims(), (settings.width, settings.height))?;
    let (w, h) = (settings.width, settings.height);
    let mut target = Target {
        settings,
        zbuf: alloc::vec![f64::INFINITY; w * h],
        out: RenderOutput {
            color: Raster::filled(w, h, settings.clear_color),
            depth: Raster::filled(w, h, INVALID_DEPTH),
            ids: Raster::filled(w, h, 0),
            covered: Raster::filled(w, h, false),
        },
    };
    let cam_from_world = camera.camera_from_world();
    for item in items {
        item.mesh.validate()?;
        let to_cam: Vec<Vec3> = item
            .mesh
            .vertices
            .iter()
            .map(|v| cam_from_world.transform_point(&item.pose.transform_point(v)))
            .collect();
        for (t, tri) in item.mesh.triangles.iter().enumerate() {
            let corners = [0, 1, 2].map(|k| {
                let mut w = [0.0; 3];
                w[k] = 1.0;
                ClipVertex {
                    p: to_cam[tri[k] as usize],
                    w,
                }
            });
            let poly = clip_near(corners, settings.near);
            if poly.len() < 3 {
                continue;
            }
            let k = &camera.intrinsics;
            let screen: Vec<ScreenVertex> = poly
                .iter()
                .map(|v| ScreenVertex {
                    x: k.fx * v.p.x / v.p.z + k.cx,
                    y: k.fy * v.p.y / v.p.z + k.cy,
                    inv_z: 1.0 / v.p.z,
                    w: v.w,
                })
                .collect();
            for f in 1..screen.len() - 1 {
                raster_triangle(&mut target, [screen[0], screen[f], screen[f + 1]], item, t);
            }
        }
    }
    let Target { zbuf, mut out, .. } = target;
    for (d, z) in out.depth.data_mut().iter_mut().zip(&zbuf) {
        *d = if z.is_finite() {
            *z as f32
        } else {
            match settings.background_policy {
                BackgroundPolicy::InvalidDepth => INVALID_DEPTH,
                BackgroundPolicy::FarPlane => settings.far as f32,
            }
        };
    }
    Ok(out)
}

fn raster_triangle(target: &mut Target<'_>, mut v: [ScreenVertex; 3], item: &RenderItem<'_>, tri: usize) {
    let mut area = edge(&v[0], &v[1], v[2].x, v[2].y);
    if area == 0.0 || !area.is_finite() {
        return;
    }
    if area < 0.0 {
        v.swap(1, 2);
        area = -area;
    }
    let (w, h) = (target.settings.width, target.settings.height);
    let xmin = v.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let xmax = v.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let ymin = v.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let ymax = v.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    // Pixel i is covered only if its center i + 0.5 lies in [min, max].
    let span = |lo: f64, hi: f64, n: usize| -> Option<(usize, usize)> {
        let a = (lo - 0.5).ceil().max(0.0);
        let b = (hi - 0.5).floor().min(n as f64 - 1.0);
        (a <= b).then(|| (a as usize, b as usize))
    };
    let (Some((i0, i1)), Some((j0, j1))) = (span(xmin, xmax, w), span(ymin, ymax, h)) else {
        return;
    };
    let mode = effective(target.settings.shading, available_shading(item));
    let edges = [(1, 2), (2, 0), (0, 1)];
    let owned = edges.map(|(a, b)| owns_edge(&v[a], &v[b]));
    for j in j0..=j1 {
        let py = j as f64 + 0.5;
        for i in i0..=i1 {
            let px = i as f64 + 0.5;
            let mut b = [0.0; 3];
            let mut inside = true;
            for (k, &(a, c)) in edges.iter().enumerate() {
                let e = edge(&v[a], &v[c], px, py);
                if e < 0.0 || (e == 0.0 && !owned[k]) {
                    inside = false;
                    break;
                }
                b[k] = e / area;
            }
            if !inside {
                continue;
            }
            let inv_z = b[0] * v[0].inv_z + b[1] * v[1].inv_z + b[2] * v[2].inv_z;
            if !(inv_z > 0.0) {
                continue;
            }
            let z = 1.0 / inv_z;
            target.fragment(i, j, z, item.id, || {
                // Perspective-correct weights on the source triangle.
                let mut lam = [0.0; 3];
                for k in 0..3 {
                    let s = b[k] * v[k].inv_z * z;
                    for (l, wl) in lam.iter_mut().zip(v[k].w) {
                        *l += s * wl;
                    }
                }
                shade(item, tri, lam, mode)
            });
        }
    }
}

/// Richest shading the item's mesh has data for.
fn available_shading(item: &RenderItem<'_>) -> Shading {
    let m = item.mesh;
    if m.uvs.is_some() && m.texture.is_some() {
        Shading::Textured
    } else if m.colors.is_some() {
        Shading::VertexColor
    } else {
        Shading::Flat
    }
}

fn shade(item: &RenderItem<'_>, tri: usize, lam: [f64; 3], available: Shading) -> Rgb {
    let m = item.mesh;
    let idx = m.triangles[tri].map(|i| i as usize);
    match available {
        Shading::Textured => {
            let (uvs, tex) = (m.uvs.as_ref().unwrap(), m.texture.as_ref().unwrap());
            let u = (0..3).map(|k| lam[k] * uvs[idx[k]][0]).sum::<f64>();
            let v = (0..3).map(|k| lam[k] * uvs[idx[k]][1]).sum::<f64>();
            let x = (u * tex.width() as f64).floor().clamp(0.0, tex.width() as f64 - 1.0) as usize;
            // Texture rows run top to bottom while v grows upward.
            let y = ((1.0 - v) * tex.height() as f64).floor().clamp(0.0, tex.height() as f64 - 1.0) as usize;
            *tex.get(x, y)
        }
        Shading::VertexColor => {
            let c = m.colors.as_ref().unwrap();
            [0, 1, 2].map(|ch| {
                let x: f64 = (0..3).map(|k| lam[k] * c[idx[k]][ch] as f64).sum();
                x.round().clamp(0.0, 255.0) as u8
            })
        }
        Shading::Flat => item.color,
    }
}

/// Shading actually applied to `item` under `requested`, after falling back for missing data.
fn effective(requested: Shading, available: Shading) -> Shading {
    use Shading::*;
    match (requested, available) {
        (Flat, _) => Flat,
        (VertexColor, Textured) => VertexColor,
        (_, a) => a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use crate::geometry::{Plane, Ray, RigidTransform};
    use crate::primitives::plane_patch;
    use alloc::vec;

    fn cam(w: usize, h: usize) -> Camera {
        Camera {
            intrinsics: Intrinsics::new(100.0, 100.0, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap(),
            world_from_camera: RigidTransform::identity(),
        }
    }

    fn item(mesh: &TriangleMesh, id: u16) -> RenderItem<'_> {
        RenderItem {
            id,
            mesh,
            pose: SimilarityTransform::identity(),
            color: [id as u8 * 40, 0, 0],
        }
    }

    #[test]
    fn full_screen_plane_has_constant_depth() {
        let c = cam(64, 48);
        let p = plane_patch(&Plane::new(Vec3::new(0.0, 0.0, -1.0), -2.0).unwrap(), &Vec3::new(0.0, 0.0, 2.0), 10.0);
        let out = render(&c, &[item(&p, 1)], &RenderSettings::sized(64, 48)).unwrap();
        assert!(out.depth.data().iter().all(|&d| (d - 2.0).abs() < 1e-6));
        assert!(out.ids.data().iter().all(|&i| i == 1));
    }

    #[test]
    fn nearer_triangle_wins() {
        let c = cam(32, 32);
        let near = plane_patch(&Plane::new(Vec3::z(), 1.0).unwrap(), &Vec3::new(0.0, 0.0, 1.0), 0.05);
        let far = plane_patch(&Plane::new(Vec3::z(), 2.0).unwrap(), &Vec3::new(0.0, 0.0, 2.0), 10.0);
        for items in [[item(&far, 2), item(&near, 1)], [item(&near, 1), item(&far, 2)]] {
            let out = render(&c, &items, &RenderSettings::sized(32, 32)).unwrap();
            assert_eq!(*out.ids.get(16, 16), 1);
            assert_eq!(*out.depth.get(16, 16), 1.0);
            assert_eq!(*out.ids.get(0, 0), 2);
        }
    }

    #[test]
    fn tilted_plane_matches_ray_intersection() {
        let c = cam(80, 60);
        let plane = Plane::new(Vec3::new(0.0, -0.5, -1.0), -1.5).unwrap();
        let m = plane_patch(&plane, &Vec3::new(0.0, 0.0, 1.5), 20.0);
        let out = render(&c, &[item(&m, 1)], &RenderSettings::sized(80, 60)).unwrap();
        for j in 0..60 {
            for i in 0..80 {
                let (u, v) = crate::camera::Intrinsics::pixel_center(i, j);
                let ray = Ray::new(Vec3::zeros(), c.intrinsics.ray_direction(u, v));
                let Some(t) = ray.intersect_plane(&plane) else { continue };
                if t <= 0.0 {
                    continue;
                }
                // The direction has unit Z, so the ray parameter is the depth.
                let d = *out.depth.get(i, j) as f64;
                assert!((d - t).abs() < 1e-4 * t.max(1.0), "({i},{j}) {d} vs {t}");
            }
        }
    }

    #[test]
    fn shared_edges_cover_each_pixel_once() {
        // A fan of thin triangles around a center pixel; every covered pixel is hit exactly once.
        let c = cam(40, 40);
        let n = 13;
        let mut verts = vec![Vec3::new(0.0013, -0.0007, 1.0)];
        for k in 0..n {
            let a = core::f64::consts::TAU * k as f64 / n as f64;
            verts.push(Vec3::new(0.15 * a.cos(), 0.15 * a.sin(), 1.0));
        }
        let tris: Vec<[u32; 3]> = (0..n).map(|k| [0, 1 + k as u32, 1 + ((k + 1) % n) as u32]).collect();
        let mut hits = vec![0u32; 40 * 40];
        for tri in &tris {
            let m = TriangleMesh::new(verts.clone(), vec![*tri]);
            let out = render(&c, &[item(&m, 1)], &RenderSettings::sized(40, 40)).unwrap();
            for (h, &cov) in hits.iter_mut().zip(out.covered.data()) {
                *h += cov as u32;
            }
        }
        assert!(hits.iter().all(|&h| h <= 1));
        // Pixels well inside the fan are covered.
        assert_eq!(hits[20 * 40 + 20], 1);
        assert_eq!(hits[20 * 40 + 26], 1);
    }

    #[test]
    fn near_plane_clipping_keeps_visible_part() {
        let c = cam(32, 32);
        // Plane receding from behind the camera to in front of it.
        let m = TriangleMesh::new(
            vec![Vec3::new(-5.0, 0.1, -1.0), Vec3::new(5.0, 0.1, -1.0), Vec3::new(0.0, 0.1, 5.0)],
            vec![[0, 1, 2]],
        );
        let out = render(&c, &[item(&m, 1)], &RenderSettings::sized(32, 32)).unwrap();
        assert!(out.covered.data().iter().any(|&b| b));
        assert!(out.depth.data().iter().all(|&d| d == 0.0 || d >= 0.01));
    }

    #[test]
    fn vertex_colors_interpolate_and_far_policy() {
        let c = cam(16, 16);
        let mut m = plane_patch(&Plane::new(Vec3::new(0.0, 0.0, -1.0), -1.0).unwrap(), &Vec3::new(0.0, 0.0, 1.0), 0.02);
        m.colors = Some(vec![[100, 100, 100]; 4]);
        let s = RenderSettings {
            background_policy: BackgroundPolicy::FarPlane,
            ..RenderSettings::sized(16, 16)
        };
        let out = render(&c, &[item(&m, 3)], &s).unwrap();
        assert_eq!(*out.color.get(8, 8), [100, 100, 100]);
        assert_eq!(*out.depth.get(0, 0), 100.0);
        assert_eq!(*out.ids.get(0, 0), 0);
    }

    #[test]
    fn flat_request_ignores_vertex_colors() {
        assert_eq!(effective(Shading::Flat, Shading::Textured), Shading::Flat);
        assert_eq!(effective(Shading::VertexColor, Shading::Textured), Shading::VertexColor);
        assert_eq!(effective(Shading::Textured, Shading::Flat), Shading::Flat);
    }

    #[test]
    fn deterministic() {
        let c = cam(64, 48);
        let m = crate::primitives::icosphere(0.3, 2);
        let it = RenderItem {
            id: 1,
            mesh: &m,
            pose: SimilarityTransform::new(RigidTransform::from_translation(Vec3::new(0.0, 0.0, 1.5)), 1.0),
            color: [1, 2, 3],
        };
        let a = render(&c, &[it], &RenderSettings::sized(64, 48)).unwrap();
        let b = render(&c, &[it], &RenderSettings::sized(64, 48)).unwrap();
        assert_eq!(a, b);
    }
}
