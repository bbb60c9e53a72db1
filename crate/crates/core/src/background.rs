//! Background geometry: organized-grid triangulation, completion of the surface hidden
//! behind removed objects, and background depth synthesis.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::camera::{Camera, Intrinsics};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Plane, Ray, RigidTransform, SimilarityTransform, Vec3};
use crate::mesh::TriangleMesh;
use crate::primitives::plane_patch;
use crate::raster::{ColorImage, DepthImage, InstanceMask, Raster, INVALID_DEPTH};
use crate::render::{render, BackgroundPolicy, RenderItem, RenderSettings, Shading};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundBuildConfig {
    /// Edges longer than this many pixel footprints (`depth / fx`) are treated as depth discontinuities.
    pub discontinuity_ratio: f64,
    pub use_plane_primitive: bool,
    /// Margin added to the scene box used as the completion fallback (meters).
    pub aabb_inflation: f64,
    /// Accepted ray-parameter range (camera-space depth) for completed points.
    pub near_clip: f64,
    pub far_clip: f64,
}

impl Default for BackgroundBuildConfig {
    fn default() -> Self {
        BackgroundBuildConfig {
            discontinuity_ratio: 5.0,
            use_plane_primitive: false,
            aabb_inflation: 0.0,
            near_clip: 0.05,
            far_clip: 20.0,
        }
    }
}

impl BackgroundBuildConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.discontinuity_ratio > 1.0) {
            return Err(Error::Config("discontinuity_ratio must be > 1".into()));
        }
        if !(self.aabb_inflation >= 0.0) {
            return Err(Error::Config("aabb_inflation must be >= 0".into()));
        }
        if !(self.near_clip >= 0.0 && self.near_clip < self.far_clip) {
            return Err(Error::Config("background clips need 0 <= near_clip < far_clip".into()));
        }
        Ok(())
    }
}

/// Triangulates a camera-frame cloud over its pixel grid.
///
/// Vertex `i` of the result is point `i` of the cloud. Each 2×2 pixel quad with all four
/// corners present contributes up to two triangles, wound to face the camera; a triangle is
/// dropped when any edge exceeds `discontinuity_ratio × max endpoint depth / fx`.
/// Vertex colors are read from `colors` at each point's pixel when given.
pub fn mesh_from_depth_grid(
    cloud: &PointCloud,
    k: &Intrinsics,
    colors: Option<&ColorImage>,
    cfg: &BackgroundBuildConfig,
) -> Result<TriangleMesh> {
    cfg.validate()?;
    if cloud.is_empty() {
        return Err(Error::Degenerate("cannot triangulate an empty cloud".into()));
    }
    let pixels = cloud.pixels.as_ref().ok_or(Error::MissingProvenance)?;
    let (w, h) = k.dims();
    if let Some(c) = colors {
        crate::raster::check_dims("background colors vs intrinsics", (w, h), c.dims())?;
    }
    let mut grid = alloc::vec![u32::MAX; w * h];
    for (n, px) in pixels.iter().enumerate() {
        let (i, j) = (px[0] as usize, px[1] as usize);
        if i >= w || j >= h {
            return Err(Error::DimensionMismatch {
                what: "point provenance vs intrinsics",
                expected: (w, h),
                found: (i + 1, j + 1),
            });
        }
        grid[j * w + i] = n as u32;
    }
    let pts = &cloud.points;
    let short = |a: u32, b: u32| {
        let (pa, pb) = (&pts[a as usize], &pts[b as usize]);
        let limit = cfg.discontinuity_ratio * pa.z.abs().max(pb.z.abs()) / k.fx;
        (pa - pb).norm() <= limit
    };
    let keep = |t: [u32; 3]| short(t[0], t[1]) && short(t[1], t[2]) && short(t[2], t[0]);
    let mut triangles = Vec::new();
    for j in 0..h.saturating_sub(1) {
        for i in 0..w.saturating_sub(1) {
            let p00 = grid[j * w + i];
            let p10 = grid[j * w + i + 1];
            let p01 = grid[(j + 1) * w + i];
            let p11 = grid[(j + 1) * w + i + 1];
            if [p00, p10, p01, p11].contains(&u32::MAX) {
                continue;
            }
            for t in [[p00, p01, p10], [p10, p01, p11]] {
                if keep(t) {
                    triangles.push(t);
                }
            }
        }
    }
    let mut mesh = TriangleMesh::new(pts.clone(), triangles);
    if let Some(img) = colors {
        mesh.colors = Some(pixels.iter().map(|px| *img.get(px[0] as usize, px[1] as usize)).collect());
    }
    Ok(mesh)
}

/// World-frame points on the background behind every object pixel of `mask`.
///
/// Each pixel's ray (with camera-space direction `(x, y, 1)`, so the ray parameter is the
/// camera depth) is intersected with `plane`; if that hit is missing or outside
/// `[near_clip, far_clip]`, the nearest in-range hit on the inflated `scene_aabb` is used.
/// Pixels with neither are omitted. Points carry their pixel as provenance, in row-major order.
pub fn complete_holes(
    mask: &InstanceMask,
    k: &Intrinsics,
    plane: &Plane,
    scene_aabb: &Aabb,
    world_from_camera: &RigidTransform,
    cfg: &BackgroundBuildConfig,
) -> Result<PointCloud> {
    cfg.validate()?;
    crate::raster::check_dims("mask vs intrinsics", k.dims(), mask.dims())?;
    let aabb = scene_aabb.inflated(cfg.aabb_inflation);
    let origin = world_from_camera.translation;
    let in_range = |t: f64| t >= cfg.near_clip && t <= cfg.far_clip;
    let mut out = PointCloud::with_provenance();
    for (j, row) in mask.labels.rows().enumerate() {
        for (i, &label) in row.iter().enumerate() {
            if label == 0 {
                continue;
            }
            let (u, v) = Intrinsics::pixel_center(i, j);
            let ray = Ray::new(origin, world_from_camera.transform_vector(&k.ray_direction(u, v)));
            let t = ray.intersect_plane(plane).filter(|&t| in_range(t)).or_else(|| {
                let (t0, t1) = ray.intersect_aabb(&aabb)?;
                [t0, t1].into_iter().find(|&t| in_range(t))
            });
            if let Some(t) = t {
                out.push(ray.at(t), Some([i as u32, j as u32]));
            }
        }
    }
    Ok(out)
}

/// Writes each provenance-carrying camera-frame point's Z into a depth raster.
///
/// Later points overwrite earlier ones at the same pixel.
pub fn splat_depth(cloud: &PointCloud, width: usize, height: usize) -> Result<DepthImage> {
    let pixels = cloud.pixels.as_ref().ok_or(Error::MissingProvenance)?;
    let mut d = Raster::filled(width, height, INVALID_DEPTH);
    for (p, px) in cloud.points.iter().zip(pixels) {
        let (i, j) = (px[0] as usize, px[1] as usize);
        if i < width && j < height && p.z > 0.0 {
            d.set(i, j, p.z as f32);
        }
    }
    Ok(d)
}

/// Background surface of a scene, in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundGeometry {
    Mesh(TriangleMesh),
    /// Analytic supported plane, rendered as a square patch of the given half-width.
    Plane { plane: Plane, half_extent: f64 },
}

impl BackgroundGeometry {
    /// Triangle mesh standing in for the geometry, centered under `around` for planes.
    pub fn to_mesh(&self, around: &Vec3) -> TriangleMesh {
        match self {
            BackgroundGeometry::Mesh(m) => m.clone(),
            BackgroundGeometry::Plane { plane, half_extent } => plane_patch(plane, around, *half_extent),
        }
    }
}

/// Camera-space depth of the background seen from `camera`; pixels without geometry are invalid.
pub fn background_depth(background: &BackgroundGeometry, camera: &Camera) -> Result<DepthImage> {
    let mesh = background.to_mesh(&camera.center());
    if mesh.triangles.is_empty() {
        return Err(Error::Config("background geometry has no triangles".into()));
    }
    let (w, h) = camera.intrinsics.dims();
    let settings = RenderSettings {
        shading: Shading::Flat,
        background_policy: BackgroundPolicy::InvalidDepth,
        far: 1e6,
        ..RenderSettings::sized(w, h)
    };
    let item = RenderItem {
        id: 0,
        mesh: &mesh,
        pose: SimilarityTransform::identity(),
        color: [0, 0, 0],
    };
    Ok(render(camera, &[item], &settings)?.depth)
}
