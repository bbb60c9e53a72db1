//! Supported-plane estimation and gravity alignment.
//!
//! The supported plane (tabletop or floor) is found with RANSAC, its normal is rotated
//! onto +Z with the Rodrigues construction, and the scene is recentered so the plane is
//! `z = 0` and the scene centroid projects onto the world origin.

use alloc::vec::Vec;

use nalgebra::{Quaternion, SymmetricEigen, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Plane, RigidTransform, Rotation, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Meters.
    pub inlier_distance: f64,
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            iterations: 1000,
            inlier_distance: 0.008,
            min_inlier_fraction: 0.15,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("ransac iterations must be >= 1".into()));
        }
        if !(self.inlier_distance > 0.0) {
            return Err(Error::Config("ransac inlier_distance must be > 0".into()));
        }
        if !(self.min_inlier_fraction > 0.0 && self.min_inlier_fraction <= 1.0) {
            return Err(Error::Config(
                "ransac min_inlier_fraction must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// A fitted plane and the indices of its inliers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: Plane,
    pub inliers: Vec<usize>,
}

/// Least-squares plane: centroid plus the eigenvector of the smallest covariance eigenvalue.
pub fn fit_plane_least_squares(points: &[Vec3], indices: &[usize]) -> Option<Plane> {
    if indices.len() < 3 {
        return None;
    }
    let n = indices.len() as f64;
    let c = indices.iter().fold(Vec3::zeros(), |a, &i| a + points[i]) / n;
    let mut cov = Mat3::zeros();
    for &i in indices {
        let d = points[i] - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, &v)| if v < best.1 { (k, v) } else { best });
    let normal = eig.eigenvectors.column(k).into_owned();
    Plane::from_point_normal(&c, &normal)
}

fn inliers_of(points: &[Vec3], plane: &Plane, threshold: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Orients a plane so the camera origin is on its positive side (`offset ≤ 0`).
fn face_origin(plane: Plane) -> Plane {
    if plane.offset > 0.0 {
        plane.flipped()
    } else {
        plane
    }
}

/// Draws all hypothesis samples up front so the result depends only on the seed.
fn draw_samples(n: usize, iterations: usize, seed: u64) -> Vec<[usize; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..iterations)
        .map(|_| {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let mut c = rng.random_range(0..n - 2);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if c >= lo {
                c += 1;
            }
            if c >= hi {
                c += 1;
            }
            [a, b, c]
        })
        .collect()
}

/// Robust plane fit: `cfg.iterations` three-point hypotheses scored by inlier count
/// (ties keep the earliest hypothesis), then a least-squares refit on the inliers.
///
/// The returned normal faces the camera origin; inliers are re-counted against the refit plane.
pub fn ransac_plane(candidates: &PointCloud, cfg: &RansacConfig) -> Result<PlaneFit> {
    cfg.validate()?;
    let pts = &candidates.points;
    if pts.len() < 3 {
        return Err(Error::Degenerate(alloc::format!(
            "plane fit needs at least 3 points, got {}",
            pts.len()
        )));
    }
    let mut best: Option<(usize, Plane)> = None;
    for s in draw_samples(pts.len(), cfg.iterations, cfg.seed) {
        let Some(h) = Plane::through(&pts[s[0]], &pts[s[1]], &pts[s[2]]) else {
            continue;
        };
        let score = pts
            .iter()
            .filter(|p| h.signed_distance(p).abs() <= cfg.inlier_distance)
            .count();
        if best.map_or(true, |(b, _)| score > b) {
            best = Some((score, h));
        }
    }
    let (_, hypothesis) =
        best.ok_or_else(|| Error::Degenerate("every sampled triple was collinear".into()))?;
    let inliers = inliers_of(pts, &hypothesis, cfg.inlier_distance);
    let plane = fit_plane_least_squares(pts, &inliers).unwrap_or(hypothesis);
    let plane = face_origin(plane);
    let inliers = inliers_of(pts, &plane, cfg.inlier_distance);
    let fraction = inliers.len() as f64 / pts.len() as f64;
    if fraction < cfg.min_inlier_fraction {
        return Err(Error::LowConfidence {
            plane,
            inlier_count: inliers.len(),
            inlier_fraction: fraction,
        });
    }
    Ok(PlaneFit { plane, inliers })
}

/// Rotation taking the unit normal `n` onto +Z, about `k = n×z / ‖n×z‖` by `θ = acos(n·z)`.
///
/// Built as the half-way quaternion `(1 + n·z, n×z)`, with `1 + n·z` evaluated as
/// `‖n×z‖² / (1 − n·z)` on the lower hemisphere so near-antipodal inputs stay exact.
/// Only an exactly antipodal input (`n×z = 0`, `n·z < 0`) uses the fixed fallback of π about +X.
pub fn rodrigues_to_z(n: &Vec3) -> Rotation {
    let n = n.normalize();
    let (nx, ny, nz) = (n.x, n.y, n.z);
    let r2 = nx * nx + ny * ny;
    if r2 == 0.0 {
        return if nz > 0.0 {
            Rotation::identity()
        } else {
            UnitQuaternion::from_quaternion(Quaternion::new(0.0, 1.0, 0.0, 0.0))
        };
    }
    let w = if nz >= 0.0 { 1.0 + nz } else { r2 / (1.0 - nz) };
    UnitQuaternion::from_quaternion(Quaternion::new(w, ny, -nx, 0.0))
}

pub fn skew(k: &Vec3) -> Mat3 {
    Mat3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0)
}

/// Matrix form `R = I + sinθ [k]ₓ + (1 − cosθ) [k]ₓ²` with `sinθ = ‖n×z‖`, `cosθ = n·z`.
pub fn rodrigues_matrix(n: &Vec3) -> Mat3 {
    let n = n.normalize();
    let z = Vec3::z();
    let axis = n.cross(&z);
    let s = axis.norm();
    let c = n.dot(&z);
    if s == 0.0 {
        return if c > 0.0 {
            Mat3::identity()
        } else {
            Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
        };
    }
    let kx = skew(&(axis / s));
    Mat3::identity() + kx * s + kx * kx * (1.0 - c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// Supported plane in the camera frame, oriented toward the scene content.
    pub plane: Plane,
    /// The rotation taking `plane.normal` onto +Z.
    pub rotation: Rotation,
    pub world_from_camera: RigidTransform,
    pub inlier_count: usize,
    /// Indices into the aligned cloud of the plane inliers.
    pub inliers: Vec<usize>,
}

/// Fits the supported plane and builds the gravity-aligned `world_from_camera` transform.
///
/// `ground` restricts the RANSAC candidates to those cloud indices; without it the whole
/// cloud is used. The plane normal is flipped if needed so that most off-plane points lie
/// on its positive side (ties: the camera is on the positive side). The world origin is
/// the projection of the cloud centroid onto the plane.
pub fn align_scene(
    cloud: &PointCloud,
    ground: Option<&[usize]>,
    cfg: &RansacConfig,
) -> Result<AlignmentResult> {
    let candidates = match ground {
        Some(idx) if !idx.is_empty() => cloud.select(idx),
        Some(_) => return Err(Error::Degenerate("ground candidate set is empty".into())),
        None => PointCloud::from_points(cloud.points.clone()),
    };
    let fit = ransac_plane(&candidates, cfg)?;
    let mut plane = fit.plane;

    let (mut above, mut below) = (0usize, 0usize);
    for p in &cloud.points {
        let d = plane.signed_distance(p);
        if d > cfg.inlier_distance {
            above += 1;
        } else if d < -cfg.inlier_distance {
            below += 1;
        }
    }
    if below > above || (below == above && plane.offset > 0.0) {
        plane = plane.flipped();
    }

    let rotation = rodrigues_to_z(&plane.normal);
    let centroid = cloud
        .centroid()
        .ok_or_else(|| Error::Degenerate("empty scene cloud".into()))?;
    let c = rotation * centroid;
    let translation = Vec3::new(-c.x, -c.y, -plane.offset);
    let world_from_camera = RigidTransform::new(rotation, translation);
    let ground_sorted = ground.map(|g| {
        let mut g = g.to_vec();
        g.sort_unstable();
        g
    });
    let inliers: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= cfg.inlier_distance)
        .map(|(i, _)| i)
        .filter(|i| ground_sorted.as_ref().map_or(true, |g| g.binary_search(i).is_ok()))
        .collect();
    Ok(AlignmentResult {
        plane,
        rotation,
        world_from_camera,
        inlier_count: inliers.len(),
        inliers,
    })
}
