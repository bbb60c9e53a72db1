//! Robot base placement on the supported plane.
//!
//! The reachable workspace is a spherical shell `[r_min, r_max]` around the shoulder, which
//! sits `mount_height` above the base. A base position is acceptable when the shell covers
//! every object box and the base footprint stays clear of the (inflated) scene box.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{axis_angle, Aabb, RigidTransform, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotProfile {
    pub name: String,
    /// Workspace shell radii around the shoulder (meters).
    pub r_min: f64,
    pub r_max: f64,
    /// Shoulder height above the base (meters).
    pub mount_height: f64,
    /// Footprint disc radius (meters).
    pub base_radius: f64,
}

impl RobotProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min >= 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(Error::Config(format!("robot `{}`: need 0 <= r_min < r_max", self.name)));
        }
        if !(self.base_radius > 0.0) {
            return Err(Error::Config(format!("robot `{}`: base_radius must be > 0", self.name)));
        }
        if !self.mount_height.is_finite() {
            return Err(Error::Config(format!("robot `{}`: mount_height must be finite", self.name)));
        }
        Ok(())
    }

    /// Table-mounted 7-DoF arm. Radii follow the published reach of common 7-DoF research
    /// arms (~0.85 m), with the inner radius excluding poses folded against the body.
    pub fn tabletop_arm() -> Self {
        RobotProfile {
            name: "tabletop-arm".into(),
            r_min: 0.2,
            r_max: 0.85,
            mount_height: 0.33,
            base_radius: 0.12,
        }
    }

    /// Humanoid standing at the table: shoulder ~0.45 m above the tabletop, ~0.65 m arm reach.
    pub fn humanoid() -> Self {
        RobotProfile {
            name: "humanoid".into(),
            r_min: 0.15,
            r_max: 0.65,
            mount_height: 0.45,
            base_radius: 0.25,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "tabletop-arm" => Some(Self::tabletop_arm()),
            "humanoid" => Some(Self::humanoid()),
            _ => None,
        }
    }

    pub fn shoulder(&self, base: &Vec3) -> Vec3 {
        base + Vec3::new(0.0, 0.0, self.mount_height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementConfig {
    pub n_samples: usize,
    /// Inflation applied to the scene and object boxes (meters).
    pub margin: f64,
    pub seed: u64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            n_samples: 2000,
            margin: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementCandidate {
    /// On `z = 0`, with +X facing the objects' center.
    pub base_pose: RigidTransform,
    /// Smallest margin over all constraints (meters).
    pub clearance: f64,
}

/// Per-constraint margins; a constraint holds when its margin is non-negative (coverage) or
/// positive (collision).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementReport {
    pub valid: bool,
    /// `r_max − farthest corner distance`.
    pub reach_margin: f64,
    /// `nearest box distance − r_min`.
    pub inner_margin: f64,
    /// Footprint disc to the inflated scene cross-section, minus the base radius.
    pub scene_margin: f64,
    /// Base point to the nearest inflated object box.
    pub object_margin: f64,
}

impl PlacementReport {
    /// Smallest margin over all constraints.
    pub fn clearance(&self) -> f64 {
        self.reach_margin.min(self.inner_margin).min(self.scene_margin).min(self.object_margin)
    }

    fn worst(&self) -> (&'static str, f64) {
        [
            ("reach (r_max)", self.reach_margin),
            ("inner radius (r_min)", self.inner_margin),
            ("scene box collision", self.scene_margin),
            ("object box collision", self.object_margin),
        ]
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("four constraints")
    }
}

fn rect_distance(lo: [f64; 2], hi: [f64; 2], p: [f64; 2]) -> f64 {
    let dx = (lo[0] - p[0]).max(0.0).max(p[0] - hi[0]);
    let dy = (lo[1] - p[1]).max(0.0).max(p[1] - hi[1]);
    (dx * dx + dy * dy).sqrt()
}

/// Distance from `p` to `b` (0 inside), plus the signed depth when inside.
fn box_distance(b: &Aabb, p: &Vec3) -> f64 {
    if b.contains(p) {
        let depth = (0..3)
            .map(|a| (p[a] - b.min[a]).min(b.max[a] - p[a]))
            .fold(f64::INFINITY, f64::min);
        -depth
    } else {
        (b.closest_point(p) - p).norm()
    }
}

/// Constraint margins for a base at `base` (z ignored, taken as 0).
pub fn evaluate_placement(base: &Vec3, objects: &[Aabb], scene: &Aabb, profile: &RobotProfile, margin: f64) -> PlacementReport {
    let base = Vec3::new(base.x, base.y, 0.0);
    let shoulder = profile.shoulder(&base);
    let mut reach = f64::INFINITY;
    let mut inner = f64::INFINITY;
    let mut object = f64::INFINITY;
    for b in objects {
        let far = b.corners().iter().map(|c| (c - shoulder).norm()).fold(0.0, f64::max);
        let near = (b.closest_point(&shoulder) - shoulder).norm();
        reach = reach.min(profile.r_max - far);
        inner = inner.min(near - profile.r_min);
        object = object.min(box_distance(&b.inflated(margin), &base));
    }
    let s = scene.inflated(margin);
    let scene_margin = if s.min.z <= 0.0 && s.max.z >= 0.0 {
        rect_distance([s.min.x, s.min.y], [s.max.x, s.max.y], [base.x, base.y]) - profile.base_radius
    } else {
        f64::INFINITY
    };
    let mut r = PlacementReport {
        valid: false,
        reach_margin: reach,
        inner_margin: inner,
        scene_margin,
        object_margin: object,
    };
    r.valid = reach >= 0.0 && inner >= 0.0 && scene_margin > 0.0 && object > 0.0;
    r
}

/// Samples base positions on an annulus `[r_min, r_max]` around the objects' combined box
/// center and keeps those satisfying coverage and collision, sorted by descending clearance.
pub fn sample_placements(
    objects: &[Aabb],
    scene: &Aabb,
    profile: &RobotProfile,
    cfg: &PlacementConfig,
) -> Result<Vec<PlacementCandidate>> {
    profile.validate()?;
    if objects.is_empty() {
        return Err(Error::Config("placement needs at least one object box".into()));
    }
    if cfg.n_samples == 0 || !(cfg.margin >= 0.0) {
        return Err(Error::Config("placement needs n_samples >= 1 and margin >= 0".into()));
    }
    let all = objects.iter().skip(1).fold(objects[0], |a, b| a.union(b));
    let center = all.center();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_samples;
    let (r0, r1) = (profile.r_min * profile.r_min, profile.r_max * profile.r_max);
    // Golden-ratio radial sequence against stratified angles: well spread, jittered.
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let offset: f64 = rng.random();
    let mut kept = Vec::new();
    let mut best_reject: Option<(f64, PlacementReport)> = None;
    for k in 0..n {
        let theta = core::f64::consts::TAU * (k as f64 + rng.random::<f64>()) / n as f64;
        let frac = (offset + k as f64 * phi).fract();
        let rho = (r0 + (r1 - r0) * frac).sqrt();
        let (s, c) = theta.sin_cos();
        let base = Vec3::new(center.x + rho * c, center.y + rho * s, 0.0);
        let report = evaluate_placement(&base, objects, scene, profile, cfg.margin);
        let clearance = report.clearance();
        if report.valid {
            let facing = center - base;
            let yaw = facing.y.atan2(facing.x);
            kept.push(PlacementCandidate {
                base_pose: RigidTransform::new(axis_angle(&Vec3::z(), yaw), base),
                clearance,
            });
        } else if best_reject.as_ref().map_or(true, |(c, _)| clearance > *c) {
            best_reject = Some((clearance, report));
        }
    }
    if kept.is_empty() {
        let (name, violation) = best_reject.map_or(("none", 0.0), |(_, r)| r.worst());
        return Err(Error::NoPlacement {
            constraint: name.to_string(),
            violation: -violation,
        });
    }
    // Stable sort keeps sampling order among equal clearances.
    kept.sort_by(|a, b| b.clearance.total_cmp(&a.clearance));
    Ok(kept)
}

/// Independent re-check of a candidate, computed without the sampler's helpers.
pub fn verify_placement(
    candidate: &PlacementCandidate,
    objects: &[Aabb],
    scene: &Aabb,
    profile: &RobotProfile,
    margin: f64,
) -> PlacementReport {
    let t = candidate.base_pose.translation;
    let base = Vec3::new(t.x, t.y, 0.0);
    let on_plane = t.z == 0.0;
    let sh = Vec3::new(t.x, t.y, profile.mount_height);

    let mut reach_margin = f64::INFINITY;
    let mut inner_margin = f64::INFINITY;
    let mut object_margin = f64::INFINITY;
    for b in objects {
        for ix in 0..2 {
            for iy in 0..2 {
                for iz in 0..2 {
                    let c = Vec3::new(
                        if ix == 0 { b.min.x } else { b.max.x },
                        if iy == 0 { b.min.y } else { b.max.y },
                        if iz == 0 { b.min.z } else { b.max.z },
                    );
                    let d = ((c.x - sh.x).powi(2) + (c.y - sh.y).powi(2) + (c.z - sh.z).powi(2)).sqrt();
                    reach_margin = reach_margin.min(profile.r_max - d);
                }
            }
        }
        // Nearest point of the box, axis by axis.
        let mut d2 = 0.0;
        for a in 0..3 {
            if sh[a] < b.min[a] {
                d2 += (b.min[a] - sh[a]).powi(2);
            } else if sh[a] > b.max[a] {
                d2 += (sh[a] - b.max[a]).powi(2);
            }
        }
        inner_margin = inner_margin.min(d2.sqrt() - profile.r_min);
        let inside = (0..3).all(|a| base[a] >= b.min[a] - margin && base[a] <= b.max[a] + margin);
        let gap = (0..3)
            .map(|a| (b.min[a] - margin - base[a]).max(base[a] - b.max[a] - margin).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt();
        object_margin = object_margin.min(if inside { -1.0 } else { gap });
    }

    // Disc vs rectangle: the disc overlaps iff its center lies in the rectangle grown by the
    // radius along either axis, or within the radius of a rectangle corner.
    let (lo, hi) = (scene.min.add_scalar(-margin), scene.max.add_scalar(margin));
    let r = profile.base_radius;
    let scene_margin = if lo.z <= 0.0 && hi.z >= 0.0 {
        let in_x = base.x > lo.x - r && base.x < hi.x + r && base.y > lo.y && base.y < hi.y;
        let in_y = base.y > lo.y - r && base.y < hi.y + r && base.x > lo.x && base.x < hi.x;
        let corner = [(lo.x, lo.y), (lo.x, hi.y), (hi.x, lo.y), (hi.x, hi.y)]
            .iter()
            .any(|&(cx, cy)| (base.x - cx).hypot(base.y - cy) <= r);
        if in_x || in_y || corner {
            -1.0
        } else {
            let dx = if base.x < lo.x { lo.x - base.x } else if base.x > hi.x { base.x - hi.x } else { 0.0 };
            let dy = if base.y < lo.y { lo.y - base.y } else if base.y > hi.y { base.y - hi.y } else { 0.0 };
            dx.hypot(dy) - r
        }
    } else {
        f64::INFINITY
    };
    PlacementReport {
        valid: on_plane && reach_margin >= 0.0 && inner_margin >= 0.0 && scene_margin > 0.0 && object_margin > 0.0,
        reach_margin,
        inner_margin,
        scene_margin,
        object_margin,
    }
}

/// Base pose from a known camera-to-robot calibration: `world_from_robot =
/// world_from_camera ∘ (robot_from_camera)⁻¹`.
pub fn placement_from_calibration(world_from_camera: &RigidTransform, robot_from_camera: &RigidTransform) -> RigidTransform {
    world_from_camera.compose(&robot_from_camera.inverse())
}

/// Coarse stand-in for rendering a robot: a base column up to the shoulder and one link
/// reaching along +X (toward the scene, in the base frame).
pub fn robot_proxy(profile: &RobotProfile) -> crate::mesh::TriangleMesh {
    use crate::geometry::SimilarityTransform;
    use crate::primitives::{axis_box, cylinder};
    let h = profile.mount_height.max(0.05);
    let column = cylinder(profile.base_radius * 0.6, h, 24).transformed(&SimilarityTransform::new(
        RigidTransform::from_translation(Vec3::new(0.0, 0.0, h / 2.0)),
        1.0,
    ));
    let reach = 0.5 * (profile.r_min + profile.r_max);
    let link_w = profile.base_radius * 0.5;
    let mut m = column;
    m.append(&axis_box(Vec3::new(reach, link_w, link_w)).transformed(&SimilarityTransform::new(
        RigidTransform::from_translation(Vec3::new(reach / 2.0, 0.0, h)),
        1.0,
    )));
    m
}
