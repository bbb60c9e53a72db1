//! Ground-truth comparison of a recovery against the synthetic scene it came from.
//!
//! Recovered and true world frames differ by the arbitrary recentering, so errors are
//! measured in the camera frame, which both share.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::composite::{blend_frame, BlendConfig};
use crate::error::Result;
use crate::geometry::{rotation_angle_between, SimilarityTransform};
use crate::mesh::TriangleMesh;
use crate::pipeline::Recovery;
use crate::placement::{robot_proxy, sample_placements, PlacementConfig, RobotProfile};
use crate::render::{render, RenderItem, RenderSettings, Shading};
use crate::synth::SynthScene;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub plane_deg: f64,
    pub position_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_pct: Option<f64>,
}

impl Thresholds {
    pub const NOISE_FREE: Thresholds = Thresholds {
        plane_deg: 0.5,
        position_mm: 2.0,
        rotation_deg: Some(2.0),
        scale_pct: Some(2.0),
    };
    pub const NOISY: Thresholds = Thresholds {
        plane_deg: 2.0,
        position_mm: 10.0,
        rotation_deg: None,
        scale_pct: None,
    };

    pub fn for_noise(sigma: f64) -> Thresholds {
        if sigma > 0.0 {
            Self::NOISY
        } else {
            Self::NOISE_FREE
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectError {
    pub id: u16,
    pub recovered: bool,
    pub position_mm: f64,
    pub rotation_deg: f64,
    pub scale_pct: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendCheck {
    pub mask_pixels: usize,
    /// Composite equals the full-scene render at every mask = 1 pixel.
    pub foreground_exact: bool,
    /// Composite equals the background image at every mask = 0 pixel.
    pub background_exact: bool,
    pub robot_rendered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub preset: String,
    pub seed: u64,
    pub depth_noise_m: f64,
    pub thresholds: Thresholds,
    pub plane_normal_error_deg: f64,
    pub plane_passed: bool,
    pub objects: Vec<ObjectError>,
    pub blend: BlendCheck,
    /// Stage wall-clock times in milliseconds, filled in by the caller.
    pub timings_ms: BTreeMap<String, f64>,
    pub passed: bool,
}

/// Plane-normal angle between truth and recovery, in degrees (both in the camera frame).
pub fn plane_error_deg(synth: &SynthScene, recovery: &Recovery) -> f64 {
    let c = synth.plane_camera.normal.dot(&recovery.alignment.plane.normal).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

pub fn object_errors(synth: &SynthScene, recovery: &Recovery, t: &Thresholds) -> Vec<ObjectError> {
    let true_cam = synth.camera.camera_from_world();
    let rec_cam = recovery.scene.camera.world_from_camera.inverse();
    synth
        .objects
        .iter()
        .map(|o| {
            let Some(r) = recovery.scene.object(o.id) else {
                return ObjectError {
                    id: o.id,
                    recovered: false,
                    position_mm: f64::INFINITY,
                    rotation_deg: f64::INFINITY,
                    scale_pct: f64::INFINITY,
                    passed: false,
                };
            };
            let a = o.pose.premul_rigid(&true_cam);
            let b = r.pose.premul_rigid(&rec_cam);
            let position_mm = (a.rigid.translation - b.rigid.translation).norm() * 1e3;
            let rotation_deg = rotation_angle_between(&a.rigid.rotation, &b.rigid.rotation).to_degrees();
            let scale_pct = (b.scale / a.scale - 1.0).abs() * 100.0;
            let passed = position_mm < t.position_mm
                && t.rotation_deg.map_or(true, |m| rotation_deg < m)
                && t.scale_pct.map_or(true, |m| scale_pct < m);
            ObjectError {
                id: o.id,
                recovered: true,
                position_mm,
                rotation_deg,
                scale_pct,
                passed,
            }
        })
        .collect()
}

/// Composites the objects plus a robot proxy over the bare-background render and checks the
/// result pixel-exactly against a render of everything together.
pub fn blend_check(synth: &SynthScene, cfg: &BlendConfig) -> Result<BlendCheck> {
    let profile = RobotProfile::tabletop_arm();
    let boxes: Vec<_> = synth.objects.iter().map(|o| o.world_aabb()).collect();
    let robot_mesh: Option<(TriangleMesh, SimilarityTransform)> =
        sample_placements(&boxes, &synth.objects_aabb(), &profile, &PlacementConfig::default())
            .ok()
            .map(|c| (robot_proxy(&profile), SimilarityTransform::new(c[0].base_pose, 1.0)));

    let mut fg: Vec<RenderItem<'_>> = synth.object_items();
    if let Some((m, pose)) = &robot_mesh {
        fg.push(RenderItem {
            id: u16::MAX,
            mesh: m,
            pose: *pose,
            color: [90, 90, 100],
        });
    }
    let mut all = synth.render_items();
    all.truncate(1);
    all.extend(fg.iter().copied());

    let (w, h) = synth.camera.intrinsics.dims();
    let settings = RenderSettings {
        shading: Shading::Textured,
        ..RenderSettings::sized(w, h)
    };
    let frame = render(&synth.camera, &fg, &settings)?;
    let full = render(&synth.camera, &all, &settings)?;
    let out = blend_frame(&frame.color, &frame.depth, &synth.background_color, &synth.background_depth, cfg)?;

    let mut foreground_exact = true;
    let mut background_exact = true;
    let mut mask_pixels = 0;
    for k in 0..out.mask.len() {
        let px = out.color.data()[k];
        if out.mask.data()[k] {
            mask_pixels += 1;
            foreground_exact &= px == full.color.data()[k];
        } else {
            background_exact &= px == synth.background_color.data()[k];
        }
    }
    Ok(BlendCheck {
        mask_pixels,
        foreground_exact,
        background_exact,
        robot_rendered: robot_mesh.is_some(),
    })
}

/// Builds the report (timings left empty).
pub fn compare(synth: &SynthScene, recovery: &Recovery, depth_noise: f64, blend: BlendCheck) -> RoundtripReport {
    let thresholds = Thresholds::for_noise(depth_noise);
    let plane = plane_error_deg(synth, recovery);
    let objects = object_errors(synth, recovery, &thresholds);
    let plane_passed = plane < thresholds.plane_deg;
    let passed = plane_passed
        && objects.iter().all(|o| o.passed)
        && blend.foreground_exact
        && blend.background_exact;
    RoundtripReport {
        preset: synth.preset.name().to_string(),
        seed: synth.seed,
        depth_noise_m: depth_noise,
        thresholds,
        plane_normal_error_deg: plane,
        plane_passed,
        objects,
        blend,
        timings_ms: BTreeMap::new(),
        passed,
    }
}
