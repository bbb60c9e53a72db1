//! File-level commands behind the CLI.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scenelift_core::background::background_depth;
use scenelift_core::camera::Camera;
use scenelift_core::composite::{BlendConfig, Frame};
use scenelift_core::error::Error as CoreError;
use scenelift_core::geometry::{axis_angle, RigidTransform, SimilarityTransform, Vec3};
use scenelift_core::mesh::TriangleMesh;
use scenelift_core::pipeline::{
    background_geometry, finish, prepare, register_job, RecoverConfig, RecoverInputs, Recovery,
};
use scenelift_core::placement::{
    evaluate_placement, placement_from_calibration, robot_proxy, sample_placements, PlacementCandidate, PlacementConfig, RobotProfile,
};
use scenelift_core::properties::{estimate_properties, mass_from_density, PropertyEstimator, PropertyRequest};
use scenelift_core::render::{render, RenderItem, RenderOutput, RenderSettings};
use scenelift_core::roundtrip::{blend_check, compare, RoundtripReport};
use scenelift_core::scene::{PlacementSource, RobotPlacement, SceneConfig};
use scenelift_core::synth::{synth_scene, Preset, SynthScene};

use crate::client::HttpEstimator;
use crate::error::{Error, Result};
use crate::files::{
    find_object_mesh, load_profile, load_property_table, read_categories, read_intrinsics, read_scene, write_json,
    write_toml, Paths, PipelineConfig,
};
use crate::frames::{blend_directory, write_frame, BlendMetadata};
use crate::mesh_io::{read_obj, write_obj};
use crate::raster_io::{
    read_binary_mask, read_color, read_depth, read_instance_mask, write_binary_mask, write_color, write_depth,
    write_instance_mask,
};

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub struct RecoverOutcome {
    pub recovery: Recovery,
    pub timings_ms: BTreeMap<String, f64>,
    pub output: PathBuf,
}

#[derive(Serialize)]
struct AlignmentRecord<'a> {
    plane_camera: &'a scenelift_core::geometry::Plane,
    world_from_camera: &'a RigidTransform,
    plane_candidates: usize,
    plane_inliers: usize,
}

/// Loads the inputs named by `cfg`, recovers the scene and writes into `paths.output`:
/// `scene.json`, `objects/object_<id>.obj`, `background.obj` (mesh mode),
/// `diagnostics.json`, `timings.json`, plus `alignment.json` and `registration.json` as each
/// stage completes.
pub fn run_recover(cfg: &PipelineConfig) -> Result<RecoverOutcome> {
    let t_all = Instant::now();
    let mut timings = BTreeMap::new();
    let paths = cfg.recover_paths()?;

    let t = Instant::now();
    let intrinsics = read_intrinsics(&paths.intrinsics)?;
    let color = read_color(&paths.image)?;
    let depth = read_depth(&paths.depth)?;
    let mask = read_instance_mask(&paths.masks)?;
    let ground = paths.ground_mask.as_deref().map(read_binary_mask).transpose()?;
    let background = paths.background_image.as_deref().map(read_color).transpose()?;
    let categories = paths.categories.as_deref().map(read_categories).transpose()?.unwrap_or_default();
    let mut meshes = BTreeMap::new();
    for id in mask.instance_ids() {
        let path = find_object_mesh(&paths.mesh_dir, id).ok_or(CoreError::MissingMesh(id))?;
        let mesh = read_obj(&path).map_err(|e| Error::Asset {
            id,
            path: path.clone(),
            message: e.to_string(),
        })?;
        meshes.insert(id, mesh);
    }
    timings.insert("load".into(), ms(t));

    let inputs = RecoverInputs {
        color: &color,
        depth: &depth,
        intrinsics,
        mask: &mask,
        ground: ground.as_ref(),
        background_color: background.as_ref(),
        meshes: &meshes,
        categories: &categories,
    };
    let rcfg = RecoverConfig {
        ransac: cfg.ransac,
        icp: cfg.icp,
        background: cfg.background,
        seed: Some(cfg.seed),
    };
    let out = &paths.output;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let t = Instant::now();
    let prepared = prepare(&inputs, &rcfg)?;
    timings.insert("prepare".into(), ms(t));
    write_json(
        &out.join("alignment.json"),
        &AlignmentRecord {
            plane_camera: &prepared.alignment.plane,
            world_from_camera: &prepared.alignment.world_from_camera,
            plane_candidates: prepared.ground_candidates,
            plane_inliers: prepared.alignment.inlier_count,
        },
    )?;

    let t = Instant::now();
    let jobs = prepared.jobs(&rcfg);
    let viewpoint = prepared.camera.center();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|j| register_job(j, &meshes[&j.id], viewpoint).map_err(|e| e.in_stage("register")))
        .collect();
    timings.insert("register".into(), ms(t));
    let partial: BTreeMap<String, serde_json::Value> = jobs
        .iter()
        .zip(&outcomes)
        .map(|(j, o)| {
            let v = match o {
                Ok(r) => serde_json::json!({ "pose": r.pose, "rms": r.rms, "iterations": r.iterations_used }),
                Err(e) => serde_json::json!({ "error": e.to_string() }),
            };
            (j.id.to_string(), v)
        })
        .collect();
    write_json(&out.join("registration.json"), &partial)?;

    let t = Instant::now();
    let table = load_property_table(cfg.properties.table.as_deref())?;
    let client = HttpEstimator::resolve(cfg.properties.endpoint.as_deref());
    let recovery = finish(
        &inputs,
        &prepared,
        &jobs,
        outcomes,
        &rcfg,
        &table,
        client.as_ref().map(|c| c as &dyn PropertyEstimator),
    )?;
    timings.insert("finish".into(), ms(t));

    let t = Instant::now();
    write_json(&out.join("scene.json"), &recovery.scene)?;
    for o in &recovery.scene.objects {
        write_obj(&out.join(&o.mesh), &meshes[&o.id])?;
    }
    if let (Some(mesh), scenelift_core::scene::BackgroundRecord::Mesh { path }) =
        (&recovery.background_mesh, &recovery.scene.background)
    {
        write_obj(&out.join(path), mesh)?;
    }
    write_json(&out.join("diagnostics.json"), &recovery.diagnostics)?;
    timings.insert("write".into(), ms(t));
    timings.insert("total".into(), ms(t_all));
    write_json(&out.join("timings.json"), &timings)?;
    Ok(RecoverOutcome {
        recovery,
        timings_ms: timings,
        output: out.clone(),
    })
}

fn scene_dir(scene_path: &Path) -> PathBuf {
    scene_path.parent().unwrap_or(Path::new("")).to_path_buf()
}

/// Loads every object mesh of a scene, naming the object on failure.
pub fn load_scene_meshes(scene: &SceneConfig, dir: &Path) -> Result<BTreeMap<u16, TriangleMesh>> {
    scene
        .objects
        .iter()
        .map(|o| {
            let p = dir.join(&o.mesh);
            read_obj(&p)
                .map(|m| (o.id, m))
                .map_err(|e| Error::Asset {
                    id: o.id,
                    path: p,
                    message: e.to_string(),
                })
        })
        .collect()
}

fn load_background(scene: &SceneConfig, dir: &Path) -> Result<scenelift_core::background::BackgroundGeometry> {
    let mesh = match &scene.background {
        scenelift_core::scene::BackgroundRecord::Mesh { path } => {
            let p = dir.join(path);
            Some(read_obj(&p).map_err(|e| Error::Asset {
                id: 0,
                path: p,
                message: e.to_string(),
            })?)
        }
        _ => None,
    };
    Ok(background_geometry(&scene.background, mesh).map_err(|e| e.in_stage("background"))?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacementList {
    pub profile: RobotProfile,
    pub source: PlacementSource,
    pub candidates: Vec<PlacementCandidate>,
}

/// Samples (or, with a camera-to-robot calibration, computes) robot base poses, writes the
/// best `keep` into the scene file at `scene_out` and the full list to `list_out`.
#[allow(clippy::too_many_arguments)]
pub fn run_place_robot(
    scene_path: &Path,
    profile: &RobotProfile,
    cfg: &PlacementConfig,
    keep: usize,
    camera_to_robot: Option<RigidTransform>,
    scene_out: &Path,
    list_out: &Path,
) -> Result<PlacementList> {
    let mut scene = read_scene(scene_path)?;
    profile.validate()?;
    let calib = camera_to_robot.or(scene.camera_to_robot);
    let list = match calib {
        Some(robot_from_camera) => {
            scene.camera_to_robot = Some(robot_from_camera);
            let base = placement_from_calibration(&scene.camera.world_from_camera, &robot_from_camera);
            // The robot is where the calibration says; still report how it fares.
            let clearance = match scene.objects_aabb() {
                Some(scene_box) => {
                    let r = evaluate_placement(&base.translation, &scene.object_aabbs(), &scene_box, profile, cfg.margin);
                    if !r.valid {
                        log::warn!("calibrated robot base violates the placement constraints: {r:?}");
                    }
                    r.clearance()
                }
                None => 0.0,
            };
            PlacementList {
                profile: profile.clone(),
                source: PlacementSource::Calibrated,
                candidates: vec![PlacementCandidate {
                    base_pose: base,
                    clearance,
                }],
            }
        }
        None => {
            let boxes = scene.object_aabbs();
            let scene_box = scene
                .objects_aabb()
                .ok_or_else(|| Error::Config("scene has no objects to place a robot for".into()))?;
            PlacementList {
                profile: profile.clone(),
                source: PlacementSource::Sampled,
                candidates: sample_placements(&boxes, &scene_box, profile, cfg)?,
            }
        }
    };
    scene.robot_placements = list
        .candidates
        .iter()
        .take(keep.max(1))
        .map(|c| RobotPlacement {
            profile: profile.name.clone(),
            base_pose: c.base_pose,
            clearance: Some(c.clearance),
            source: list.source,
        })
        .collect();
    write_json(scene_out, &scene)?;
    write_json(list_out, &list)?;
    Ok(list)
}

/// Blends a frame directory over `background_image`. The background depth comes from
/// `background_depth_file` when given, else is rendered from the scene's background geometry.
pub fn run_blend(
    scene_path: &Path,
    frames: &Path,
    background_image: &Path,
    background_depth_file: Option<&Path>,
    cfg: &BlendConfig,
    output: &Path,
) -> Result<BlendMetadata> {
    let scene = read_scene(scene_path)?;
    let bg = read_color(background_image)?;
    let (db, source) = match background_depth_file {
        Some(p) => (read_depth(p)?, "file"),
        None => {
            let geometry = load_background(&scene, &scene_dir(scene_path))?;
            (
                background_depth(&geometry, &scene.camera.camera()).map_err(|e| e.in_stage("background"))?,
                "rendered",
            )
        }
    };
    blend_directory(frames, output, &bg, &db, source, cfg)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RenderOptions {
    pub settings: Option<RenderSettings>,
    /// Leave the background geometry out (for rendering frames to blend).
    pub objects_only: bool,
    /// Add a proxy robot at the scene's first placement.
    pub with_robot: bool,
}

pub fn render_scene(scene_path: &Path, opts: &RenderOptions) -> Result<RenderOutput> {
    let scene = read_scene(scene_path)?;
    let dir = scene_dir(scene_path);
    let meshes = load_scene_meshes(&scene, &dir)?;
    let camera = scene.camera.camera();
    let (w, h) = camera.intrinsics.dims();
    let settings = opts.settings.unwrap_or_else(|| RenderSettings::sized(w, h));
    let bg_mesh = if opts.objects_only {
        None
    } else {
        Some(load_background(&scene, &dir)?.to_mesh(&camera.center()))
    };
    let robot = if opts.with_robot {
        let p = scene
            .robot_placements
            .first()
            .ok_or_else(|| Error::Config("scene has no robot placement; run place-robot first".into()))?;
        Some((robot_proxy(&load_profile(&p.profile)?), p.base_pose))
    } else {
        None
    };
    let mut items = Vec::new();
    if let Some(m) = &bg_mesh {
        items.push(RenderItem {
            id: 0,
            mesh: m,
            pose: SimilarityTransform::identity(),
            color: [128, 128, 128],
        });
    }
    for o in &scene.objects {
        items.push(RenderItem {
            id: o.id,
            mesh: &meshes[&o.id],
            pose: o.pose,
            color: object_color(o.id),
        });
    }
    if let Some((m, pose)) = &robot {
        items.push(RenderItem {
            id: u16::MAX,
            mesh: m,
            pose: SimilarityTransform::new(*pose, 1.0),
            color: [90, 90, 100],
        });
    }
    Ok(render(&camera, &items, &settings).map_err(|e| e.in_stage("render"))?)
}

fn object_color(id: u16) -> [u8; 3] {
    const P: [[u8; 3]; 6] = [[200, 40, 40], [40, 160, 60], [40, 80, 200], [220, 180, 30], [150, 50, 170], [30, 170, 170]];
    P[(id as usize + P.len() - 1) % P.len()]
}

pub fn write_render(out: &Path, r: &RenderOutput) -> Result<()> {
    write_color(&out.join("color.png"), &r.color)?;
    write_depth(&out.join("depth.pfm"), &r.depth)?;
    write_instance_mask(&out.join("ids.png"), &scenelift_core::raster::InstanceMask::new(r.ids.clone()))
}

/// Writes a synthetic scene as recover-ready inputs plus `truth.json` and `config.toml`.
/// With `frames > 0`, also writes a frame directory of a proxy robot sweeping its yaw.
pub fn write_synth(s: &SynthScene, out: &Path, frames: usize) -> Result<()> {
    write_color(&out.join("rgb.png"), &s.color)?;
    write_depth(&out.join("depth.pfm"), &s.depth)?;
    write_instance_mask(&out.join("instances.png"), &s.mask)?;
    write_binary_mask(&out.join("ground.png"), &s.ground_mask)?;
    write_color(&out.join("background.png"), &s.background_color)?;
    write_depth(&out.join("background_depth.pfm"), &s.background_depth)?;
    write_toml(&out.join("intrinsics.toml"), &s.camera.intrinsics)?;
    let cats: BTreeMap<String, String> = s.objects.iter().map(|o| (o.id.to_string(), o.category.to_string())).collect();
    write_toml(&out.join("categories.toml"), &cats)?;
    for o in &s.objects {
        write_obj(&out.join(format!("meshes/object_{}.obj", o.id)), &o.mesh)?;
        write_obj(&out.join(scenelift_core::scene::object_mesh_path(o.id)), &o.mesh)?;
    }
    write_json(&out.join("truth.json"), &s.truth())?;
    let cfg = PipelineConfig {
        seed: s.seed,
        paths: Paths {
            image: Some("rgb.png".into()),
            depth: Some("depth.pfm".into()),
            intrinsics: Some("intrinsics.toml".into()),
            masks: Some("instances.png".into()),
            ground_mask: Some("ground.png".into()),
            background_image: Some("background.png".into()),
            mesh_dir: Some("meshes".into()),
            categories: Some("categories.toml".into()),
            output: Some("recovered".into()),
        },
        ..Default::default()
    };
    write_toml(&out.join("config.toml"), &cfg)?;
    if frames > 0 {
        write_demo_frames(s, &out.join("frames"), frames)?;
    }
    Ok(())
}

/// Proxy robot at the best sampled placement, yawing ±30° over the sequence; each frame's
/// action payload is its yaw in radians as a little-endian f64.
pub fn demo_frames(s: &SynthScene, n: usize) -> Result<Vec<Frame>> {
    let profile = RobotProfile::tabletop_arm();
    let boxes: Vec<_> = s.objects.iter().map(|o| o.world_aabb()).collect();
    let base = sample_placements(&boxes, &s.objects_aabb(), &profile, &PlacementConfig::default())?[0].base_pose;
    let proxy = robot_proxy(&profile);
    let (w, h) = s.camera.intrinsics.dims();
    let settings = RenderSettings {
        shading: scenelift_core::render::Shading::Textured,
        ..RenderSettings::sized(w, h)
    };
    (0..n)
        .into_par_iter()
        .map(|k| {
            let yaw = if n > 1 { (k as f64 / (n - 1) as f64 - 0.5) * 60f64.to_radians() } else { 0.0 };
            let pose = base.compose(&RigidTransform::from_rotation(axis_angle(&Vec3::z(), yaw)));
            let mut items = s.object_items();
            items.push(RenderItem {
                id: u16::MAX,
                mesh: &proxy,
                pose: SimilarityTransform::new(pose, 1.0),
                color: [90, 90, 100],
            });
            let r = render(&s.camera, &items, &settings)?;
            Ok(Frame {
                color: r.color,
                depth: r.depth,
                action: yaw.to_le_bytes().to_vec(),
            })
        })
        .collect()
}

pub fn write_demo_frames(s: &SynthScene, dir: &Path, n: usize) -> Result<()> {
    for (k, f) in demo_frames(s, n)?.iter().enumerate() {
        write_frame(dir, k, f)?;
    }
    Ok(())
}

/// Synthesizes, writes the inputs under `work`, recovers from those files and compares.
pub fn run_roundtrip(preset: Preset, seed: u64, depth_noise: f64, work: &Path) -> Result<RoundtripReport> {
    let t = Instant::now();
    let s = synth_scene(preset, seed, depth_noise)?;
    let synth_ms = ms(t);
    write_synth(&s, work, 0)?;
    let cfg = PipelineConfig::load(&work.join("config.toml"))?;
    let outcome = run_recover(&cfg)?;
    let t = Instant::now();
    let blend = blend_check(&s, &BlendConfig::default())?;
    let blend_ms = ms(t);
    let mut report = compare(&s, &outcome.recovery, depth_noise, blend);
    report.timings_ms.insert("synth".into(), synth_ms);
    report.timings_ms.insert("blend_check".into(), blend_ms);
    for (k, v) in outcome.timings_ms {
        report.timings_ms.insert(format!("recover.{k}"), v);
    }
    write_json(&work.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropsOutput {
    pub category: String,
    pub response: scenelift_core::properties::PropertyResponse,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<scenelift_core::properties::MassEstimate>,
}

pub fn run_props(
    category: &str,
    context: Option<String>,
    table: Option<&Path>,
    endpoint: Option<&str>,
    mesh: Option<(&Path, f64)>,
) -> Result<PropsOutput> {
    let table = load_property_table(table)?;
    let client = HttpEstimator::resolve(endpoint);
    let mut request = PropertyRequest::new(category);
    request.context = context;
    let response = estimate_properties(&request, &table, client.as_ref().map(|c| c as &dyn PropertyEstimator));
    let mass = match mesh {
        Some((p, scale)) => Some(mass_from_density(&read_obj(p)?, scale, response.properties.density)?),
        None => None,
    };
    Ok(PropsOutput {
        category: category.to_string(),
        response,
        mass,
    })
}

/// Camera pose reused by tools that only need the scene's camera.
pub fn scene_camera(scene_path: &Path) -> Result<Camera> {
    Ok(read_scene(scene_path)?.camera.camera())
}

