//! End-to-end recovery in stages: prepare (unproject, partition, gravity-align), per-object
//! registration, then background geometry and property attachment.
//!
//! Stages are separate so a caller can time them, persist partial outputs and fan the
//! independent registration jobs out over threads; [`recover`] runs them in order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::align::{align_scene, AlignmentResult, RansacConfig};
use crate::background::{complete_holes, mesh_from_depth_grid, BackgroundBuildConfig, BackgroundGeometry};
use crate::camera::{Camera, Intrinsics};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Plane, SimilarityTransform, Vec3};
use crate::mesh::TriangleMesh;
use crate::properties::{estimate_properties, mass_from_density, PropertyEstimator, PropertyRequest, PropertyTable};
use crate::raster::{check_dims, BinaryMask, ColorImage, DepthImage, InstanceMask};
use crate::registration::{icp_register_from, IcpConfig, RegistrationResult};
use crate::scene::{
    object_mesh_path, BackgroundRecord, CameraRecord, Provenance, SceneConfig, SceneObject, BACKGROUND_MESH_PATH,
    SCHEMA_VERSION,
};
use crate::unproject::{partition, unproject, Partition};

/// Category used when none is supplied for an object.
pub const UNKNOWN_CATEGORY: &str = "object";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoverConfig {
    pub ransac: RansacConfig,
    pub icp: IcpConfig,
    pub background: BackgroundBuildConfig,
    /// Overrides the module seeds: RANSAC uses it directly, object `k` registers with `seed + k`.
    pub seed: Option<u64>,
}

impl RecoverConfig {
    pub fn validate(&self) -> Result<()> {
        self.ransac.validate()?;
        self.icp.validate()?;
        self.background.validate()
    }

    fn ransac_cfg(&self) -> RansacConfig {
        RansacConfig {
            seed: self.seed.unwrap_or(self.ransac.seed),
            ..self.ransac
        }
    }

    fn icp_cfg(&self, id: u16) -> IcpConfig {
        IcpConfig {
            seed: self.seed.unwrap_or(self.icp.seed).wrapping_add(id as u64),
            ..self.icp
        }
    }
}

/// Everything recovery reads, already decoded.
#[derive(Debug, Clone, Copy)]
pub struct RecoverInputs<'a> {
    pub color: &'a ColorImage,
    pub depth: &'a DepthImage,
    pub intrinsics: Intrinsics,
    pub mask: &'a InstanceMask,
    /// Pixels known to belong to the supported plane.
    pub ground: Option<&'a BinaryMask>,
    /// Object-free (inpainted) image used to color the background mesh.
    pub background_color: Option<&'a ColorImage>,
    /// Candidate mesh per instance id.
    pub meshes: &'a BTreeMap<u16, TriangleMesh>,
    pub categories: &'a BTreeMap<u16, String>,
}

impl RecoverInputs<'_> {
    /// Dimension and completeness checks, run before any compute.
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let dims = self.intrinsics.dims();
        check_dims("depth vs intrinsics", dims, self.depth.dims())?;
        check_dims("color vs intrinsics", dims, self.color.dims())?;
        check_dims("instance mask vs intrinsics", dims, self.mask.dims())?;
        if let Some(g) = self.ground {
            check_dims("ground mask vs intrinsics", dims, g.dims())?;
        }
        if let Some(b) = self.background_color {
            check_dims("background image vs intrinsics", dims, b.dims())?;
        }
        self.mask.validate()?;
        for id in self.mask.instance_ids() {
            let mesh = self.meshes.get(&id).ok_or(Error::MissingMesh(id))?;
            mesh.validate().map_err(|e| Error::Config(format!("object {id} mesh: {e}")))?;
        }
        Ok(())
    }
}

/// One independent registration problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectJob {
    pub id: u16,
    /// World-frame object points.
    pub target: Vec<Vec3>,
    pub config: IcpConfig,
}

/// State after the prepare stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    /// Camera-frame cloud of every valid depth pixel.
    pub cloud: PointCloud,
    pub partition: Partition,
    pub alignment: AlignmentResult,
    /// Number of RANSAC candidates.
    pub ground_candidates: usize,
    pub camera: Camera,
}

impl Prepared {
    pub fn jobs(&self, cfg: &RecoverConfig) -> Vec<ObjectJob> {
        let wfc = &self.alignment.world_from_camera;
        self.partition
            .objects
            .iter()
            .map(|(&id, c)| ObjectJob {
                id,
                target: c.points.iter().map(|p| wfc.transform_point(p)).collect(),
                config: cfg.icp_cfg(id),
            })
            .collect()
    }

    /// Bounds of the whole world-frame scene cloud.
    pub fn scene_aabb(&self) -> Option<Aabb> {
        let wfc = &self.alignment.world_from_camera;
        let pts: Vec<Vec3> = self.cloud.points.iter().map(|p| wfc.transform_point(p)).collect();
        Aabb::from_points(&pts)
    }
}

/// Unprojects, partitions and gravity-aligns.
///
/// RANSAC candidates are the ground-mask pixels when a mask is given, else every background
/// (unlabeled) pixel with valid depth.
pub fn prepare(inputs: &RecoverInputs<'_>, cfg: &RecoverConfig) -> Result<Prepared> {
    inputs.validate().map_err(|e| e.in_stage("inputs"))?;
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let cloud = unproject(inputs.depth, &inputs.intrinsics).map_err(|e| e.in_stage("unproject"))?;
    let parts = partition(&cloud, inputs.mask).map_err(|e| e.in_stage("partition"))?;
    let pixels = cloud.pixels.as_ref().expect("unproject records provenance");
    let candidates: Vec<usize> = pixels
        .iter()
        .enumerate()
        .filter(|(_, px)| {
            let (i, j) = (px[0] as usize, px[1] as usize);
            match inputs.ground {
                Some(g) => *g.get(i, j),
                None => inputs.mask.label(i, j) == 0,
            }
        })
        .map(|(n, _)| n)
        .collect();
    let alignment = align_scene(&cloud, Some(&candidates), &cfg.ransac_cfg()).map_err(|e| e.in_stage("align"))?;
    let camera = Camera {
        intrinsics: inputs.intrinsics,
        world_from_camera: alignment.world_from_camera,
    };
    Ok(Prepared {
        cloud,
        partition: parts,
        ground_candidates: candidates.len(),
        alignment,
        camera,
    })
}

/// Registers one object; the viewpoint is the recovered camera center.
pub fn register_job(job: &ObjectJob, mesh: &TriangleMesh, viewpoint: Vec3) -> Result<RegistrationResult> {
    if job.target.is_empty() {
        return Err(Error::Degenerate("object has no valid depth pixels".into()));
    }
    icp_register_from(mesh, &job.target, &job.config, Some(viewpoint))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDiagnostics {
    pub id: u16,
    pub points: usize,
    pub registered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverDiagnostics {
    pub points: usize,
    pub plane_candidates: usize,
    pub plane_inliers: usize,
    /// Supported plane in the camera frame.
    pub plane_camera: Plane,
    pub objects: Vec<ObjectDiagnostics>,
    pub completed_points: usize,
    pub background_vertices: usize,
    pub background_triangles: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub scene: SceneConfig,
    /// World-frame background mesh, absent in plane-primitive mode.
    pub background_mesh: Option<TriangleMesh>,
    pub alignment: AlignmentResult,
    pub diagnostics: RecoverDiagnostics,
}

/// Background mesh (world frame) from the background cloud plus ray-completed object pixels,
/// and the number of completed points.
pub fn build_background(
    inputs: &RecoverInputs<'_>,
    prepared: &Prepared,
    cfg: &RecoverConfig,
) -> Result<(TriangleMesh, usize)> {
    let wfc = prepared.alignment.world_from_camera;
    let scene_aabb = prepared
        .scene_aabb()
        .ok_or_else(|| Error::Degenerate("no valid depth pixels".into()))?;
    let completed = complete_holes(
        inputs.mask,
        &inputs.intrinsics,
        &Plane::ground(),
        &scene_aabb,
        &wfc,
        &cfg.background,
    )?;
    let n_completed = completed.len();
    let mut grid = prepared.partition.background.clone();
    grid.labels = None;
    grid.extend_from(&completed.transformed(&wfc.inverse()));
    let colors = inputs.background_color.unwrap_or(inputs.color);
    let mesh = mesh_from_depth_grid(&grid, &inputs.intrinsics, Some(colors), &cfg.background)?;
    Ok((mesh.transformed(&SimilarityTransform::new(wfc, 1.0)), n_completed))
}

/// Half-width of the plane primitive: covers every observed point's footprint.
fn plane_half_extent(prepared: &Prepared) -> f64 {
    prepared.scene_aabb().map_or(1.0, |b| {
        [b.min.x, b.min.y, b.max.x, b.max.y]
            .iter()
            .fold(1.0f64, |m, v| m.max(v.abs()))
    })
}

/// Assembles the scene from registration outcomes (one per job, in job order).
pub fn finish(
    inputs: &RecoverInputs<'_>,
    prepared: &Prepared,
    jobs: &[ObjectJob],
    outcomes: Vec<Result<RegistrationResult>>,
    cfg: &RecoverConfig,
    table: &PropertyTable,
    client: Option<&dyn PropertyEstimator>,
) -> Result<Recovery> {
    let mut warnings = Vec::new();
    let mut objects = Vec::new();
    let mut object_diags = Vec::new();
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let mut d = ObjectDiagnostics {
            id: job.id,
            points: job.target.len(),
            registered: false,
            skipped_reason: None,
            rms: None,
            iterations: None,
            initial_scale: None,
            scale: None,
            start_index: None,
            cutoff: None,
        };
        let r = match outcome {
            Ok(r) => r,
            Err(e) => {
                let msg = format!("object {} skipped: {e}", job.id);
                log::warn!("{msg}");
                warnings.push(msg);
                d.skipped_reason = Some(e.to_string());
                object_diags.push(d);
                continue;
            }
        };
        d.registered = true;
        d.rms = Some(r.rms);
        d.iterations = Some(r.iterations_used);
        d.initial_scale = Some(r.initial_scale);
        d.scale = Some(r.pose.scale);
        d.start_index = Some(r.start_index);
        d.cutoff = Some(r.cutoff);
        object_diags.push(d);

        let mesh = &inputs.meshes[&job.id];
        let category = inputs.categories.get(&job.id).map(String::as_str).unwrap_or(UNKNOWN_CATEGORY);
        let response = estimate_properties(&PropertyRequest::new(category), table, client);
        let mass = match response.properties.mass {
            Some(m) => Some(m),
            None => match mass_from_density(mesh, r.pose.scale, response.properties.density) {
                Ok(m) => Some(m.mass),
                Err(e) => {
                    warnings.push(format!("object {}: no mass ({e})", job.id));
                    None
                }
            },
        };
        objects.push(SceneObject {
            id: job.id,
            mesh: object_mesh_path(job.id),
            category: inputs.categories.get(&job.id).cloned(),
            pose: r.pose,
            pose_provenance: Provenance::Registered,
            properties: response.properties,
            properties_provenance: response.provenance.into(),
            mass,
            aabb: mesh.transformed(&r.pose).aabb().expect("validated mesh"),
            registration_rms: Some(r.rms),
        });
    }

    let (background, background_mesh, completed) = if cfg.background.use_plane_primitive {
        let record = BackgroundRecord::PlanePrimitive {
            half_extent: plane_half_extent(prepared),
        };
        (record, None, 0)
    } else {
        let (mesh, n) = build_background(inputs, prepared, cfg).map_err(|e| e.in_stage("background"))?;
        let record = BackgroundRecord::Mesh {
            path: BACKGROUND_MESH_PATH.to_string(),
        };
        (record, Some(mesh), n)
    };

    let scene = SceneConfig {
        schema_version: SCHEMA_VERSION,
        camera: CameraRecord {
            intrinsics: inputs.intrinsics,
            world_from_camera: prepared.alignment.world_from_camera,
            intrinsics_provenance: Provenance::Measured,
            pose_provenance: Provenance::Registered,
        },
        supported_plane: Plane::ground(),
        objects,
        background,
        robot_placements: Vec::new(),
        camera_to_robot: None,
    };
    let diagnostics = RecoverDiagnostics {
        points: prepared.cloud.len(),
        plane_candidates: prepared.ground_candidates,
        plane_inliers: prepared.alignment.inlier_count,
        plane_camera: prepared.alignment.plane,
        objects: object_diags,
        completed_points: completed,
        background_vertices: background_mesh.as_ref().map_or(0, |m| m.vertices.len()),
        background_triangles: background_mesh.as_ref().map_or(0, |m| m.triangles.len()),
        warnings,
    };
    Ok(Recovery {
        scene,
        background_mesh,
        alignment: prepared.alignment.clone(),
        diagnostics,
    })
}

/// All stages, single-threaded.
pub fn recover(
    inputs: &RecoverInputs<'_>,
    cfg: &RecoverConfig,
    table: &PropertyTable,
    client: Option<&dyn PropertyEstimator>,
) -> Result<Recovery> {
    let prepared = prepare(inputs, cfg)?;
    let jobs = prepared.jobs(cfg);
    let viewpoint = prepared.camera.center();
    let outcomes = jobs
        .iter()
        .map(|j| register_job(j, &inputs.meshes[&j.id], viewpoint))
        .collect();
    finish(inputs, &prepared, &jobs, outcomes, cfg, table, client)
}

/// The scene's background as renderable geometry; `mesh` is the loaded mesh file when the
/// record refers to one.
pub fn background_geometry(record: &BackgroundRecord, mesh: Option<TriangleMesh>) -> Result<BackgroundGeometry> {
    match record {
        BackgroundRecord::PlanePrimitive { half_extent } => Ok(BackgroundGeometry::Plane {
            plane: Plane::ground(),
            half_extent: *half_extent,
        }),
        BackgroundRecord::Mesh { path } => mesh
            .map(BackgroundGeometry::Mesh)
            .ok_or_else(|| Error::Config(format!("background mesh `{path}` not loaded"))),
    }
}
