//! The persisted scene description: camera, supported plane, registered objects with physical
//! properties, background geometry and robot placements. Every recovered quantity carries a
//! provenance tag saying how far it can be trusted.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::camera::{Camera, Intrinsics};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Plane, RigidTransform, SimilarityTransform, Vec3};
use crate::properties::{PhysicalProperties, PropertySource};

pub const SCHEMA_VERSION: u32 = 1;
/// Background mesh file name next to a recovered scene file.
pub const BACKGROUND_MESH_PATH: &str = "background.obj";

/// Relative mesh path for object `id` in scene files.
pub fn object_mesh_path(id: u16) -> String {
    format!("objects/object_{id}.obj")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Read from sensor data or supplied inputs.
    Measured,
    /// Fitted to data (RANSAC, ICP).
    Registered,
    /// Produced by an estimator or lookup table.
    Estimated,
    /// A fixed fallback value.
    Default,
}

impl From<PropertySource> for Provenance {
    fn from(s: PropertySource) -> Self {
        match s {
            PropertySource::Remote | PropertySource::Table => Provenance::Estimated,
            PropertySource::Default => Provenance::Default,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub intrinsics: Intrinsics,
    pub world_from_camera: RigidTransform,
    pub intrinsics_provenance: Provenance,
    pub pose_provenance: Provenance,
}

impl CameraRecord {
    pub fn camera(&self) -> Camera {
        Camera {
            intrinsics: self.intrinsics,
            world_from_camera: self.world_from_camera,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u16,
    /// Mesh file, relative to the scene file's directory.
    pub mesh: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    /// Maps mesh coordinates to the world.
    pub pose: SimilarityTransform,
    pub pose_provenance: Provenance,
    pub properties: PhysicalProperties,
    pub properties_provenance: Provenance,
    /// `density × volume` of the scaled mesh (or its hull) when no explicit mass was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// World-frame bounds of the posed mesh.
    pub aabb: Aabb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration_rms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackgroundRecord {
    /// World-frame triangle mesh, path relative to the scene file.
    Mesh { path: String },
    /// The supported plane (`z = 0`) as a square of the given half-width around the origin.
    PlanePrimitive { half_extent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementSource {
    Sampled,
    Calibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotPlacement {
    pub profile: String,
    /// World pose of the robot base.
    pub base_pose: RigidTransform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearance: Option<f64>,
    pub source: PlacementSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub schema_version: u32,
    pub camera: CameraRecord,
    /// World frame; `z = 0` after recovery.
    pub supported_plane: Plane,
    pub objects: Vec<SceneObject>,
    pub background: BackgroundRecord,
    #[serde(default)]
    pub robot_placements: Vec<RobotPlacement>,
    /// `robot_from_camera` for images taken by a robot-mounted camera; when set, placement
    /// uses it instead of sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_to_robot: Option<RigidTransform>,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "scene schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.camera.intrinsics.validate()?;
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if o.id == 0 || !seen.insert(o.id) {
                return Err(Error::Config(format!("object id {} is zero or repeated", o.id)));
            }
            if !(o.pose.scale > 0.0) {
                return Err(Error::Config(format!("object {} has non-positive scale", o.id)));
            }
        }
        Ok(())
    }

    /// True when the supported plane is exactly the world `z = 0` plane.
    pub fn is_gravity_aligned(&self) -> bool {
        self.supported_plane.normal == Vec3::z() && self.supported_plane.offset == 0.0
    }

    pub fn object(&self, id: u16) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_aabbs(&self) -> Vec<Aabb> {
        self.objects.iter().map(|o| o.aabb).collect()
    }

    /// Union of the object boxes, or `None` for an empty scene.
    pub fn objects_aabb(&self) -> Option<Aabb> {
        let mut it = self.objects.iter().map(|o| o.aabb);
        let first = it.next()?;
        Some(it.fold(first, |a, b| a.union(&b)))
    }
}
