//! Synthetic ground-truth scenes for round-trip testing.
//!
//! Every preset places asymmetric wedge blocks on a textured plane `z = 0`, looks at them
//! from a seeded viewpoint with a 640×480, f = 600 px camera, and renders color, depth,
//! per-pixel instance ids and a ground mask. Candidate meshes are handed out normalized to a
//! unit largest extent, so recovery has to find the metric scale.

use alloc::string::ToString;
use alloc::vec::Vec;
use alloc::{format, vec};

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::background::BackgroundGeometry;
use crate::camera::{Camera, Intrinsics};
use crate::error::{Error, Result};
use crate::geometry::{axis_angle, Aabb, Mat3, Plane, RigidTransform, Rotation, SimilarityTransform, Vec3};
use crate::mesh::TriangleMesh;
use crate::primitives::{plane_patch, wedge_block};
use crate::properties::PhysicalProperties;
use crate::raster::{is_valid_depth, BinaryMask, ColorImage, DepthImage, InstanceMask, Raster, Rgb};
use crate::render::{render, RenderItem, RenderOutput, RenderSettings, Shading};
use crate::scene::{
    object_mesh_path, BackgroundRecord, CameraRecord, Provenance, SceneConfig, SceneObject, SCHEMA_VERSION,
};

pub const WIDTH: usize = 640;
pub const HEIGHT: usize = 480;
pub const FOCAL: f64 = 600.0;
/// Half-width of the ground patch (meters).
pub const GROUND_HALF_EXTENT: f64 = 6.0;
/// Minimum gap between object boxes at generation (meters).
pub const OBJECT_GAP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Two objects, upright camera.
    TabletopBasic,
    /// Two objects, camera rolled 15° about its optical axis, so the plane normal in the
    /// camera frame is tilted 15° away from the upright-camera case.
    TabletopTilted,
    /// Four objects packed closer together, steeper view.
    Cluttered,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::TabletopBasic, Preset::TabletopTilted, Preset::Cluttered];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tabletop-basic" => Ok(Preset::TabletopBasic),
            "tabletop-tilted" => Ok(Preset::TabletopTilted),
            "cluttered" => Ok(Preset::Cluttered),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::TabletopBasic => "tabletop-basic",
            Preset::TabletopTilted => "tabletop-tilted",
            Preset::Cluttered => "cluttered",
        }
    }

    fn params(&self) -> Params {
        match self {
            Preset::TabletopBasic => Params {
                objects: 2,
                spread: 0.14,
                elevation_deg: 40.0,
                roll_deg: 0.0,
                distance: 0.8,
            },
            Preset::TabletopTilted => Params {
                objects: 2,
                spread: 0.14,
                elevation_deg: 40.0,
                roll_deg: 15.0,
                distance: 0.8,
            },
            Preset::Cluttered => Params {
                objects: 4,
                spread: 0.2,
                elevation_deg: 50.0,
                roll_deg: 0.0,
                distance: 0.9,
            },
        }
    }
}

struct Params {
    objects: usize,
    /// Object centers are drawn from a disc of this radius (meters).
    spread: f64,
    elevation_deg: f64,
    roll_deg: f64,
    distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthObject {
    pub id: u16,
    /// Unit largest extent, centered on its box, resting face at `z = −h/2`.
    pub mesh: TriangleMesh,
    /// Ground-truth world pose (includes the metric scale).
    pub pose: SimilarityTransform,
    pub color: Rgb,
    pub category: &'static str,
}

impl SynthObject {
    pub fn world_aabb(&self) -> Aabb {
        self.mesh.transformed(&self.pose).aabb().expect("non-empty mesh")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub preset: Preset,
    pub seed: u64,
    pub camera: Camera,
    /// Camera roll relative to an upright camera (radians).
    pub roll: f64,
    /// Ground truth supported plane in the camera frame, normal pointing toward the camera side.
    pub plane_camera: Plane,
    pub objects: Vec<SynthObject>,
    pub ground: TriangleMesh,
    pub color: ColorImage,
    /// Rendered depth, with noise when requested.
    pub depth: DepthImage,
    pub mask: InstanceMask,
    pub ground_mask: BinaryMask,
    /// Object-free render.
    pub background_color: ColorImage,
    pub background_depth: DepthImage,
}

fn look_at(eye: Vec3, target: Vec3, roll: f64) -> Rotation {
    let f = (target - eye).normalize();
    let r = f.cross(&Vec3::z()).normalize();
    let d = f.cross(&r);
    let upright = Rotation::from_matrix(&Mat3::from_columns(&[r, d, f]));
    upright * axis_angle(&Vec3::z(), roll)
}

fn checker_texture() -> ColorImage {
    // 10 cm squares across the patch.
    let n = (2.0 * GROUND_HALF_EXTENT / 0.1).round() as usize;
    Raster::from_fn(n, n, |i, j| if (i + j) % 2 == 0 { [170, 150, 120] } else { [120, 100, 80] })
}

fn ground_mesh() -> TriangleMesh {
    let mut m = plane_patch(&Plane::ground(), &Vec3::zeros(), GROUND_HALF_EXTENT);
    let uv = |v: &Vec3| [(v.x / GROUND_HALF_EXTENT + 1.0) / 2.0, (v.y / GROUND_HALF_EXTENT + 1.0) / 2.0];
    m.uvs = Some(m.vertices.iter().map(uv).collect());
    m.texture = Some(checker_texture());
    m
}

const PALETTE: [Rgb; 6] = [
    [200, 40, 40],
    [40, 160, 60],
    [40, 80, 200],
    [220, 180, 30],
    [150, 50, 170],
    [30, 170, 170],
];

const CATEGORIES: [&str; 6] = ["wooden block", "cardboard box", "plastic container", "book", "ceramic mug", "apple"];

fn random_object(rng: &mut ChaCha8Rng, id: u16, spread: f64) -> SynthObject {
    let size = Vec3::new(
        rng.random_range(0.06..0.14),
        rng.random_range(0.05..0.12),
        rng.random_range(0.05..0.13),
    );
    let slope = rng.random_range(0.2..0.45);
    let chamfer = rng.random_range(0.25..0.45);
    let scale = size.max();
    let mesh = wedge_block(size / scale, slope, chamfer);
    let rho = spread * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..core::f64::consts::TAU);
    let yaw = rng.random_range(0.0..core::f64::consts::TAU);
    let half_height = -mesh.aabb().expect("non-empty").min.z * scale;
    let pose = SimilarityTransform::new(
        RigidTransform::new(axis_angle(&Vec3::z(), yaw), Vec3::new(rho * phi.cos(), rho * phi.sin(), half_height)),
        scale,
    );
    let k = (id as usize - 1) % PALETTE.len();
    SynthObject {
        id,
        mesh,
        pose,
        color: PALETTE[k],
        category: CATEGORIES[k],
    }
}

/// Generates, renders and labels one preset scene. `depth_noise` is the standard deviation
/// (meters) of Gaussian noise added to every valid depth pixel.
pub fn synth_scene(preset: Preset, seed: u64, depth_noise: f64) -> Result<SynthScene> {
    if !(depth_noise >= 0.0 && depth_noise.is_finite()) {
        return Err(Error::Config("depth noise must be a finite value >= 0".into()));
    }
    let p = preset.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((preset as u64 + 1) << 56));

    let mut objects: Vec<SynthObject> = Vec::new();
    let mut tries = 0;
    while objects.len() < p.objects {
        tries += 1;
        if tries > 10_000 {
            return Err(Error::Degenerate(format!("could not place {} separated objects", p.objects)));
        }
        let o = random_object(&mut rng, objects.len() as u16 + 1, p.spread);
        let b = o.world_aabb().inflated(OBJECT_GAP / 2.0);
        if objects.iter().all(|q| !q.world_aabb().inflated(OBJECT_GAP / 2.0).intersects(&b)) {
            objects.push(o);
        }
    }

    let azimuth = rng.random_range(0.0..core::f64::consts::TAU);
    let el = p.elevation_deg.to_radians();
    let eye = Vec3::new(el.cos() * azimuth.cos(), el.cos() * azimuth.sin(), el.sin()) * p.distance;
    let roll = p.roll_deg.to_radians();
    let intrinsics = Intrinsics::new(FOCAL, FOCAL, WIDTH as f64 / 2.0, HEIGHT as f64 / 2.0, WIDTH, HEIGHT)?;
    let camera = Camera {
        intrinsics,
        world_from_camera: RigidTransform::new(look_at(eye, Vec3::zeros(), roll), eye),
    };
    let plane_camera = Plane::ground().transformed(&camera.camera_from_world());

    let ground = ground_mesh();
    let settings = RenderSettings {
        shading: Shading::Textured,
        ..RenderSettings::sized(WIDTH, HEIGHT)
    };
    let mut items = vec![ground_item(&ground)];
    items.extend(objects.iter().map(object_item));
    let full = render(&camera, &items, &settings)?;
    let bare = render(&camera, &items[..1], &settings)?;

    let RenderOutput {
        color, mut depth, ids, covered,
    } = full;
    let ground_mask = Raster::from_vec(
        WIDTH,
        HEIGHT,
        ids.data().iter().zip(covered.data()).map(|(&id, &c)| c && id == 0).collect(),
    )?;
    if depth_noise > 0.0 {
        let normal = Normal::new(0.0, depth_noise).map_err(|e| Error::Config(format!("{e}")))?;
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
        for d in depth.data_mut() {
            if is_valid_depth(*d) {
                *d = (*d as f64 + normal.sample(&mut noise_rng)).max(1e-3) as f32;
            }
        }
    }
    Ok(SynthScene {
        preset,
        seed,
        camera,
        roll,
        plane_camera,
        objects,
        ground,
        color,
        depth,
        mask: InstanceMask::new(ids),
        ground_mask,
        background_color: bare.color,
        background_depth: bare.depth,
    })
}

fn ground_item(ground: &TriangleMesh) -> RenderItem<'_> {
    RenderItem {
        id: 0,
        mesh: ground,
        pose: SimilarityTransform::identity(),
        color: [128, 128, 128],
    }
}

fn object_item(o: &SynthObject) -> RenderItem<'_> {
    RenderItem {
        id: o.id,
        mesh: &o.mesh,
        pose: o.pose,
        color: o.color,
    }
}

impl SynthScene {
    /// Ground plane first, then the objects.
    pub fn render_items(&self) -> Vec<RenderItem<'_>> {
        let mut items = vec![ground_item(&self.ground)];
        items.extend(self.objects.iter().map(object_item));
        items
    }

    pub fn object_items(&self) -> Vec<RenderItem<'_>> {
        self.objects.iter().map(object_item).collect()
    }

    pub fn background(&self) -> BackgroundGeometry {
        BackgroundGeometry::Plane {
            plane: Plane::ground(),
            half_extent: GROUND_HALF_EXTENT,
        }
    }

    /// Union of the object boxes in the ground-truth world frame.
    pub fn objects_aabb(&self) -> Aabb {
        let mut it = self.objects.iter().map(|o| o.world_aabb());
        let first = it.next().expect("presets have objects");
        it.fold(first, |a, b| a.union(&b))
    }

    /// The ground truth as a scene file.
    pub fn truth(&self) -> SceneConfig {
        SceneConfig {
            schema_version: SCHEMA_VERSION,
            camera: CameraRecord {
                intrinsics: self.camera.intrinsics,
                world_from_camera: self.camera.world_from_camera,
                intrinsics_provenance: Provenance::Measured,
                pose_provenance: Provenance::Measured,
            },
            supported_plane: Plane::ground(),
            objects: self
                .objects
                .iter()
                .map(|o| SceneObject {
                    id: o.id,
                    mesh: object_mesh_path(o.id),
                    category: Some(o.category.to_string()),
                    pose: o.pose,
                    pose_provenance: Provenance::Measured,
                    properties: PhysicalProperties::defaults(),
                    properties_provenance: Provenance::Default,
                    mass: None,
                    aabb: o.world_aabb(),
                    registration_rms: None,
                })
                .collect(),
            background: BackgroundRecord::PlanePrimitive {
                half_extent: GROUND_HALF_EXTENT,
            },
            robot_placements: Vec::new(),
            camera_to_robot: None,
        }
    }
}
