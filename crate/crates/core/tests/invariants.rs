//! Property tests over the public API: unprojection, alignment, completion, compositing,
//! properties, placement and rendering.

use proptest::prelude::*;

use scenelift_core::align::{align_scene, rodrigues_to_z, RansacConfig};
use scenelift_core::background::{complete_holes, mesh_from_depth_grid, BackgroundBuildConfig};
use scenelift_core::camera::{project, Camera, Intrinsics};
use scenelift_core::composite::{apply_mask, blend_frame, BlendConfig};
use scenelift_core::geometry::{axis_angle, Aabb, Plane, RigidTransform, SimilarityTransform, Vec3};
use scenelift_core::placement::{sample_placements, verify_placement, PlacementConfig, RobotProfile};
use scenelift_core::primitives::{axis_box, icosphere, wedge_block};
use scenelift_core::properties::{estimate_properties, mass_from_density, PropertyRequest, PropertyTable};
use scenelift_core::raster::{is_valid_depth, InstanceMask, Raster};
use scenelift_core::render::{render, RenderItem, RenderSettings};
use scenelift_core::unproject::{partition, unproject};

fn intrinsics(w: usize, h: usize, f: f64) -> Intrinsics {
    Intrinsics::new(f, f * 1.02, w as f64 / 2.0 + 0.3, h as f64 / 2.0 - 0.2, w, h).unwrap()
}

/// Depth raster with some invalid (0 / NaN / negative) pixels.
fn depth_raster(w: usize, h: usize) -> impl Strategy<Value = Raster<f32>> {
    prop::collection::vec(
        prop_oneof![
            6 => 0.2f32..5.0,
            1 => Just(0.0f32),
            1 => Just(f32::NAN),
            1 => Just(-1.0f32),
        ],
        w * h,
    )
    .prop_map(move |d| Raster::from_vec(w, h, d).unwrap())
}

fn label_raster(w: usize, h: usize) -> impl Strategy<Value = InstanceMask> {
    prop::collection::vec(prop_oneof![3 => Just(0u16), 1 => 1u16..4], w * h)
        .prop_map(move |l| InstanceMask::new(Raster::from_vec(w, h, l).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unproject_partition_counts_and_reprojection(
        depth in depth_raster(12, 9),
        mask in label_raster(12, 9),
        f in 5.0f64..40.0,
    ) {
        let k = intrinsics(12, 9, f);
        let cloud = unproject(&depth, &k).unwrap();
        let valid = depth.data().iter().filter(|&&d| is_valid_depth(d)).count();
        prop_assert_eq!(cloud.len(), valid);

        // Row-major provenance, each point within half a pixel of its pixel center.
        let px = cloud.pixels.as_ref().unwrap();
        prop_assert!(px.windows(2).all(|w| (w[0][1], w[0][0]) < (w[1][1], w[1][0])));
        for (p, q) in cloud.points.iter().zip(px) {
            let (u, v, _) = project(p, &k).unwrap();
            prop_assert!((u - (q[0] as f64 + 0.5)).abs() <= 0.5 + 1e-9);
            prop_assert!((v - (q[1] as f64 + 0.5)).abs() <= 0.5 + 1e-9);
        }
        prop_assert_eq!(&cloud, &unproject(&depth, &k).unwrap());

        let part = partition(&cloud, &mask).unwrap();
        let objects: usize = part.objects.values().map(|c| c.len()).sum();
        prop_assert_eq!(part.background.len() + objects, valid);
    }

    #[test]
    fn rodrigues_is_a_proper_rotation_onto_z(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let v = Vec3::new(x, y, z);
        prop_assume!(v.norm() > 1e-6);
        let n = v.normalize();
        let r = rodrigues_to_z(&n).to_rotation_matrix().into_inner();
        prop_assert!((r * n - Vec3::z()).norm() < 1e-9);
        prop_assert!((r.transpose() * r - scenelift_core::geometry::Mat3::identity()).abs().max() < 1e-9);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn near_antipodal_rodrigues(tilt in 1e-12f64..1e-4, phi in 0.0f64..std::f64::consts::TAU) {
        let n = Vec3::new(tilt.sin() * phi.cos(), tilt.sin() * phi.sin(), -tilt.cos());
        prop_assert!((n + Vec3::z()).norm() < 1e-4);
        let r = rodrigues_to_z(&n).to_rotation_matrix().into_inner();
        prop_assert!((r * n - Vec3::z()).norm() < 1e-9);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mask_nesting_and_partition_exactness(
        fg in prop::collection::vec((any::<[u8; 3]>(), 0.0f32..3.0), 48),
        bg in prop::collection::vec((any::<[u8; 3]>(), 0.0f32..3.0), 48),
        e1 in 0.0f64..0.5,
        de in 0.0f64..0.5,
    ) {
        let split = |v: &[([u8; 3], f32)]| {
            (
                Raster::from_vec(8, 6, v.iter().map(|p| p.0).collect()).unwrap(),
                Raster::from_vec(8, 6, v.iter().map(|p| p.1).collect()).unwrap(),
            )
        };
        let (fc, fd) = split(&fg);
        let (bc, bd) = split(&bg);
        let lo = blend_frame(&fc, &fd, &bc, &bd, &BlendConfig { epsilon: e1, ..Default::default() }).unwrap();
        let hi = blend_frame(&fc, &fd, &bc, &bd, &BlendConfig { epsilon: e1 + de, ..Default::default() }).unwrap();
        for k in 0..48 {
            prop_assert!(!hi.mask.data()[k] || lo.mask.data()[k]);
            let px = lo.color.data()[k];
            prop_assert_eq!(px, if lo.mask.data()[k] { fc.data()[k] } else { bc.data()[k] });
        }
        // Re-applying the same mask to the same inputs changes nothing.
        prop_assert_eq!(apply_mask(&lo.mask, &fc, &bc).unwrap(), lo.color.clone());
        prop_assert_eq!(blend_frame(&fc, &fd, &bc, &bd, &BlendConfig { epsilon: e1, ..Default::default() }).unwrap(), lo);
    }

    #[test]
    fn estimate_properties_is_total(category in ".{0,24}") {
        let r = estimate_properties(&PropertyRequest::new(&category), &PropertyTable::builtin(), None);
        prop_assert!(r.properties.is_valid());
    }

    #[test]
    fn mass_is_cubic_in_scale(
        sx in 0.1f64..2.0, sy in 0.1f64..2.0, sz in 0.1f64..2.0,
        which in 0usize..3,
        s in 0.01f64..10.0,
        density in 1.0f64..20_000.0,
    ) {
        let mesh = match which {
            0 => axis_box(Vec3::new(sx, sy, sz)),
            1 => wedge_block(Vec3::new(sx, sy, sz), 0.3, 0.3),
            _ => icosphere(sx, 2),
        };
        let a = mass_from_density(&mesh, 1.0, density).unwrap().mass;
        let b = mass_from_density(&mesh, s, density).unwrap().mass;
        prop_assert!((b - a * s.powi(3)).abs() <= 1e-9 * b.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Emitted candidates re-verify, come sorted by clearance and repeat exactly for a seed.
    #[test]
    fn placements_verify_sorted_and_deterministic(
        boxes in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3, 0.02f64..0.08, 0.02f64..0.15), 1..5),
        seed in any::<u64>(),
    ) {
        let objs: Vec<Aabb> = boxes
            .iter()
            .map(|&(x, y, r, h)| Aabb::new(Vec3::new(x - r, y - r, 0.0), Vec3::new(x + r, y + r, h)))
            .collect();
        let scene = objs.iter().skip(1).fold(objs[0], |a, b| a.union(b));
        let profile = RobotProfile::tabletop_arm();
        let cfg = PlacementConfig { n_samples: 400, seed, ..Default::default() };
        if let Ok(c) = sample_placements(&objs, &scene, &profile, &cfg) {
            for cand in &c {
                prop_assert!(verify_placement(cand, &objs, &scene, &profile, cfg.margin).valid);
            }
            prop_assert!(c.windows(2).all(|w| w[0].clearance >= w[1].clearance));
            prop_assert_eq!(c, sample_placements(&objs, &scene, &profile, &cfg).unwrap());
        }
    }

    /// Completed points lie on the plane or on a face of the inflated box.
    #[test]
    fn completion_lies_on_plane_or_box(
        pitch in 1.9f64..2.9,
        yaw in 0.0f64..std::f64::consts::TAU,
        height in 0.2f64..1.5,
        labels in label_raster(16, 12),
    ) {
        let k = intrinsics(16, 12, 14.0);
        let pose = RigidTransform::new(axis_angle(&Vec3::z(), yaw) * axis_angle(&Vec3::x(), pitch), Vec3::new(0.0, 0.0, height));
        let cfg = BackgroundBuildConfig::default();
        let bx = Aabb::new(Vec3::new(-0.3, -0.3, 0.0), Vec3::new(0.3, 0.3, 0.25));
        let cloud = complete_holes(&labels, &k, &Plane::ground(), &bx, &pose, &cfg).unwrap();
        let ib = bx.inflated(cfg.aabb_inflation);
        for p in &cloud.points {
            let on_plane = p.z.abs() < 1e-9;
            let on_face = (0..3).any(|a| (p[a] - ib.min[a]).abs() < 1e-9 || (p[a] - ib.max[a]).abs() < 1e-9)
                && (0..3).all(|a| p[a] >= ib.min[a] - 1e-9 && p[a] <= ib.max[a] + 1e-9);
            prop_assert!(on_plane || on_face, "{p:?}");
        }
    }

    /// Every interior quad of a smooth (constant-depth) grid yields exactly two triangles.
    #[test]
    fn grid_mesh_interior_is_complete(w in 2usize..20, h in 2usize..20, d in 0.3f32..4.0) {
        let k = intrinsics(w, h, 20.0);
        let depth = Raster::filled(w, h, d);
        let cloud = unproject(&depth, &k).unwrap();
        let mesh = mesh_from_depth_grid(&cloud, &k, None, &BackgroundBuildConfig::default()).unwrap();
        prop_assert_eq!(mesh.triangles.len(), 2 * (w - 1) * (h - 1));
    }
}

#[test]
fn aligned_inliers_sit_on_z0_and_reproject() {
    // A tilted plane seen from above plus a box of clutter.
    let k = intrinsics(64, 48, 60.0);
    let pose = RigidTransform::new(axis_angle(&Vec3::x(), 2.3) * axis_angle(&Vec3::z(), 0.4), Vec3::new(0.0, -0.5, 0.6));
    let camera = Camera {
        intrinsics: k,
        world_from_camera: pose,
    };
    let ground = scenelift_core::primitives::plane_patch(&Plane::ground(), &Vec3::zeros(), 5.0);
    let cube = axis_box(Vec3::new(0.2, 0.2, 0.2));
    let items = [
        RenderItem { id: 0, mesh: &ground, pose: SimilarityTransform::identity(), color: [0; 3] },
        RenderItem {
            id: 1,
            mesh: &cube,
            pose: SimilarityTransform::new(RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.1)), 1.0),
            color: [255; 3],
        },
    ];
    let r = render(&camera, &items, &RenderSettings::sized(64, 48)).unwrap();
    assert_eq!(r, render(&camera, &items, &RenderSettings::sized(64, 48)).unwrap());

    let cloud = unproject(&r.depth, &k).unwrap();
    let cfg = RansacConfig::default();
    let a = align_scene(&cloud, None, &cfg).unwrap();
    let world = cloud.transformed(&a.world_from_camera);
    for &i in &a.inliers {
        assert!(world.points[i].z.abs() <= cfg.inlier_distance + 1e-12);
    }
    // Back to the camera and through K: the provenance pixel again.
    let back = world.transformed(&a.world_from_camera.inverse());
    for (p, q) in back.points.iter().zip(back.pixels.as_ref().unwrap()) {
        let (u, v, _) = project(p, &k).unwrap();
        assert!((u - (q[0] as f64 + 0.5)).abs() <= 0.5 + 1e-9);
        assert!((v - (q[1] as f64 + 0.5)).abs() <= 0.5 + 1e-9);
    }
}
