//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p scenelift --test acceptance`; pass criterion numbers
//! (e.g. `-- 3 7`) to run a subset.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use scenelift::app::{demo_frames, run_blend, run_recover, run_roundtrip, write_synth};
use scenelift::files::PipelineConfig;
use scenelift_core::align::{ransac_plane, rodrigues_to_z, RansacConfig};
use scenelift_core::background::{complete_holes, splat_depth, BackgroundBuildConfig};
use scenelift_core::cloud::PointCloud;
use scenelift_core::composite::{blend_frame, BlendConfig};
use scenelift_core::error::Error as CoreError;
use scenelift_core::geometry::{axis_angle, Aabb, Plane, RigidTransform, SimilarityTransform, Vec3};
use scenelift_core::mesh::sample_surface;
use scenelift_core::placement::{sample_placements, verify_placement, PlacementConfig, RobotProfile};
use scenelift_core::primitives::wedge_block;
use scenelift_core::registration::{icp_refine, IcpConfig};
use scenelift_core::roundtrip::{blend_check, Thresholds};
use scenelift_core::synth::{synth_scene, Preset};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotation by a uniformly random axis and an angle up to `max_angle`, translation with norm
/// up to `max_t`.
fn random_rigid(rng: &mut ChaCha8Rng, max_angle: f64, max_t: f64) -> RigidTransform {
    let axis = random_unit(rng);
    let angle = rng.random_range(0.0..=max_angle);
    let dir = random_unit(rng);
    RigidTransform::new(axis_angle(&axis, angle), dir * rng.random_range(0.0..=max_t))
}

/// Noise-free tabletop-tilted round trip through the file-level recover.
fn c1() -> Outcome {
    let t = Thresholds::NOISE_FREE;
    let dir = tempfile::tempdir().expect("tempdir");
    let r = run_roundtrip(Preset::TabletopTilted, 0, 0.0, dir.path()).expect("roundtrip runs");
    let recover_s = r.timings_ms["recover.total"] / 1e3;
    let max = |f: fn(&scenelift_core::roundtrip::ObjectError) -> f64| r.objects.iter().map(f).fold(0.0, f64::max);
    let (pos, rot, scale) = (max(|o| o.position_mm), max(|o| o.rotation_deg), max(|o| o.scale_pct));
    let passed = r.objects.len() == 2
        && r.objects.iter().all(|o| o.recovered)
        && r.plane_normal_error_deg < t.plane_deg
        && pos < t.position_mm
        && rot < t.rotation_deg.unwrap()
        && scale < t.scale_pct.unwrap()
        && recover_s < 30.0;
    outcome(
        passed,
        format!(
            "plane {:.4}° (<0.5), position {pos:.3} mm (<2), rotation {rot:.3}° (<2), scale {scale:.3}% (<2), recover {recover_s:.2} s (<30)",
            r.plane_normal_error_deg
        ),
    )
}

/// σ = 2 mm depth noise, tabletop-tilted, 20 seeds, ≥ 90% pass.
fn c2() -> Outcome {
    let t = Thresholds::NOISY;
    let seeds: Vec<u64> = (0..20).collect();
    let results: Vec<(u64, f64, f64, bool)> = seeds
        .par_iter()
        .map(|&seed| {
            let dir = tempfile::tempdir().expect("tempdir");
            match run_roundtrip(Preset::TabletopTilted, seed, 0.002, dir.path()) {
                Ok(r) => {
                    let pos = r.objects.iter().map(|o| o.position_mm).fold(0.0, f64::max);
                    let ok = r.plane_normal_error_deg < t.plane_deg
                        && r.objects.iter().all(|o| o.recovered && o.position_mm < t.position_mm);
                    (seed, r.plane_normal_error_deg, pos, ok)
                }
                Err(_) => (seed, f64::INFINITY, f64::INFINITY, false),
            }
        })
        .collect();
    let passes = results.iter().filter(|r| r.3).count();
    let worst_plane = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.3)
        .map(|r| format!("seed {} ({:.2}°, {:.1} mm)", r.0, r.1, r.2))
        .collect();
    let rate = passes as f64 / results.len() as f64;
    outcome(
        results.len() >= 20 && rate >= 0.9,
        format!(
            "{passes}/{} seeds within plane 2° / position 10 mm ({:.0}% ≥ 90%), worst plane {worst_plane:.3}°{}",
            results.len(),
            rate * 100.0,
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    )
}

/// Objects + robot composited over the bare background equal the full render (mask = 1) and
/// the background image (mask = 0), exactly.
fn c3() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for preset in Preset::ALL {
        for seed in 0..4 {
            let s = synth_scene(preset, seed, 0.0).expect("synth");
            let b = blend_check(&s, &BlendConfig::default()).expect("blend check");
            checked += 1;
            if !(b.foreground_exact && b.background_exact && b.mask_pixels > 0 && b.robot_rendered) {
                bad.push(format!("{} seed {seed}: {b:?}", preset.name()));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{checked} scenes, zero-tolerance pixel comparison{}", fmt_failures(&bad)),
    )
}

fn fmt_failures(bad: &[String]) -> String {
    if bad.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", bad.join("; "))
    }
}

/// Foreground count non-increasing and masks nested over ε ∈ {0, 1, 5, 20} mm.
fn c4() -> Outcome {
    // Real depth = the noisy full scene, so rendered object surfaces sit within noise of it
    // and ε decides their pixels.
    let s = synth_scene(Preset::TabletopBasic, 5, 0.002).expect("synth");
    let frames = demo_frames(&s, 3).expect("frames");
    let eps = [0.0, 0.001, 0.005, 0.020];
    let mut counts = Vec::new();
    let mut ok = true;
    for f in &frames {
        let masks: Vec<_> = eps
            .iter()
            .map(|&e| {
                let cfg = BlendConfig { epsilon: e, ..Default::default() };
                blend_frame(&f.color, &f.depth, &s.color, &s.depth, &cfg).expect("blend").mask
            })
            .collect();
        let c: Vec<usize> = masks.iter().map(|m| m.data().iter().filter(|&&b| b).count()).collect();
        ok &= c.windows(2).all(|w| w[1] <= w[0]);
        for w in masks.windows(2) {
            ok &= w[1].data().iter().zip(w[0].data()).all(|(&big_eps, &small_eps)| !big_eps || small_eps);
        }
        counts.push(c);
    }
    let strictly = counts.iter().any(|c| c[0] > c[3]);
    outcome(ok && strictly, format!("foreground counts per frame at 0/1/5/20 mm: {counts:?}"))
}

/// ICP of a mesh against its own 50k-sample cloud after random rigid perturbations.
fn c5() -> Outcome {
    let mesh = wedge_block(Vec3::new(0.15, 0.10, 0.08), 0.3, 0.35);
    let base = sample_surface(&mesh, 50_000, 1).expect("samples").points;
    let cfg = IcpConfig::default();
    let trials: Vec<(f64, bool)> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + k);
            let t = random_rigid(&mut rng, 20f64.to_radians(), 0.05);
            let target: Vec<Vec3> = base.iter().map(|p| t.transform_point(p)).collect();
            let tr = icp_refine(&mesh, &target, &SimilarityTransform::identity(), &cfg).expect("icp");
            (tr.rms, tr.rms_history.windows(2).all(|w| w[1] <= w[0]))
        })
        .collect();
    let converged = trials.iter().filter(|t| t.0 < 1e-3).count();
    let monotone = trials.iter().filter(|t| t.1).count();
    outcome(
        converged >= 95 && monotone == 100,
        format!("RMS < 1 mm in {converged}/100 (≥ 95), monotone RMS in {monotone}/100 (= 100)"),
    )
}

/// RANSAC on 70% noisy plane inliers + 30% uniform outliers, 1000 iterations.
fn c6() -> Outcome {
    let good: usize = (0..1000u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + trial);
            let normal = random_unit(&mut rng);
            let offset = rng.random_range(-2.0..2.0);
            let truth = Plane::new(normal, offset).expect("unit normal");
            let to_plane = rodrigues_to_z(&normal).inverse();
            let noise = Normal::new(0.0, 0.002).expect("sigma");
            let mut pts = Vec::with_capacity(1000);
            for _ in 0..700 {
                let local = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), noise.sample(&mut rng));
                pts.push(to_plane * local - normal * offset);
            }
            let center = -normal * offset;
            for _ in 0..300 {
                pts.push(
                    center
                        + Vec3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        ),
                );
            }
            let cfg = RansacConfig {
                iterations: 1000,
                seed: trial,
                ..Default::default()
            };
            match ransac_plane(&PointCloud::from_points(pts), &cfg) {
                Ok(fit) if fit.plane.angle_to(&truth).to_degrees() < 1.0 => 1,
                _ => 0,
            }
        })
        .sum();
    outcome(good >= 990, format!("normal within 1° in {good}/1000 trials (≥ 990)"))
}

/// Rodrigues rotation onto +Z for 10⁶ normals, 10³ of them near-antipodal.
fn c7() -> Outcome {
    const N: u64 = 1_000_000;
    const ANTIPODAL: u64 = 1_000;
    let worst = (0..N)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(k);
            let n = if k < ANTIPODAL {
                // Within 10⁻¹⁵ … 10⁻² rad of −z; k = 0 is exactly −z.
                if k == 0 {
                    -Vec3::z()
                } else {
                    let tilt = 10f64.powf(rng.random_range(-15.0..-2.0));
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    Vec3::new(tilt.sin() * phi.cos(), tilt.sin() * phi.sin(), -tilt.cos())
                }
            } else {
                random_unit(&mut rng)
            };
            let r = rodrigues_to_z(&n).to_rotation_matrix().into_inner();
            let map = (r * n - Vec3::z()).norm();
            let ortho = (r.transpose() * r - nalgebra_identity()).abs().max();
            let det = (r.determinant() - 1.0).abs();
            map.max(ortho).max(det)
        })
        .reduce(|| 0.0, f64::max);
    outcome(
        worst <= 1e-9,
        format!("{N} normals ({ANTIPODAL} near-antipodal): worst of |Rn−z|, |RᵀR−I|, |det R−1| = {worst:.2e} (≤ 1e-9)"),
    )
}

fn nalgebra_identity() -> scenelift_core::geometry::Mat3 {
    scenelift_core::geometry::Mat3::identity()
}

/// Every emitted placement passes the brute-force re-check; spread-out scenes are infeasible.
fn c8() -> Outcome {
    let cfg = PlacementConfig::default();
    let mut emitted = 0;
    let mut failed_verify = 0;
    let mut without: BTreeMap<String, usize> = BTreeMap::new();
    for k in 0..100u64 {
        let preset = Preset::ALL[k as usize % Preset::ALL.len()];
        let s = synth_scene(preset, 1000 + k, 0.0).expect("synth");
        let boxes: Vec<Aabb> = s.objects.iter().map(|o| o.world_aabb()).collect();
        let scene = s.objects_aabb();
        for profile in [RobotProfile::tabletop_arm(), RobotProfile::humanoid()] {
            let pc = PlacementConfig { seed: k, ..cfg };
            match sample_placements(&boxes, &scene, &profile, &pc) {
                Ok(c) => {
                    emitted += c.len();
                    failed_verify += c
                        .iter()
                        .filter(|c| !verify_placement(c, &boxes, &scene, &profile, pc.margin).valid)
                        .count();
                }
                Err(_) => *without.entry(profile.name.clone()).or_default() += 1,
            }
        }
    }
    // Infeasible: two objects farther apart than the reach diameter.
    let mut infeasible_ok = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for _ in 0..20 {
        let profile = RobotProfile::tabletop_arm();
        let d = 2.0 * profile.r_max * rng.random_range(1.05..2.0);
        let dir = axis_angle(&Vec3::z(), rng.random_range(0.0..std::f64::consts::TAU)) * Vec3::x();
        let cube = |c: Vec3| Aabb::new(c - Vec3::new(0.04, 0.04, 0.0), c + Vec3::new(0.04, 0.04, 0.08));
        let a = cube(-dir * d / 2.0);
        let b = cube(dir * d / 2.0);
        let scene = a.union(&b);
        if let Err(CoreError::NoPlacement { .. }) = sample_placements(&[a, b], &scene, &profile, &cfg) {
            infeasible_ok += 1;
        }
    }
    let passed = failed_verify == 0 && emitted > 0 && infeasible_ok == 20;
    outcome(
        passed,
        format!(
            "{emitted} candidates from 100 scenes × 2 profiles, {failed_verify} failed re-check (= 0), scenes reported infeasible per profile {without:?}; spread-out scenes reporting no-placement: {infeasible_ok}/20"
        ),
    )
}

/// Ray/plane completion behind object pixels equals the rasterized bare-background depth.
fn c9() -> Outcome {
    let mut worst = 0.0f64;
    let mut missing = 0usize;
    let mut compared = 0usize;
    for preset in Preset::ALL {
        for seed in 0..5 {
            let s = synth_scene(preset, seed, 0.0).expect("synth");
            let cam = s.camera;
            let cloud = complete_holes(
                &s.mask,
                &cam.intrinsics,
                &Plane::ground(),
                &s.objects_aabb(),
                &cam.world_from_camera,
                &BackgroundBuildConfig::default(),
            )
            .expect("completion");
            let (w, h) = cam.intrinsics.dims();
            let d = splat_depth(&cloud.transformed(&cam.camera_from_world()), w, h).expect("splat");
            for k in 0..d.len() {
                if s.mask.labels.data()[k] == 0 {
                    continue;
                }
                let (a, b) = (d.data()[k], s.background_depth.data()[k]);
                if a > 0.0 && b > 0.0 {
                    worst = worst.max((a as f64 - b as f64).abs());
                    compared += 1;
                } else {
                    missing += 1;
                }
            }
        }
    }
    outcome(
        worst <= 1e-6 && missing == 0 && compared > 0,
        format!("{compared} former object pixels over 15 scenes, max |Δdepth| = {worst:.2e} m (≤ 1e-6), {missing} without a value"),
    )
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("read dir") {
            let p = e.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                // Wall-clock timings are the one intentionally non-deterministic output.
                if rel != "timings.json" {
                    out.insert(rel, fs::read(&p).expect("read"));
                }
            }
        }
    }
    out
}

/// Byte-identical recover and blend outputs across runs and thread counts.
fn c10() -> Outcome {
    let work = tempfile::tempdir().expect("tempdir");
    let s = synth_scene(Preset::Cluttered, 7, 0.002).expect("synth");
    write_synth(&s, work.path(), 4).expect("write synth");
    let base = PipelineConfig::load(&work.path().join("config.toml")).expect("config");

    let pools = [("default", None), ("1 thread", Some(1)), ("4 threads", Some(4))];
    let mut recover_runs = Vec::new();
    let mut blend_runs = Vec::new();
    let mut k = 0;
    for (label, threads) in pools {
        let reps = if threads.is_none() { 3 } else { 1 };
        for _ in 0..reps {
            let mut cfg = base.clone();
            let out = work.path().join(format!("run{k}"));
            cfg.paths.output = Some(out.clone());
            let blended = work.path().join(format!("blend{k}"));
            let job = || {
                run_recover(&cfg).expect("recover");
                run_blend(
                    &out.join("scene.json"),
                    &work.path().join("frames"),
                    &work.path().join("background.png"),
                    None,
                    &BlendConfig { export_masks: true, ..Default::default() },
                    &blended,
                )
                .expect("blend");
            };
            match threads {
                Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(job),
                None => job(),
            }
            recover_runs.push((label, dir_bytes(&out)));
            blend_runs.push((label, dir_bytes(&blended)));
            k += 1;
        }
    }
    let same = |runs: &[(&str, BTreeMap<String, Vec<u8>>)]| runs.iter().all(|r| r.1 == runs[0].1);
    let (r_ok, b_ok) = (same(&recover_runs), same(&blend_runs));
    outcome(
        r_ok && b_ok && !recover_runs[0].1.is_empty(),
        format!(
            "recover: {} files identical over {} runs ({}); blend: {} files identical: {}",
            recover_runs[0].1.len(),
            recover_runs.len(),
            if r_ok { "yes" } else { "NO" },
            blend_runs[0].1.len(),
            if b_ok { "yes" } else { "NO" }
        ),
    )
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 10] = [
        ("1", "noise-free round trip", c1),
        ("2", "noisy round trip", c2),
        ("3", "blending exactness", c3),
        ("4", "epsilon monotonicity", c4),
        ("5", "ICP oracle", c5),
        ("6", "RANSAC oracle", c6),
        ("7", "Rodrigues suite", c7),
        ("8", "robot placement soundness", c8),
        ("9", "background completion", c9),
        ("10", "determinism", c10),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|x| x == id) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id:>2} {name}: {} ({:.1} s)", o.detail, t.elapsed().as_secs_f64());
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
