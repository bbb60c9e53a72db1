//! Mesh-to-point registration.
//!
//! A generated mesh arrives at arbitrary scale and orientation. Scale is first estimated from
//! robust extents, then a grid of starting orientations is refined with point-to-surface ICP:
//! every target point is matched to the closest point on the scaled mesh, and the rigid
//! update is the orthogonal Procrustes solution on those pairs.
//!
//! The objective is the truncated mean squared distance
//! `E = mean_q min(d(q, surface)², c²)` over *all* target points, where `c` is the
//! correspondence cutoff. Each Procrustes step cannot increase it, so the reported RMS
//! history is monotone. The cutoff is annealed from the target's radius down to its final
//! value, which only lowers `E` further.

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, TAU};

use nalgebra::{Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{axis_angle, Aabb, Mat3, RigidTransform, SimilarityTransform, Vec3};
use crate::mesh::{closest_point_on_triangle, sample_surface_with_faces, SurfaceSamples, TriangleMesh};
use crate::spatial::{median_spacing, CellIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop a cutoff level once the RMS improves by less than this (meters).
    pub convergence_delta: f64,
    /// Mesh samples used for scale estimation and the visibility term.
    pub surface_samples: usize,
    pub rotation_starts: usize,
    /// Final correspondence cutoff in meters; `None` picks 3× the target's median spacing (≥ 5 mm).
    pub correspondence_cutoff: Option<f64>,
    /// Target points used while searching starts and scales; the final run uses all of them.
    pub search_points: usize,
    /// Refine the initial scale estimate by an outer search over fixed-scale ICP runs.
    pub refine_scale: bool,
    pub seed: u64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            max_iterations: 60,
            convergence_delta: 1e-6,
            surface_samples: 4000,
            rotation_starts: 24,
            correspondence_cutoff: None,
            search_points: 1500,
            refine_scale: true,
            seed: 0,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("icp max_iterations must be >= 1".into()));
        }
        if self.surface_samples < 100 {
            return Err(Error::Config("icp surface_samples must be >= 100".into()));
        }
        if self.rotation_starts == 0 {
            return Err(Error::Config("icp rotation_starts must be >= 1".into()));
        }
        if !(self.convergence_delta >= 0.0) {
            return Err(Error::Config("icp convergence_delta must be >= 0".into()));
        }
        if let Some(c) = self.correspondence_cutoff {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config("icp correspondence_cutoff must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Maps canonical mesh coordinates into the target's frame.
    pub pose: SimilarityTransform,
    /// Truncated RMS of target-to-surface distances at `cutoff`.
    pub rms: f64,
    pub iterations_used: usize,
    pub start_index: usize,
    /// Scale from the extent ratio, before any refinement.
    pub initial_scale: f64,
    pub cutoff: f64,
    /// RMS after every accepted update of the final run, starting with the initial pose.
    pub rms_history: Vec<f64>,
}

/// One fixed-scale ICP run.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpTrace {
    pub pose: SimilarityTransform,
    pub rms: f64,
    pub rms_history: Vec<f64>,
    pub iterations: usize,
    pub cutoff: f64,
}

/// RMS distance from their centroid of the 98% of points nearest the componentwise median.
///
/// Seeding the trim with the median keeps far outliers from dragging the center before they
/// are discarded; the RMS (rather than the maximum) keeps the value from depending on which
/// extreme points the trim happened to remove.
pub fn robust_radius(points: &[Vec3]) -> Option<f64> {
    if points.is_empty() {
        return None;
    }
    let median = |a: usize| {
        let mut v: Vec<f64> = points.iter().map(|p| p[a]).collect();
        v.sort_by(|x, y| x.total_cmp(y));
        v[v.len() / 2]
    };
    let m = Vec3::new(median(0), median(1), median(2));
    let mut by_dist: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| ((p - m).norm(), i)).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = ((points.len() as f64) * 0.98).floor().max(1.0) as usize;
    let kept: Vec<Vec3> = by_dist[..keep].iter().map(|&(_, i)| points[i]).collect();
    let c = crate::cloud::centroid(&kept)?;
    let r = (kept.iter().map(|p| (p - c).norm_squared()).sum::<f64>() / kept.len() as f64).sqrt();
    (r > 0.0 && r.is_finite()).then_some(r)
}

/// Ratio of robust extents, target over mesh, using `samples` mesh surface samples.
pub fn estimate_scale(mesh: &TriangleMesh, target: &[Vec3], samples: usize, seed: u64) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::Degenerate("empty target cloud".into()));
    }
    let s = sample_surface_with_faces(mesh, samples.max(1), seed)?;
    scale_from_samples(&s.points, target)
}

fn scale_from_samples(mesh_points: &[Vec3], target: &[Vec3]) -> Result<f64> {
    let rt = robust_radius(target).ok_or_else(|| Error::Degenerate("target has zero extent".into()))?;
    let rm = robust_radius(mesh_points).ok_or_else(|| Error::Degenerate("mesh has zero extent".into()))?;
    Ok(rt / rm)
}

/// Default cutoff: three median spacings of the target, at least 5 mm.
pub fn auto_cutoff(target: &[Vec3]) -> f64 {
    median_spacing(target, 2000).map_or(0.005, |s| (3.0 * s).max(0.005))
}

/// Least-squares rigid map taking each `pairs[i].0` onto `pairs[i].1` (Kabsch, reflection-safe).
pub fn procrustes(pairs: &[(Vec3, Vec3)]) -> Option<RigidTransform> {
    if pairs.len() < 3 {
        return None;
    }
    let n = pairs.len() as f64;
    let (mut cs, mut cd) = (Vec3::zeros(), Vec3::zeros());
    for (s, d) in pairs {
        cs += s;
        cd += d;
    }
    cs /= n;
    cd /= n;
    let mut h = Mat3::zeros();
    for (s, d) in pairs {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let v = vt.transpose();
    let sign = if (v * u.transpose()).determinant() < 0.0 { -1.0 } else { 1.0 };
    let r = v * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, sign)) * u.transpose();
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let t = cd - q * cs;
    Some(RigidTransform::new(q, t))
}

/// Orientations of the multi-start grid: yaw steps about +Z crossed with pitches {0, +45°, −45°}.
pub fn start_rotations(n: usize) -> Vec<crate::geometry::Rotation> {
    let pitches = [0.0, FRAC_PI_4, -FRAC_PI_4];
    let yaws = n.div_ceil(3).max(1);
    (0..n)
        .map(|i| {
            let yaw = TAU * (i / 3) as f64 / yaws as f64;
            axis_angle(&Vec3::z(), yaw) * axis_angle(&Vec3::x(), pitches[i % 3])
        })
        .collect()
}

/// Mesh scaled into metric units with triangle grids for each cutoff level.
struct Surface {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    levels: Vec<(f64, CellIndex)>,
}

impl Surface {
    fn new(mesh: &TriangleMesh, scale: f64, cutoffs: &[f64]) -> Self {
        let vertices: Vec<Vec3> = mesh.vertices.iter().map(|v| v * scale).collect();
        let boxes: Vec<Aabb> = mesh
            .triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                Aabb::new(a, a).union(&Aabb::new(b, b)).union(&Aabb::new(c, c))
            })
            .collect();
        let levels = cutoffs
            .iter()
            .map(|&c| (c, CellIndex::from_boxes(c, boxes.iter().copied())))
            .collect();
        Surface {
            vertices,
            triangles: mesh.triangles.clone(),
            levels,
        }
    }

    /// Closest surface point within the level's cutoff, with its squared distance.
    fn closest(&self, level: usize, q: &Vec3, stamp: &mut Stamp) -> Option<(Vec3, f64)> {
        let (c, grid) = &self.levels[level];
        let mut best: Option<(Vec3, f64)> = None;
        let mut bound = c * c;
        let id = stamp.next();
        grid.for_each_near(q, |t| {
            if !stamp.visit(t, id) {
                return;
            }
            let [a, b, cc] = self.triangles[t].map(|i| &self.vertices[i as usize]);
            let p = closest_point_on_triangle(q, a, b, cc);
            let d2 = (p - q).norm_squared();
            if d2 <= bound && best.map_or(true, |(_, bd)| d2 < bd) {
                best = Some((p, d2));
                bound = d2;
            }
        });
        best
    }
}

/// Per-query visit marks, so triangles spanning several cells are tested once.
struct Stamp {
    marks: Vec<u32>,
    current: u32,
}

impl Stamp {
    fn new(n: usize) -> Self {
        Stamp {
            marks: alloc::vec![0; n],
            current: 0,
        }
    }

    fn next(&mut self) -> u32 {
        self.current = self.current.wrapping_add(1);
        if self.current == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.current = 1;
        }
        self.current
    }

    fn visit(&mut self, t: usize, id: u32) -> bool {
        if self.marks[t] == id {
            false
        } else {
            self.marks[t] = id;
            true
        }
    }
}

struct Evaluation {
    rms: f64,
    pairs: Vec<(Vec3, Vec3)>,
}

fn evaluate(surface: &Surface, level: usize, pose: &RigidTransform, target: &[Vec3], stamp: &mut Stamp) -> Evaluation {
    let c2 = surface.levels[level].0.powi(2);
    let inv = pose.inverse();
    let mut sum = 0.0;
    let mut pairs = Vec::with_capacity(target.len());
    for q in target {
        let local = inv.transform_point(q);
        match surface.closest(level, &local, stamp) {
            Some((m, d2)) => {
                sum += d2;
                pairs.push((m, *q));
            }
            None => sum += c2,
        }
    }
    Evaluation {
        rms: (sum / target.len() as f64).sqrt(),
        pairs,
    }
}

/// Cutoff schedule halving from `start` down to `last`.
fn cutoff_levels(start: f64, last: f64) -> Vec<f64> {
    let mut levels = Vec::new();
    let mut c = start.max(last);
    while c > last * 1.5 {
        levels.push(c);
        c *= 0.5;
    }
    levels.push(last);
    levels
}

struct Run {
    pose: RigidTransform,
    rms: f64,
    history: Vec<f64>,
    iterations: usize,
}

fn run_icp(surface: &Surface, target: &[Vec3], init: RigidTransform, cfg: &IcpConfig, stamp: &mut Stamp) -> core::result::Result<Run, String> {
    let last = surface.levels.len() - 1;
    let mut level = 0;
    let mut pose = init;
    let mut eval = evaluate(surface, level, &pose, target, stamp);
    let mut history = alloc::vec![eval.rms];
    let mut iterations = 0;
    loop {
        let settled = if iterations >= cfg.max_iterations {
            true
        } else {
            let Some(next) = procrustes(&eval.pairs) else {
                return Err(format!(
                    "{} correspondences within {:.4} m after {iterations} iterations",
                    eval.pairs.len(),
                    surface.levels[level].0
                ));
            };
            iterations += 1;
            let cand = evaluate(surface, level, &next, target, stamp);
            if cand.rms <= eval.rms {
                let gain = eval.rms - cand.rms;
                pose = next;
                eval = cand;
                history.push(eval.rms);
                gain < cfg.convergence_delta
            } else {
                // Only rounding can make a Procrustes step worse; treat it as converged.
                true
            }
        };
        if settled {
            if level == last {
                break;
            }
            level = if iterations >= cfg.max_iterations { last } else { level + 1 };
            eval = evaluate(surface, level, &pose, target, stamp);
            history.push(eval.rms);
        }
    }
    if eval.pairs.is_empty() {
        return Err(format!("no correspondences within {:.4} m", surface.levels[last].0));
    }
    Ok(Run {
        pose,
        rms: eval.rms,
        history,
        iterations,
    })
}

/// Single ICP run from `init`, with the scale of `init` held fixed.
pub fn icp_refine(mesh: &TriangleMesh, target: &[Vec3], init: &SimilarityTransform, cfg: &IcpConfig) -> Result<IcpTrace> {
    cfg.validate()?;
    check_inputs(mesh, target)?;
    if !(init.scale > 0.0) {
        return Err(Error::Config("initial scale must be > 0".into()));
    }
    let cutoff = cfg.correspondence_cutoff.unwrap_or_else(|| auto_cutoff(target));
    let radius = robust_radius(target).unwrap_or(cutoff);
    let surface = Surface::new(mesh, init.scale, &cutoff_levels(radius, cutoff));
    let mut stamp = Stamp::new(mesh.triangles.len());
    let run = run_icp(&surface, target, init.rigid, cfg, &mut stamp).map_err(Error::RegistrationFailed)?;
    Ok(IcpTrace {
        pose: SimilarityTransform::new(run.pose, init.scale),
        rms: run.rms,
        rms_history: run.history,
        iterations: run.iterations,
        cutoff,
    })
}

/// Multi-start registration of `mesh` onto `target`.
pub fn icp_register(mesh: &TriangleMesh, target: &[Vec3], cfg: &IcpConfig) -> Result<RegistrationResult> {
    icp_register_from(mesh, target, cfg, None)
}

/// As [`icp_register`], with the sensor position used to score which mesh parts should have
/// been observed. Surfaces facing the viewpoint but missing from the target then count
/// against a scale, which pins down scale on partial views.
pub fn icp_register_from(
    mesh: &TriangleMesh,
    target: &[Vec3],
    cfg: &IcpConfig,
    viewpoint: Option<Vec3>,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    check_inputs(mesh, target)?;
    let samples = sample_surface_with_faces(mesh, cfg.surface_samples, cfg.seed)?;
    let s0 = scale_from_samples(&samples.points, target)?;
    let cutoff = cfg.correspondence_cutoff.unwrap_or_else(|| auto_cutoff(target));
    let radius = robust_radius(target).unwrap_or(cutoff);
    let levels = cutoff_levels(radius, cutoff);
    let mesh_center = mesh
        .surface_centroid()
        .ok_or_else(|| Error::Degenerate("mesh has zero surface area".into()))?;
    let target_center = crate::cloud::centroid(target).expect("non-empty target");
    let stride = target.len().div_ceil(cfg.search_points.max(10));
    let subset: Vec<Vec3> = target.iter().step_by(stride).copied().collect();
    let mut stamp = Stamp::new(mesh.triangles.len());

    // Multi-start at the extent-ratio scale.
    let surface = Surface::new(mesh, s0, &levels);
    let mut best: Option<(usize, Run)> = None;
    let mut failures = Vec::new();
    for (i, r0) in start_rotations(cfg.rotation_starts).into_iter().enumerate() {
        let init = RigidTransform::new(r0, target_center - r0 * (mesh_center * s0));
        match run_icp(&surface, &subset, init, cfg, &mut stamp) {
            Ok(run) => {
                if best.as_ref().map_or(true, |(_, b)| run.rms < b.rms) {
                    best = Some((i, run));
                }
            }
            Err(e) => failures.push(format!("start {i}: {e}")),
        }
    }
    let Some((start_index, start)) = best else {
        return Err(Error::RegistrationFailed(failures.join("; ")));
    };

    let (scale, pose) = if cfg.refine_scale {
        let scorer = ScaleScorer {
            mesh,
            samples: &samples,
            target,
            subset: &subset,
            levels: &levels,
            cutoff,
            viewpoint,
            mesh_center,
            cfg,
        };
        scorer.search(s0, start.pose, &mut stamp)
    } else {
        (s0, start.pose)
    };

    let surface = Surface::new(mesh, scale, &levels);
    let run = run_icp(&surface, target, pose, cfg, &mut stamp).map_err(Error::RegistrationFailed)?;
    Ok(RegistrationResult {
        pose: SimilarityTransform::new(run.pose, scale),
        rms: run.rms,
        iterations_used: run.iterations,
        start_index,
        initial_scale: s0,
        cutoff,
        rms_history: run.history,
    })
}

fn check_inputs(mesh: &TriangleMesh, target: &[Vec3]) -> Result<()> {
    if target.len() < 10 {
        return Err(Error::Degenerate(format!("target has {} points; need at least 10", target.len())));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::Degenerate("mesh has no triangles".into()));
    }
    Ok(())
}

struct ScaleScorer<'a> {
    mesh: &'a TriangleMesh,
    samples: &'a SurfaceSamples,
    target: &'a [Vec3],
    subset: &'a [Vec3],
    levels: &'a [f64],
    cutoff: f64,
    viewpoint: Option<Vec3>,
    mesh_center: Vec3,
    cfg: &'a IcpConfig,
}

impl ScaleScorer<'_> {
    /// Coarse geometric scan over `[0.5, 2] × s0`, then golden-section refinement around the best.
    fn search(&self, s0: f64, pose0: RigidTransform, stamp: &mut Stamp) -> (f64, RigidTransform) {
        let target_grid = self.viewpoint.map(|_| CellIndex::from_points(self.cutoff, self.target));
        let score = |s: f64, from: &(f64, RigidTransform), stamp: &mut Stamp| -> Option<(f64, RigidTransform)> {
            let (s_prev, p_prev) = from;
            // Keep the mesh centroid in place while the scale changes.
            let t = p_prev.translation + p_prev.rotation * (self.mesh_center * (s_prev - s));
            let init = RigidTransform::new(p_prev.rotation, t);
            let surface = Surface::new(self.mesh, s, self.levels);
            let run = run_icp(&surface, self.subset, init, self.cfg, stamp).ok()?;
            let mut value = run.rms * run.rms;
            if let (Some(eye), Some(grid)) = (self.viewpoint, &target_grid) {
                value += self.unseen_penalty(s, &run.pose, &eye, grid);
            }
            Some((value, run.pose))
        };

        const STEPS: usize = 17;
        let factor = |k: f64| 0.5 * 4f64.powf(k / (STEPS - 1) as f64);
        let mut scan: Vec<Option<(f64, RigidTransform)>> = Vec::with_capacity(STEPS);
        let mut from = (s0, pose0);
        for k in 0..STEPS {
            let s = s0 * factor(k as f64);
            let r = score(s, &from, stamp);
            if let Some((_, p)) = &r {
                from = (s, *p);
            }
            scan.push(r);
        }
        let Some((kbest, _)) = scan
            .iter()
            .enumerate()
            .filter_map(|(k, r)| r.as_ref().map(|(v, _)| (k, *v)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        else {
            return (s0, pose0);
        };
        let mut best = (scan[kbest].as_ref().unwrap().0, s0 * factor(kbest as f64), scan[kbest].as_ref().unwrap().1);

        let (mut a, mut b) = (
            s0 * factor(kbest.saturating_sub(1) as f64),
            s0 * factor((kbest + 1).min(STEPS - 1) as f64),
        );
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let eval = |s: f64, best: &mut (f64, f64, RigidTransform), stamp: &mut Stamp| -> f64 {
            match score(s, &(best.1, best.2), stamp) {
                Some((v, p)) => {
                    if v < best.0 {
                        *best = (v, s, p);
                    }
                    v
                }
                None => f64::INFINITY,
            }
        };
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = eval(x1, &mut best, stamp);
        let mut f2 = eval(x2, &mut best, stamp);
        for _ in 0..14 {
            if f1 <= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = eval(x1, &mut best, stamp);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = eval(x2, &mut best, stamp);
            }
        }
        (best.1, best.2)
    }

    /// Mean truncated squared distance from viewpoint-facing mesh samples to the target.
    fn unseen_penalty(&self, scale: f64, pose: &RigidTransform, eye: &Vec3, grid: &CellIndex) -> f64 {
        let c2 = self.cutoff * self.cutoff;
        let (mut sum, mut count) = (0.0, 0usize);
        for (x, &t) in self.samples.points.iter().zip(&self.samples.triangles) {
            let p = pose.transform_point(&(x * scale));
            let n = pose.transform_vector(&self.mesh.triangle_normal(t as usize));
            if n.dot(&(eye - p)) <= 0.0 {
                continue;
            }
            count += 1;
            sum += grid
                .nearest_within(self.target, &p, self.cutoff)
                .map_or(c2, |(_, d2)| d2);
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_angle_between;
    use crate::primitives::{axis_box, wedge_block};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wedge() -> TriangleMesh {
        wedge_block(Vec3::new(0.12, 0.08, 0.06), 0.4, 0.3)
    }

    fn random_rigid(rng: &mut ChaCha8Rng, max_angle: f64, max_shift: f64) -> RigidTransform {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let angle = rng.random_range(0.0..max_angle);
        let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        RigidTransform::new(axis_angle(&axis, angle), dir.normalize() * rng.random_range(0.0..max_shift))
    }

    /// Brute-force truncated RMS over every triangle.
    fn brute_rms(mesh: &TriangleMesh, pose: &SimilarityTransform, target: &[Vec3], cutoff: f64) -> f64 {
        let m = mesh.transformed(pose);
        let sum: f64 = target
            .iter()
            .map(|q| {
                (0..m.triangles.len())
                    .map(|t| {
                        let [a, b, c] = m.corners(t);
                        (closest_point_on_triangle(q, &a, &b, &c) - q).norm_squared()
                    })
                    .fold(f64::INFINITY, f64::min)
                    .min(cutoff * cutoff)
            })
            .sum();
        (sum / target.len() as f64).sqrt()
    }

    #[test]
    fn scale_of_scaled_copy() {
        let m = wedge();
        let target: Vec<Vec3> = sample_surface_with_faces(&m, 20_000, 7).unwrap().points;
        let half = m.scaled(0.5);
        let s = estimate_scale(&half, &target, 20_000, 1).unwrap();
        assert!((s - 2.0).abs() < 0.1, "{s}");
        let s = estimate_scale(&m, &target, 20_000, 1).unwrap();
        assert!((s - 1.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn scale_ignores_two_percent_outliers() {
        let m = wedge();
        let clean = sample_surface_with_faces(&m, 9800, 3).unwrap().points;
        let mut dirty = clean.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..196 {
            dirty.push(Vec3::new(rng.random_range(1.0..2.0), rng.random_range(-2.0..2.0), 3.0));
        }
        let a = estimate_scale(&m, &clean, 5000, 0).unwrap();
        let b = estimate_scale(&m, &dirty, 5000, 0).unwrap();
        assert!((b / a - 1.0).abs() < 0.05, "{a} vs {b}");
    }

    #[test]
    fn degenerate_scale_inputs() {
        let m = wedge();
        assert!(estimate_scale(&m, &[], 100, 0).is_err());
        assert!(estimate_scale(&m, &[Vec3::zeros(); 5], 100, 0).is_err());
    }

    #[test]
    fn procrustes_recovers_known_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random_rigid(&mut rng, 3.0, 1.0);
        let src: Vec<Vec3> = (0..20)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let pairs: Vec<_> = src.iter().map(|p| (*p, t.transform_point(p))).collect();
        let est = procrustes(&pairs).unwrap();
        assert!(rotation_angle_between(&est.rotation, &t.rotation) < 1e-9);
        assert!((est.translation - t.translation).norm() < 1e-9);
    }

    #[test]
    fn procrustes_never_reflects() {
        // Mirror image pairs: the best proper rotation is still a rotation.
        let src = [Vec3::x(), Vec3::y(), Vec3::z(), Vec3::new(1.0, 1.0, 1.0)];
        let pairs: Vec<_> = src.iter().map(|p| (*p, Vec3::new(-p.x, p.y, p.z))).collect();
        let r = procrustes(&pairs).unwrap().rotation_matrix();
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn start_grid_layout() {
        let r = start_rotations(24);
        assert_eq!(r.len(), 24);
        assert!(rotation_angle_between(&r[0], &UnitQuaternion::identity()) < 1e-15);
        // Start 3 is the second yaw (45°) with no pitch.
        assert!((rotation_angle_between(&r[3], &UnitQuaternion::identity()) - FRAC_PI_4).abs() < 1e-12);
        assert!((rotation_angle_between(&r[1], &UnitQuaternion::identity()) - FRAC_PI_4).abs() < 1e-12);
        assert_eq!(start_rotations(1).len(), 1);
    }

    #[test]
    fn own_samples_are_a_fixed_point() {
        let m = wedge();
        let target = sample_surface_with_faces(&m, 5000, 11).unwrap().points;
        let tr = icp_refine(&m, &target, &SimilarityTransform::identity(), &IcpConfig::default()).unwrap();
        assert!(tr.rms < 1e-6, "{}", tr.rms);
        assert!(rotation_angle_between(&tr.pose.rigid.rotation, &UnitQuaternion::identity()) < 1e-6);
        assert!(tr.pose.rigid.translation.norm() < 1e-6);
    }

    #[test]
    fn perturbed_runs_converge_monotonically() {
        let m = wedge();
        let base = sample_surface_with_faces(&m, 5000, 12).unwrap().points;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = IcpConfig::default();
        let mut good = 0;
        for _ in 0..20 {
            let t = random_rigid(&mut rng, 20f64.to_radians(), 0.05);
            let target: Vec<Vec3> = base.iter().map(|p| t.transform_point(p)).collect();
            let tr = icp_refine(&m, &target, &SimilarityTransform::identity(), &cfg).unwrap();
            assert!(tr.rms_history.windows(2).all(|w| w[1] <= w[0]));
            if tr.rms < 1e-3
                && rotation_angle_between(&tr.pose.rigid.rotation, &t.rotation) < 0.5f64.to_radians()
                && (tr.pose.rigid.translation - t.translation).norm() < 1e-3
            {
                good += 1;
            }
        }
        assert!(good >= 19, "{good}/20");
    }

    #[test]
    fn reported_rms_matches_brute_force() {
        let m = wedge();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_rigid(&mut rng, 0.3, 0.02);
        let target: Vec<Vec3> = sample_surface_with_faces(&m, 800, 6)
            .unwrap()
            .points
            .iter()
            .map(|p| t.transform_point(&(p * 1.1)) + Vec3::new(0.0, 0.0, rng.random_range(-0.002..0.002)))
            .collect();
        let cfg = IcpConfig {
            rotation_starts: 6,
            ..IcpConfig::default()
        };
        let r = icp_register(&m, &target, &cfg).unwrap();
        assert!((brute_rms(&m, &r.pose, &target, r.cutoff) - r.rms).abs() < 1e-9);
        assert!(r.rms_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn registration_is_deterministic() {
        let m = wedge();
        let target: Vec<Vec3> = sample_surface_with_faces(&m, 600, 2).unwrap().points;
        let cfg = IcpConfig {
            rotation_starts: 3,
            ..IcpConfig::default()
        };
        assert_eq!(icp_register(&m, &target, &cfg).unwrap(), icp_register(&m, &target, &cfg).unwrap());
    }

    #[test]
    fn half_visible_cube() {
        // A cube seen from one side; symmetric outcomes are compared modulo the cube's rotations.
        let cube = axis_box(Vec3::new(1.0, 1.0, 1.0));
        let truth = SimilarityTransform::new(
            RigidTransform::new(axis_angle(&Vec3::new(0.3, 1.0, 0.2), 0.7), Vec3::new(0.1, -0.05, 0.6)),
            0.1,
        );
        let eye = Vec3::new(0.0, 0.0, 0.0);
        let s = sample_surface_with_faces(&cube, 20_000, 1).unwrap();
        let target: Vec<Vec3> = s
            .points
            .iter()
            .zip(&s.triangles)
            .filter_map(|(p, &t)| {
                let w = truth.transform_point(p);
                let n = truth.rigid.transform_vector(&cube.triangle_normal(t as usize));
                (n.dot(&(eye - w)) > 0.0).then_some(w)
            })
            .collect();
        let r = icp_register_from(&cube, &target, &IcpConfig::default(), Some(eye)).unwrap();
        let pos_err = (r.pose.rigid.translation - truth.rigid.translation).norm();
        assert!(pos_err < 5e-3, "position error {pos_err}");
        let sym = cube_symmetries();
        let rot_err = sym
            .iter()
            .map(|g| rotation_angle_between(&(r.pose.rigid.rotation * g), &truth.rigid.rotation))
            .fold(f64::INFINITY, f64::min);
        assert!(rot_err < 5f64.to_radians(), "rotation error {}", rot_err.to_degrees());
        assert!((r.pose.scale / 0.1 - 1.0).abs() < 0.05, "scale {}", r.pose.scale);
    }

    fn cube_symmetries() -> Vec<crate::geometry::Rotation> {
        let mut out: Vec<crate::geometry::Rotation> = Vec::new();
        let quarter = |a: Vec3, k: u32| axis_angle(&a, FRAC_PI_4 * 2.0 * k as f64);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let g = quarter(Vec3::x(), i) * quarter(Vec3::y(), j) * quarter(Vec3::z(), k);
                    if !out.iter().any(|h| rotation_angle_between(h, &g) < 1e-6) {
                        out.push(g);
                    }
                }
            }
        }
        assert_eq!(out.len(), 24);
        out
    }

    #[test]
    fn too_few_points_is_an_error() {
        let m = wedge();
        let target = [Vec3::zeros(); 9];
        assert!(matches!(icp_register(&m, &target, &IcpConfig::default()), Err(Error::Degenerate(_))));
    }
}
