//! Core geometric types: rigid and similarity transforms, planes, boxes and rays.
//!
//! Conventions used across the crate:
//! - lengths in meters, angles in radians;
//! - the world frame is Z-up after gravity alignment, with the supported plane at `z = 0`;
//! - quaternions are stored and serialized as `(w, x, y, z)`.

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;
pub type Rotation = UnitQuaternion<f64>;

/// Serde adapter storing a `Vec3` as a plain `[x, y, z]` array.
pub mod vec3_serde {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(a[0], a[1], a[2]))
    }
}

/// Proper rigid motion `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RigidRepr", into = "RigidRepr")]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

#[derive(Serialize, Deserialize)]
struct RigidRepr {
    /// `[w, x, y, z]`
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl From<RigidTransform> for RigidRepr {
    fn from(t: RigidTransform) -> Self {
        let q = t.rotation.quaternion();
        RigidRepr {
            rotation: [q.w, q.i, q.j, q.k],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl From<RigidRepr> for RigidTransform {
    fn from(r: RigidRepr) -> Self {
        let [w, x, y, z] = r.rotation;
        RigidTransform {
            rotation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
            translation: Vec3::new(r.translation[0], r.translation[1], r.translation[2]),
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Rotation::identity(), translation)
    }

    /// Builds a transform from a rotation matrix, re-orthonormalizing through the quaternion.
    pub fn from_matrix_parts(rotation: &Mat3, translation: Vec3) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*rotation);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        RigidTransform {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_homogeneous(&self) -> Mat4 {
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Free-function form of [`RigidTransform::compose`].
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

/// Similarity `x ↦ R (s x) + t` with positive uniform scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub rigid: RigidTransform,
    pub scale: f64,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            rigid: RigidTransform::identity(),
            scale: 1.0,
        }
    }

    pub fn new(rigid: RigidTransform, scale: f64) -> Self {
        debug_assert!(scale > 0.0);
        SimilarityTransform { rigid, scale }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rigid.rotation * (p * self.scale) + self.rigid.translation
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rigid.rotation.inverse();
        let inv_scale = 1.0 / self.scale;
        SimilarityTransform {
            rigid: RigidTransform::new(inv_rot, -(inv_rot * self.rigid.translation) * inv_scale),
            scale: inv_scale,
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SimilarityTransform) -> Self {
        SimilarityTransform {
            rigid: RigidTransform::new(
                self.rigid.rotation * other.rigid.rotation,
                self.rigid.rotation * (other.rigid.translation * self.scale)
                    + self.rigid.translation,
            ),
            scale: self.scale * other.scale,
        }
    }

    /// Left-multiplies by a rigid motion, e.g. to change the frame a pose is expressed in.
    pub fn premul_rigid(&self, rigid: &RigidTransform) -> Self {
        SimilarityTransform {
            rigid: rigid.compose(&self.rigid),
            scale: self.scale,
        }
    }

    pub fn to_homogeneous(&self) -> Mat4 {
        let mut m = self.rigid.to_homogeneous();
        let scaled = self.rigid.rotation_matrix() * self.scale;
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&scaled);
        m
    }
}

impl From<RigidTransform> for SimilarityTransform {
    fn from(rigid: RigidTransform) -> Self {
        SimilarityTransform { rigid, scale: 1.0 }
    }
}

/// Oriented plane `{x : normal · x = offset}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    #[serde(with = "vec3_serde")]
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    /// Normalizes `normal`; returns `None` for a zero-length normal.
    pub fn new(normal: Vec3, offset: f64) -> Option<Self> {
        let n = normal.norm();
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        Some(Plane {
            normal: normal / n,
            offset: offset / n,
        })
    }

    pub fn from_point_normal(point: &Vec3, normal: &Vec3) -> Option<Self> {
        let n = normal.try_normalize(0.0)?;
        Some(Plane {
            normal: n,
            offset: n.dot(point),
        })
    }

    /// Plane through three points, `None` when they are (numerically) collinear.
    pub fn through(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        let scale = (b - a).norm() * (c - a).norm();
        if !(n.norm() > 1e-12 * scale) {
            return None;
        }
        Self::from_point_normal(a, &n)
    }

    /// The world-frame supported plane `z = 0`.
    pub fn ground() -> Self {
        Plane {
            normal: Vec3::z(),
            offset: 0.0,
        }
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    pub fn flipped(&self) -> Self {
        Plane {
            normal: -self.normal,
            offset: -self.offset,
        }
    }

    pub fn project(&self, p: &Vec3) -> Vec3 {
        p - self.normal * self.signed_distance(p)
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        let normal = t.transform_vector(&self.normal);
        Plane {
            normal,
            offset: self.offset + normal.dot(&t.translation),
        }
    }

    /// Angle between two planes' normals, in radians, ignoring orientation.
    pub fn angle_to(&self, other: &Plane) -> f64 {
        let c = self.normal.dot(&other.normal).abs().min(1.0);
        c.acos()
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    #[serde(with = "vec3_serde")]
    pub min: Vec3,
    #[serde(with = "vec3_serde")]
    pub max: Vec3,
}

impl Aabb {
    pub fn new(a: Vec3, b: Vec3) -> Self {
        Aabb {
            min: a.inf(&b),
            max: a.sup(&b),
        }
    }

    /// Bounds of a point set, `None` if it is empty.
    pub fn from_points<'a, I: IntoIterator<Item = &'a Vec3>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in it {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn union(&self, other: &Aabb) -> Self {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn inflated(&self, margin: f64) -> Self {
        let m = Vec3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn closest_point(&self, p: &Vec3) -> Vec3 {
        p.sup(&self.min).inf(&self.max)
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    /// Bounds of the eight corners after a similarity transform.
    pub fn transformed(&self, t: &SimilarityTransform) -> Self {
        let c = self.corners().map(|p| t.transform_point(&p));
        Aabb::from_points(c.iter()).expect("eight corners")
    }
}

/// Half-line `origin + t · direction`, `t ≥ 0`. The direction is not required to be unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray { origin, direction }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    /// Ray parameter of the plane crossing; `None` when the ray is parallel to the plane.
    pub fn intersect_plane(&self, plane: &Plane) -> Option<f64> {
        let denom = plane.normal.dot(&self.direction);
        if denom.abs() <= 1e-12 * self.direction.norm() {
            return None;
        }
        Some((plane.offset - plane.normal.dot(&self.origin)) / denom)
    }

    /// Entry and exit parameters of the slab test, `None` on a miss.
    pub fn intersect_aabb(&self, aabb: &Aabb) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let o = self.origin[i];
            let d = self.direction[i];
            if d == 0.0 {
                if o < aabb.min[i] || o > aabb.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let (mut a, mut b) = ((aabb.min[i] - o) * inv, (aabb.max[i] - o) * inv);
            if a > b {
                core::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// Rotation of `angle` radians about a unit `axis`.
pub fn axis_angle(axis: &Vec3, angle: f64) -> Rotation {
    UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle)
}

/// Geodesic angle between two rotations, in radians.
pub fn rotation_angle_between(a: &Rotation, b: &Rotation) -> f64 {
    a.angle_to(b)
}
