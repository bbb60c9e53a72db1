use alloc::vec::Vec;

use crate::geometry::{Aabb, RigidTransform, Vec3};

/// Metric 3D points with optional pixel provenance `(column, row)` and instance labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub pixels: Option<Vec<[u32; 2]>>,
    pub labels: Option<Vec<u16>>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            pixels: None,
            labels: None,
        }
    }

    /// Cloud that records pixel provenance for every point.
    pub fn with_provenance() -> Self {
        PointCloud {
            points: Vec::new(),
            pixels: Some(Vec::new()),
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: Vec3, pixel: Option<[u32; 2]>) {
        self.points.push(p);
        if let (Some(px), Some(pixel)) = (self.pixels.as_mut(), pixel) {
            px.push(pixel);
        }
    }

    pub fn centroid(&self) -> Option<Vec3> {
        centroid(&self.points)
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(self.points.iter())
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            pixels: self.pixels.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Sub-cloud with the points at `indices`, carrying provenance and labels along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            pixels: self
                .pixels
                .as_ref()
                .map(|px| indices.iter().map(|&i| px[i]).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Appends `other`; provenance is kept only if both sides carry it.
    pub fn extend_from(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
        match (self.pixels.as_mut(), other.pixels.as_ref()) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => self.pixels = None,
        }
        match (self.labels.as_mut(), other.labels.as_ref()) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => self.labels = None,
        }
    }
}

pub fn centroid(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    Some(sum / points.len() as f64)
}
