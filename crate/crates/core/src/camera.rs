//! Pinhole camera model.
//!
//! Camera frame is +X right, +Y down, +Z forward. Depth is camera-space Z (not ray
//! length). Pixel `(i, j)` = (column, row) is sampled at its center `(i + 0.5, j + 0.5)`.

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, RigidTransform, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image dimensions must be nonzero".into()));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64)
        {
            return Err(Error::Config(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// `K⁻¹ [u, v, 1]ᵀ`; its z component is exactly 1.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Camera-frame point seen at continuous pixel `(u, v)` with camera-space depth `depth`.
    pub fn backproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        self.ray_direction(u, v) * depth
    }

    /// Continuous coordinates of pixel `(i, j)`'s center.
    pub fn pixel_center(i: usize, j: usize) -> (f64, f64) {
        (i as f64 + 0.5, j as f64 + 0.5)
    }
}

/// Projects a camera-frame point to `(u, v, depth)`.
pub fn project(point: &Vec3, k: &Intrinsics) -> Result<(f64, f64, f64)> {
    if !(point.z > 0.0) {
        return Err(Error::BehindCamera(point.z));
    }
    Ok((
        k.fx * point.x / point.z + k.cx,
        k.fy * point.y / point.z + k.cy,
        point.z,
    ))
}

/// Intrinsics plus the camera's pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub world_from_camera: RigidTransform,
}

impl Camera {
    pub fn camera_from_world(&self) -> RigidTransform {
        self.world_from_camera.inverse()
    }

    pub fn center(&self) -> Vec3 {
        self.world_from_camera.translation
    }
}
