//! Row-major raster grids: depth, color, label and binary masks.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major `width × height` grid; element `(i, j)` is column `i`, row `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Config(format!(
                "raster buffer of {} elements does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                data.push(f(i, j));
            }
        }
        Raster {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[j * self.width + i]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[j * self.width + i]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[j * self.width + i] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn rows(&self) -> core::slice::Chunks<'_, T> {
        self.data.chunks(self.width.max(1))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Fails with [`Error::DimensionMismatch`] unless `other` has the same size.
    pub fn check_dims<U>(&self, other: &Raster<U>, what: &'static str) -> Result<()> {
        check_dims(what, self.dims(), other.dims())
    }
}

pub(crate) fn check_dims(
    what: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

/// Metric depth in meters; values `≤ 0` or non-finite mark invalid pixels.
pub type DepthImage = Raster<f32>;

/// 8-bit RGB color.
pub type Rgb = [u8; 3];

pub type ColorImage = Raster<Rgb>;

/// Per-pixel boolean mask (ground region, blend mask).
pub type BinaryMask = Raster<bool>;

pub const INVALID_DEPTH: f32 = 0.0;

#[inline]
pub fn is_valid_depth(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

/// Per-pixel instance labels: 0 is background, `k ≥ 1` is object instance `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    pub labels: Raster<u16>,
}

impl InstanceMask {
    pub fn new(labels: Raster<u16>) -> Self {
        InstanceMask { labels }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    pub fn label(&self, i: usize, j: usize) -> u16 {
        *self.labels.get(i, j)
    }

    /// Distinct nonzero labels in ascending order.
    pub fn instance_ids(&self) -> Vec<u16> {
        let set: BTreeSet<u16> = self.labels.data().iter().copied().filter(|&l| l != 0).collect();
        set.into_iter().collect()
    }

    /// Checks that the nonzero labels form `{1..K}` with no gaps.
    pub fn validate(&self) -> Result<()> {
        for (expect, id) in self.instance_ids().into_iter().enumerate() {
            if id as usize != expect + 1 {
                return Err(Error::Config(format!(
                    "instance labels must be contiguous from 1; label {} missing",
                    expect + 1
                )));
            }
        }
        Ok(())
    }

    pub fn object_pixels(&self) -> BinaryMask {
        self.labels.map(|&l| l != 0)
    }
}

/// Number of valid pixels in a depth image.
pub fn valid_count(depth: &DepthImage) -> usize {
    depth.data().iter().filter(|d| is_valid_depth(**d)).count()
}
