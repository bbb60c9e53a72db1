//! Depth-gated compositing of rendered frames over the real background.
//!
//! A rendered pixel replaces the background exactly when it is strictly nearer than the
//! background by more than `epsilon`:
//!
//! ```text
//! M(u,v)  = 1  if D_t(u,v) < D_B(u,v) − ε, else 0
//! I'(u,v) = M ? I_t(u,v) : I_B(u,v)
//! ```
//!
//! Invalid rendered depth counts as +∞ (never foreground); invalid background depth counts
//! as +∞ (any valid rendered depth wins). Comparisons are done in f64.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{is_valid_depth, BinaryMask, ColorImage, DepthImage, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlendConfig {
    /// Meters.
    pub epsilon: f64,
    pub export_masks: bool,
}

impl Default for BlendConfig {
    fn default() -> Self {
        BlendConfig {
            epsilon: 0.005,
            export_masks: false,
        }
    }
}

impl BlendConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config("blend epsilon must be a finite value >= 0".into()));
        }
        Ok(())
    }
}

/// The per-pixel predicate.
#[inline]
pub fn is_foreground(rendered: f32, background: f32, epsilon: f64) -> bool {
    is_valid_depth(rendered) && (!is_valid_depth(background) || (rendered as f64) < background as f64 - epsilon)
}

pub fn blend_mask(rendered: &DepthImage, background: &DepthImage, epsilon: f64) -> Result<BinaryMask> {
    rendered.check_dims(background, "rendered vs background depth")?;
    if !(epsilon >= 0.0) {
        return Err(Error::Config("blend epsilon must be >= 0".into()));
    }
    let data = rendered
        .data()
        .iter()
        .zip(background.data())
        .map(|(&t, &b)| is_foreground(t, b, epsilon))
        .collect();
    Raster::from_vec(rendered.width(), rendered.height(), data)
}

/// Output of compositing one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Blended {
    pub color: ColorImage,
    pub mask: BinaryMask,
}

pub fn blend_frame(
    rendered_color: &ColorImage,
    rendered_depth: &DepthImage,
    background_color: &ColorImage,
    background_depth: &DepthImage,
    cfg: &BlendConfig,
) -> Result<Blended> {
    cfg.validate()?;
    rendered_color.check_dims(rendered_depth, "rendered color vs depth")?;
    rendered_color.check_dims(background_color, "rendered vs background color")?;
    let mask = blend_mask(rendered_depth, background_depth, cfg.epsilon)?;
    let color = apply_mask(&mask, rendered_color, background_color)?;
    Ok(Blended { color, mask })
}

/// Per-pixel selection: foreground where the mask is set, background elsewhere.
pub fn apply_mask(mask: &BinaryMask, fg: &ColorImage, bg: &ColorImage) -> Result<ColorImage> {
    mask.check_dims(fg, "mask vs foreground")?;
    mask.check_dims(bg, "mask vs background")?;
    let data = mask
        .data()
        .iter()
        .zip(fg.data().iter().zip(bg.data()))
        .map(|(&m, (f, b))| if m { *f } else { *b })
        .collect();
    Raster::from_vec(mask.width(), mask.height(), data)
}

/// One rendered frame with its opaque action payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub color: ColorImage,
    pub depth: DepthImage,
    pub action: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
}

impl FrameSequence {
    /// All frames must share dimensions.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.frames.first() else {
            return Ok(());
        };
        for (index, f) in self.frames.iter().enumerate() {
            f.color
                .check_dims(&first.color, "frame vs first frame")
                .and_then(|_| f.color.check_dims(&f.depth, "frame color vs depth"))
                .map_err(|e| Error::Frame {
                    index,
                    source: Box::new(e),
                })?;
        }
        Ok(())
    }
}

/// A blended frame paired with its untouched action payload.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendedFrame {
    pub color: ColorImage,
    /// Present when `export_masks` is set.
    pub mask: Option<BinaryMask>,
    pub action: Vec<u8>,
}

/// Blends one frame of a sequence, tagging errors with its index.
pub fn blend_indexed(
    index: usize,
    frame: &Frame,
    background_color: &ColorImage,
    background_depth: &DepthImage,
    cfg: &BlendConfig,
) -> Result<BlendedFrame> {
    let b = blend_frame(&frame.color, &frame.depth, background_color, background_depth, cfg).map_err(|e| Error::Frame {
        index,
        source: Box::new(e),
    })?;
    Ok(BlendedFrame {
        color: b.color,
        mask: cfg.export_masks.then_some(b.mask),
        action: frame.action.clone(),
    })
}

pub fn blend_sequence(
    seq: &FrameSequence,
    background_color: &ColorImage,
    background_depth: &DepthImage,
    cfg: &BlendConfig,
) -> Result<Vec<BlendedFrame>> {
    seq.frames
        .iter()
        .enumerate()
        .map(|(i, f)| blend_indexed(i, f, background_color, background_depth, cfg))
        .collect()
}
