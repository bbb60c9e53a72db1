//! Frame directories.
//!
//! Input, per frame `k` (six-digit zero-padded, contiguous from `000000`):
//! - `k_color.png` — rendered color `I_t` (8-bit RGB);
//! - `k_depth.pfm` — rendered depth `D_t` (f32 meters, 0 = no geometry);
//! - `k_action.bin` — optional opaque action payload.
//!
//! Output mirrors it: `k_blended.png` (`I′_t`), `k_mask.png` when masks are exported (8-bit,
//! 255 = rendered pixel kept), `k_action.bin` copied byte-for-byte, plus `blend.json` with
//! the run metadata.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scenelift_core::composite::{blend_indexed, BlendConfig, Frame};
use scenelift_core::raster::{ColorImage, DepthImage};

use crate::error::{Error, Result};
use crate::raster_io::{read_color, read_depth, write_binary_mask, write_color, write_depth};

pub fn frame_path(dir: &Path, index: usize, suffix: &str) -> PathBuf {
    dir.join(format!("{index:06}_{suffix}"))
}

/// Number of frames, checking that indices are contiguous from zero.
pub fn count_frames(dir: &Path) -> Result<usize> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indices = Vec::new();
    for e in entries {
        let name = e.map_err(|e| Error::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(idx) = name.strip_suffix("_color.png") {
            let k: usize = idx
                .parse()
                .map_err(|_| Error::format(dir, format!("bad frame file name `{name}`")))?;
            indices.push(k);
        }
    }
    indices.sort_unstable();
    for (expect, &k) in indices.iter().enumerate() {
        if k != expect {
            return Err(Error::format(dir, format!("frame {expect:06} is missing")));
        }
    }
    Ok(indices.len())
}

pub fn read_frame(dir: &Path, index: usize) -> Result<Frame> {
    let action_path = frame_path(dir, index, "action.bin");
    let action = if action_path.exists() {
        fs::read(&action_path).map_err(|e| Error::io(&action_path, e))?
    } else {
        Vec::new()
    };
    Ok(Frame {
        color: read_color(&frame_path(dir, index, "color.png"))?,
        depth: read_depth(&frame_path(dir, index, "depth.pfm"))?,
        action,
    })
}

pub fn write_frame(dir: &Path, index: usize, frame: &Frame) -> Result<()> {
    write_color(&frame_path(dir, index, "color.png"), &frame.color)?;
    write_depth(&frame_path(dir, index, "depth.pfm"), &frame.depth)?;
    if !frame.action.is_empty() {
        let p = frame_path(dir, index, "action.bin");
        fs::write(&p, &frame.action).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendMetadata {
    pub frames: usize,
    pub epsilon: f64,
    pub export_masks: bool,
    /// `file` when the background depth was supplied, `rendered` when synthesized from the scene.
    pub background_depth_source: String,
    /// Per-frame count of rendered pixels kept.
    pub foreground_pixels: Vec<usize>,
}

/// Blends every frame of `input` into `output`, frames in parallel.
pub fn blend_directory(
    input: &Path,
    output: &Path,
    background_color: &ColorImage,
    background_depth: &DepthImage,
    background_depth_source: &str,
    cfg: &BlendConfig,
) -> Result<BlendMetadata> {
    cfg.validate()?;
    background_color
        .check_dims(background_depth, "background color vs depth")
        .map_err(|e| e.in_stage("blend"))?;
    let n = count_frames(input)?;
    fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    let with_masks = BlendConfig {
        export_masks: true,
        ..*cfg
    };
    let counts = (0..n)
        .into_par_iter()
        .map(|k| -> Result<usize> {
            let frame = read_frame(input, k)?;
            let out = blend_indexed(k, &frame, background_color, background_depth, &with_masks)?;
            let mask = out.mask.expect("requested");
            write_color(&frame_path(output, k, "blended.png"), &out.color)?;
            if cfg.export_masks {
                write_binary_mask(&frame_path(output, k, "mask.png"), &mask)?;
            }
            let src = frame_path(input, k, "action.bin");
            if src.exists() {
                let dst = frame_path(output, k, "action.bin");
                fs::copy(&src, &dst).map_err(|e| Error::io(&dst, e))?;
            }
            Ok(mask.data().iter().filter(|&&m| m).count())
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = BlendMetadata {
        frames: n,
        epsilon: cfg.epsilon,
        export_masks: cfg.export_masks,
        background_depth_source: background_depth_source.to_string(),
        foreground_pixels: counts,
    };
    crate::files::write_json(&output.join("blend.json"), &meta)?;
    Ok(meta)
}
