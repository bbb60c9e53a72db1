//! Raster files.
//!
//! - color: 8-bit RGB PNG (any PNG color type is accepted on read and converted);
//! - depth: PFM (`.pfm`, 32-bit float meters) or 16-bit grayscale PNG in millimeters
//!   (`.png`); `0` means no measurement in both;
//! - instance masks: 8- or 16-bit grayscale PNG, pixel value = instance id, written as 16-bit;
//! - binary masks: grayscale PNG, nonzero = set, written as 8-bit 0/255.
//!
//! PFM layout: ASCII header `Pf\n<width> <height>\n-1.0\n`, then `width × height`
//! little-endian f32 values, bottom row first (the PFM convention).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb as ImgRgb};
use scenelift_core::raster::{BinaryMask, ColorImage, DepthImage, InstanceMask, Raster};

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    image::open(path).map_err(|e| Error::format(path, e))
}

fn save(img: DynamicImage, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::format(path, e))
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

pub fn read_color(path: &Path) -> Result<ColorImage> {
    let img = open(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| p.0).collect();
    Ok(Raster::from_vec(w, h, data)?)
}

pub fn write_color(path: &Path, img: &ColorImage) -> Result<()> {
    let buf: ImageBuffer<ImgRgb<u8>, Vec<u8>> = ImageBuffer::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.data().iter().flatten().copied().collect(),
    )
    .expect("buffer length matches dimensions");
    save(DynamicImage::ImageRgb8(buf), path)
}

/// Gray values of a PNG without rescaling between bit depths.
fn read_gray(path: &Path) -> Result<Raster<u16>> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<u16> = match img {
        DynamicImage::ImageLuma8(b) => b.pixels().map(|p| p.0[0] as u16).collect(),
        DynamicImage::ImageLuma16(b) => b.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as u16).collect(),
        DynamicImage::ImageLumaA16(b) => b.pixels().map(|p| p.0[0]).collect(),
        other => {
            return Err(Error::format(
                path,
                format!("expected a grayscale PNG, found {:?}", other.color()),
            ))
        }
    };
    Ok(Raster::from_vec(w, h, data)?)
}

fn write_gray16(path: &Path, r: &Raster<u16>) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(r.width() as u32, r.height() as u32, r.data().to_vec()).expect("dims");
    save(DynamicImage::ImageLuma16(buf), path)
}

pub fn read_instance_mask(path: &Path) -> Result<InstanceMask> {
    Ok(InstanceMask::new(read_gray(path)?))
}

pub fn write_instance_mask(path: &Path, mask: &InstanceMask) -> Result<()> {
    write_gray16(path, &mask.labels)
}

pub fn read_binary_mask(path: &Path) -> Result<BinaryMask> {
    Ok(read_gray(path)?.map(|&v| v != 0))
}

pub fn write_binary_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(
        mask.width() as u32,
        mask.height() as u32,
        mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect(),
    )
    .expect("dims");
    save(DynamicImage::ImageLuma8(buf), path)
}

fn is_pfm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

/// Reads PFM or millimeter PNG depth, chosen by extension.
pub fn read_depth(path: &Path) -> Result<DepthImage> {
    if is_pfm(path) {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        return parse_pfm(&bytes).map_err(|m| Error::format(path, m));
    }
    Ok(read_gray(path)?.map(|&mm| mm as f32 / 1000.0))
}

/// Writes PFM or millimeter PNG depth, chosen by extension. PNG rounds to whole millimeters
/// and saturates at 65.535 m; invalid depth is written as 0.
pub fn write_depth(path: &Path, depth: &DepthImage) -> Result<()> {
    if is_pfm(path) {
        ensure_parent(path)?;
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        w.write_all(&encode_pfm(depth)).map_err(|e| Error::io(path, e))?;
        return w.flush().map_err(|e| Error::io(path, e));
    }
    let mm = depth.map(|&d| {
        if scenelift_core::raster::is_valid_depth(d) {
            (d as f64 * 1000.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        }
    });
    write_gray16(path, &mm)
}

pub fn encode_pfm(depth: &DepthImage) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", depth.width(), depth.height()).into_bytes();
    out.reserve(depth.len() * 4);
    for row in depth.rows().rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn parse_pfm(bytes: &[u8]) -> std::result::Result<DepthImage, String> {
    // Three whitespace-terminated header tokens after the magic.
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PFM header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    if magic != "Pf" {
        return Err(format!("expected single-channel PFM (`Pf`), found `{magic}`"));
    }
    let w: usize = token()?.parse().map_err(|_| "bad PFM width")?;
    let h: usize = token()?.parse().map_err(|_| "bad PFM height")?;
    let scale: f32 = token()?.parse().map_err(|_| "bad PFM scale")?;
    // Exactly one whitespace byte separates the header from the data.
    let data = &bytes[pos + 1..];
    let n = w.checked_mul(h).ok_or("PFM dimensions overflow")?;
    if data.len() < n * 4 {
        return Err(format!("PFM data holds {} bytes, expected {}", data.len(), n * 4));
    }
    let little = scale < 0.0;
    let mut values = vec![0f32; n];
    for (k, c) in data[..n * 4].chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (row, col) = (h - 1 - k / w, k % w);
        values[row * w + col] = v;
    }
    Raster::from_vec(w, h, values).map_err(|e| e.to_string())
}
