use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use super::{GrayImage, Mask, ProbabilityGrid};
use crate::error::{Error, Result};

/// Leading bytes of a probability-grid file.
pub const PROBABILITY_MAGIC: &[u8] = b"VPRB1\n";

fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

fn to_gray(img: DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| (p.0[0] >> 8) as u8).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    GrayImage::new(w, h, pixels)
}

fn encode_l8(width: usize, height: usize, pixels: Vec<u8>) -> Result<Vec<u8>> {
    let buf = image::GrayImage::from_raw(width as u32, height as u32, pixels)
        .ok_or_else(|| Error::invalid("pixel buffer does not match dimensions"))?;
    let mut out = Cursor::new(Vec::new());
    DynamicImage::ImageLuma8(buf).write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn decode_gray_png(bytes: &[u8]) -> Result<GrayImage> {
    to_gray(image::load_from_memory(bytes)?)
}

pub fn encode_gray_png(img: &GrayImage) -> Result<Vec<u8>> {
    encode_l8(img.width(), img.height(), img.pixels().to_vec())
}

pub fn decode_mask_png(bytes: &[u8]) -> Result<Mask> {
    let gray = decode_gray_png(bytes)?;
    let bits = gray
        .pixels()
        .iter()
        .map(|&v| match v {
            0 => Ok(0),
            255 => Ok(1),
            other => Err(Error::NonBinaryMask(other)),
        })
        .collect::<Result<Vec<u8>>>()?;
    Mask::from_bits(gray.width(), gray.height(), bits)
}

pub fn encode_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    encode_l8(
        mask.width(),
        mask.height(),
        mask.bits().iter().map(|&b| b * 255).collect(),
    )
}

pub fn encode_probability(grid: &ProbabilityGrid) -> Vec<u8> {
    let header = format!("{} {}\n", grid.width(), grid.height());
    let mut out =
        Vec::with_capacity(PROBABILITY_MAGIC.len() + header.len() + grid.values().len() * 4);
    out.extend_from_slice(PROBABILITY_MAGIC);
    out.extend_from_slice(header.as_bytes());
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_probability(bytes: &[u8]) -> Result<ProbabilityGrid> {
    let rest = bytes
        .strip_prefix(PROBABILITY_MAGIC)
        .ok_or_else(|| Error::Malformed("missing VPRB1 magic".into()))?;
    let newline = rest
        .iter()
        .take(64)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Malformed("unterminated dimension header".into()))?;
    let header = std::str::from_utf8(&rest[..newline])
        .map_err(|_| Error::Malformed("dimension header is not ASCII".into()))?;
    let dims: Vec<usize> = header
        .split(' ')
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Malformed(format!("bad dimension header {header:?}")))?;
    let [width, height] = dims[..] else {
        return Err(Error::Malformed(format!("bad dimension header {header:?}")));
    };
    if width == 0 || height == 0 {
        return Err(Error::Malformed("zero dimension".into()));
    }
    let payload_len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Malformed("dimension overflow".into()))?;
    let payload = &rest[newline + 1..];
    if payload.len() != payload_len {
        return Err(Error::Malformed(format!(
            "payload holds {} bytes, {width}x{height} needs {payload_len}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ProbabilityGrid::new(width, height, values)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_gray_png(&read_bytes(path.as_ref())?)
}

pub fn write_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_gray_png(img)?)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask_png(&read_bytes(path.as_ref())?)
}

pub fn write_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask_png(mask)?)
}

pub fn read_probability(path: impl AsRef<Path>) -> Result<ProbabilityGrid> {
    decode_probability(&read_bytes(path.as_ref())?)
}

pub fn write_probability(grid: &ProbabilityGrid, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_probability(grid))
}
