//! Raster containers shared by every stage: grayscale source frames, binary
//! vessel masks and per-pixel probability grids, plus resizing, contrast
//! enhancement and file I/O.

mod enhance;
mod io;
mod resize;

pub use enhance::{enhance_contrast, enhance_contrast_with, ClaheParams};
pub use io::{
    decode_gray_png, decode_mask_png, decode_probability, encode_gray_png, encode_mask_png,
    encode_probability, read_image, read_mask, read_probability, write_image, write_mask,
    write_probability, PROBABILITY_MAGIC,
};
pub use resize::resize;

use crate::error::{Error, Result};

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "raster dimensions must be positive, got {width}x{height}"
        )));
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::invalid("raster dimensions overflow"))?;
    if expected != len {
        return Err(Error::invalid(format!(
            "buffer holds {len} values, {width}x{height} needs {expected}"
        )));
    }
    Ok(())
}

/// Single-channel 8-bit image in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    /// Physical length per pixel; 1.0 when uncalibrated.
    pub pixel_scale: f64,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
            pixel_scale: 1.0,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
            pixel_scale: 1.0,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
            pixel_scale: 1.0,
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

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::from_fn(self.height, self.width, |x, y| self.get(y, x));
        out.pixel_scale = self.pixel_scale;
        out
    }
}

/// Binary vessel map. Values are stored as 0/1 bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "empty mask");
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize) -> Self {
        let mut m = Self::new(width, height);
        m.bits.fill(1);
        m
    }

    /// Builds a mask from 0/1 values; any other value is rejected.
    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        if let Some(&v) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("mask bit {v} is not 0 or 1")));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.bits[y * width + x] = 1;
                }
            }
        }
        m
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

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    /// Coordinates of every foreground pixel in raster order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Number of pixels whose value differs between the two masks.
    pub fn hamming(&self, other: &Mask) -> Result<usize> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Rotates 90 degrees clockwise.
    pub fn rotate90(&self) -> Self {
        let (w, h) = self.dims();
        Self::from_fn(h, w, |x, y| self.get(y, h - 1 - x))
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims() == other.dims()
            && self
                .bits
                .iter()
                .zip(&other.bits)
                .all(|(&a, &b)| a == 0 || b != 0)
    }
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Per-pixel probability in [0, 1], stored as f32 to match the on-disk format.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityGrid {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl ProbabilityGrid {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some(&v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ProbabilityOutOfRange(v));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "empty grid");
        Self {
            width,
            height,
            values: vec![0.0; width * height],
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

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Pixels with probability at or above `threshold` become foreground.
    pub fn threshold(&self, threshold: f64) -> Mask {
        let bits = self
            .values
            .iter()
            .map(|&v| (v as f64 >= threshold) as u8)
            .collect();
        Mask {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    /// `1 - p` at every pixel.
    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| 1.0 - v).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for y in 0..self.width {
            for x in 0..self.height {
                values.push(self.get(y, x));
            }
        }
        Self {
            width: self.height,
            height: self.width,
            values,
        }
    }
}
