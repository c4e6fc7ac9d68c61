use super::GrayImage;
use crate::error::{Error, Result};

/// Maps an output pixel centre to a clamped source coordinate, split into the
/// lower sample index and the fractional weight of the upper one.
fn source_coord(out: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let s = ((out as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, s - lo as f64)
}

/// Bilinear resize using pixel-centre alignment. `pixel_scale` is rescaled so
/// the physical extent of the frame is unchanged.
pub fn resize(img: &GrayImage, target_w: usize, target_h: usize) -> Result<GrayImage> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::invalid(format!(
            "resize target must be positive, got {target_w}x{target_h}"
        )));
    }
    let (w, h) = img.dims();
    let cols: Vec<_> = (0..target_w)
        .map(|x| source_coord(x, w, target_w))
        .collect();
    let rows: Vec<_> = (0..target_h)
        .map(|y| source_coord(y, h, target_h))
        .collect();

    let mut out = Vec::with_capacity(target_w * target_h);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
            let bottom = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    let mut resized = GrayImage::new(target_w, target_h, out)?;
    resized.pixel_scale = img.pixel_scale * w as f64 / target_w as f64;
    Ok(resized)
}
