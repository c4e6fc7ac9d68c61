use serde::{Deserialize, Serialize};

use super::GrayImage;

/// Contrast-limited adaptive histogram equalization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaheParams {
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Histogram bins are clipped at `clip * tile_area / 256`.
    pub clip: f64,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            tiles_x: 8,
            tiles_y: 8,
            clip: 2.0,
        }
    }
}

/// Tile boundaries along one axis: `[start, end)` for each tile.
fn tile_bounds(len: usize, tiles: usize) -> Vec<(usize, usize)> {
    (0..tiles)
        .map(|i| (i * len / tiles, (i + 1) * len / tiles))
        .collect()
}

/// For every coordinate, the two neighbouring tile indices and the weight of
/// the second one (linear interpolation between tile centres).
fn blend_weights(len: usize, bounds: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let centers: Vec<f64> = bounds
        .iter()
        .map(|&(s, e)| (s + e - 1) as f64 / 2.0)
        .collect();
    let last = centers.len() - 1;
    (0..len)
        .map(|p| {
            let p = p as f64;
            if p <= centers[0] {
                return (0, 0, 0.0);
            }
            if p >= centers[last] {
                return (last, last, 0.0);
            }
            let i = centers.partition_point(|&c| c <= p) - 1;
            let w = (p - centers[i]) / (centers[i + 1] - centers[i]);
            (i, i + 1, w)
        })
        .collect()
}

fn tile_lut(img: &GrayImage, xs: (usize, usize), ys: (usize, usize), clip: f64) -> [u8; 256] {
    let mut hist = [0u64; 256];
    for y in ys.0..ys.1 {
        for x in xs.0..xs.1 {
            hist[img.get(x, y) as usize] += 1;
        }
    }
    let area = ((xs.1 - xs.0) * (ys.1 - ys.0)) as u64;
    let limit = ((clip * area as f64 / 256.0) as u64).max(1);

    let mut excess = 0u64;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let batch = excess / 256;
    let mut residual = excess % 256;
    for h in hist.iter_mut() {
        *h += batch;
    }
    if residual > 0 {
        let step = (256 / residual).max(1) as usize;
        let mut i = 0;
        while i < 256 && residual > 0 {
            hist[i] += 1;
            residual -= 1;
            i += step;
        }
    }

    let scale = 255.0 / area as f64;
    let mut lut = [0u8; 256];
    let mut cdf = 0u64;
    for (v, h) in hist.iter().enumerate() {
        cdf += h;
        lut[v] = (cdf as f64 * scale).round().min(255.0) as u8;
    }
    lut
}

/// Tile-based adaptive histogram equalization with default parameters
/// (8x8 tiles, clip factor 2.0).
pub fn enhance_contrast(img: &GrayImage) -> GrayImage {
    enhance_contrast_with(img, ClaheParams::default())
}

pub fn enhance_contrast_with(img: &GrayImage, params: ClaheParams) -> GrayImage {
    let (w, h) = img.dims();
    let tx = params.tiles_x.clamp(1, w);
    let ty = params.tiles_y.clamp(1, h);
    let xb = tile_bounds(w, tx);
    let yb = tile_bounds(h, ty);

    let luts: Vec<[u8; 256]> = yb
        .iter()
        .flat_map(|&ys| xb.iter().map(move |&xs| (xs, ys)))
        .map(|(xs, ys)| tile_lut(img, xs, ys, params.clip))
        .collect();
    let lut = |i: usize, j: usize, v: u8| luts[j * tx + i][v as usize] as f64;

    let wx = blend_weights(w, &xb);
    let wy = blend_weights(h, &yb);
    let mut out = img.clone();
    for (y, &(j0, j1, fy)) in wy.iter().enumerate() {
        for (x, &(i0, i1, fx)) in wx.iter().enumerate() {
            let v = img.get(x, y);
            let top = lut(i0, j0, v) * (1.0 - fx) + lut(i1, j0, v) * fx;
            let bottom = lut(i0, j1, v) * (1.0 - fx) + lut(i1, j1, v) * fx;
            out.set(
                x,
                y,
                (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8,
            );
        }
    }
    out
}
