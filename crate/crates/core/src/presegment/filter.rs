//! Multiscale Hessian ridge filter for bright tubular structures.

use rayon::prelude::*;

use super::{Structureness, VesselnessParams};
use crate::error::{Error, Result};
use crate::raster::{GrayImage, ProbabilityGrid};

/// Reflect an out-of-range index back into `[0, n)` (symmetric border).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

struct Kernels {
    radius: isize,
    smooth: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Kernels {
    fn new(sigma: f64) -> Self {
        let radius = (3.0 * sigma).ceil().max(1.0) as isize;
        let s2 = sigma * sigma;
        let taps: Vec<f64> = (-radius..=radius).map(|k| k as f64).collect();
        let mut smooth: Vec<f64> = taps.iter().map(|k| (-k * k / (2.0 * s2)).exp()).collect();
        let total: f64 = smooth.iter().sum();
        smooth.iter_mut().for_each(|g| *g /= total);

        // d/dx: antisymmetric, scaled so a unit ramp has unit slope.
        let mut first: Vec<f64> = taps.iter().zip(&smooth).map(|(k, g)| -k / s2 * g).collect();
        let slope: f64 = -taps.iter().zip(&first).map(|(k, d)| k * d).sum::<f64>();
        first.iter_mut().for_each(|d| *d /= slope);

        // d2/dx2: zero-mean so constants vanish, scaled so x^2/2 has unit curvature.
        let mut second: Vec<f64> = taps
            .iter()
            .zip(&smooth)
            .map(|(k, g)| (k * k / (s2 * s2) - 1.0 / s2) * g)
            .collect();
        let mean = second.iter().sum::<f64>() / second.len() as f64;
        second.iter_mut().for_each(|d| *d -= mean);
        let curvature: f64 = taps.iter().zip(&second).map(|(k, d)| k * k / 2.0 * d).sum();
        second.iter_mut().for_each(|d| *d /= curvature);

        Self {
            radius,
            smooth,
            first,
            second,
        }
    }
}

/// Convolve along x (`axis_x == true`) or y with a symmetric-border kernel.
fn convolve(
    src: &[f64],
    w: usize,
    h: usize,
    kernel: &[f64],
    radius: isize,
    axis_x: bool,
) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                let off = radius - t as isize;
                let v = if axis_x {
                    src[y * w + reflect(x as isize + off, w)]
                } else {
                    src[reflect(y as isize + off, h) * w + x]
                };
                acc += v * kv;
            }
            *o = acc;
        }
    });
    out
}

/// Eigenvalues of [[a, b], [b, c]] ordered so that |l1| <= |l2|.
#[inline]
pub(crate) fn sym_eigen(a: f64, b: f64, c: f64) -> (f64, f64) {
    let half_trace = (a + c) / 2.0;
    let disc = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let (e1, e2) = (half_trace + disc, half_trace - disc);
    if e1.abs() <= e2.abs() {
        (e1, e2)
    } else {
        (e2, e1)
    }
}

/// Vesselness response at one scale (ridge width in pixels; sigma = width / 2).
pub(crate) fn single_scale(
    data: &[f64],
    w: usize,
    h: usize,
    scale: f64,
    beta: f64,
    structureness: Structureness,
) -> Vec<f64> {
    let k = Kernels::new(scale / 2.0);
    let r = k.radius;
    let dxx = convolve(
        &convolve(data, w, h, &k.second, r, true),
        w,
        h,
        &k.smooth,
        r,
        false,
    );
    let dyy = convolve(
        &convolve(data, w, h, &k.smooth, r, true),
        w,
        h,
        &k.second,
        r,
        false,
    );
    let dxy = convolve(
        &convolve(data, w, h, &k.first, r, true),
        w,
        h,
        &k.first,
        r,
        false,
    );

    let eig: Vec<(f64, f64)> = (0..w * h)
        .map(|i| sym_eigen(dxx[i], dxy[i], dyy[i]))
        .collect();
    let c = match structureness {
        Structureness::HalfMaxNorm => {
            0.5 * eig
                .iter()
                .map(|(l1, l2)| (l1 * l1 + l2 * l2).sqrt())
                .fold(0.0, f64::max)
        }
        Structureness::Fixed(c) => c,
    };
    if c <= f64::EPSILON {
        return vec![0.0; w * h];
    }
    eig.iter()
        .map(|&(l1, l2)| {
            if l2 >= 0.0 {
                return 0.0;
            }
            let rb = l1 / l2;
            let s2 = l1 * l1 + l2 * l2;
            (-rb * rb / (2.0 * beta * beta)).exp() * (1.0 - (-s2 / (2.0 * c * c)).exp())
        })
        .collect()
}

pub(crate) fn image_data(img: &GrayImage) -> Vec<f64> {
    img.pixels().iter().map(|&v| v as f64).collect()
}

pub(crate) fn check_filter_input(img: &GrayImage) -> Result<()> {
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::invalid(format!(
            "vesselness needs at least 3x3 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

pub(crate) fn is_flat(img: &GrayImage) -> bool {
    let first = img.pixels()[0];
    img.pixels().iter().all(|&v| v == first)
}

/// Multiscale bright-ridge vesselness in [0, 1], the maximum over scales of
/// `exp(-Rb^2 / 2 beta^2) * (1 - exp(-S^2 / 2 c^2))` where `Rb = l1 / l2`,
/// `S` is the Hessian Frobenius norm and `c` the structureness normalizer.
/// Pixels with a non-negative dominant eigenvalue (dark ridges, valleys)
/// score zero.
pub fn vesselness(img: &GrayImage, params: &VesselnessParams) -> Result<ProbabilityGrid> {
    params.validate()?;
    check_filter_input(img)?;
    let (w, h) = img.dims();
    if is_flat(img) {
        return Ok(ProbabilityGrid::zeros(w, h));
    }
    let data = image_data(img);
    let mut best = vec![0.0f64; w * h];
    for &s in &params.scales {
        let resp = single_scale(&data, w, h, s, params.beta, params.structureness);
        for (b, r) in best.iter_mut().zip(resp) {
            *b = b.max(r);
        }
    }
    ProbabilityGrid::new(
        w,
        h,
        best.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect(),
    )
}
