//! Curve-level shape measures on a centreline polyline.

use serde::{Deserialize, Serialize};

use super::MorphoConfig;

pub type Point = [f64; 2];

#[inline]
fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Gaussian smoothing along the chain (sigma in samples). Both ends are
/// padded by point reflection so endpoints and straight runs stay in place.
pub fn smooth(points: &[Point], sigma: f64) -> Vec<Point> {
    let n = points.len();
    if n < 3 || sigma <= 0.0 {
        return points.to_vec();
    }
    let radius = ((3.0 * sigma).ceil() as usize).min(n - 1);
    let weights: Vec<f64> = (0..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let at = |i: isize| -> Point {
        let last = n as isize - 1;
        if i < 0 {
            let m = points[(-i) as usize];
            [2.0 * points[0][0] - m[0], 2.0 * points[0][1] - m[1]]
        } else if i > last {
            let m = points[(2 * last - i) as usize];
            let e = points[last as usize];
            [2.0 * e[0] - m[0], 2.0 * e[1] - m[1]]
        } else {
            points[i as usize]
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n as isize {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for k in -(radius as isize)..=radius as isize {
            let wk = weights[k.unsigned_abs()];
            let p = at(i + k);
            sx += wk * p[0];
            sy += wk * p[1];
            sw += wk;
        }
        out.push([sx / sw, sy / sw]);
    }
    out[0] = points[0];
    out[n - 1] = points[n - 1];
    out
}

/// Points at uniform arc spacing `step` along the polyline; the final point
/// is always kept, so the last interval may be shorter.
pub fn resample(points: &[Point], step: f64) -> Vec<Point> {
    if points.len() < 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut next = step;
    let mut travelled = 0.0;
    for seg in points.windows(2) {
        let len = dist(seg[0], seg[1]);
        while len > 0.0 && travelled + len >= next {
            let t = (next - travelled) / len;
            out.push([
                seg[0][0] + t * (seg[1][0] - seg[0][0]),
                seg[0][1] + t * (seg[1][1] - seg[0][1]),
            ]);
            next += step;
        }
        travelled += len;
    }
    let last = *points.last().expect("non-empty");
    if dist(*out.last().expect("non-empty"), last) > 1e-9 {
        out.push(last);
    }
    out
}

pub fn arc_length(points: &[Point]) -> f64 {
    points.windows(2).map(|p| dist(p[0], p[1])).sum()
}

/// Box-counting dimension of a set of integer pixels, from the least-squares
/// slope of `ln N(s)` against `ln(1/s)` over the given box sizes. `None` with
/// fewer than two usable sizes.
pub fn box_count_dimension(pixels: &[(i64, i64)], sizes: &[i64]) -> Option<f64> {
    if pixels.is_empty() {
        return None;
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &s in sizes {
        let mut boxes: Vec<(i64, i64)> = pixels
            .iter()
            .map(|&(x, y)| (x.div_euclid(s), y.div_euclid(s)))
            .collect();
        boxes.sort_unstable();
        boxes.dedup();
        xs.push((1.0 / s as f64).ln());
        ys.push((boxes.len() as f64).ln());
    }
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some((sxy / sxx).clamp(1.0, 2.0))
}

/// Integer pixels touched by the polyline (1-px DDA).
pub fn rasterize(points: &[Point]) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for seg in points.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let steps = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            out.push((
                (a[0] + t * (b[0] - a[0])).round() as i64,
                (a[1] + t * (b[1] - a[1])).round() as i64,
            ));
        }
    }
    if points.len() == 1 {
        out.push((points[0][0].round() as i64, points[0][1].round() as i64));
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetrics {
    pub arc_length: f64,
    pub chord_length: f64,
    pub tortuosity: Option<f64>,
    pub tortuosity_density: Option<f64>,
    pub inflection_count: u32,
    pub inflection_tortuosity: Option<f64>,
    /// Degrees.
    pub curve_angle: f64,
    /// Degrees per vertex.
    pub curve_angle_tortuosity: Option<f64>,
    /// Degrees per pixel.
    pub angle_tortuosity: Option<f64>,
    pub fractal_tortuosity: Option<f64>,
}

/// Shape measures of a centreline given as raw pixel coordinates. The chain
/// is smoothed, resampled at `config.resample_step`, and measured on the
/// resampled polyline.
pub fn curve_metrics(raw: &[Point], config: &MorphoConfig) -> CurveMetrics {
    let pts = resample(&smooth(raw, config.smoothing_sigma), config.resample_step);
    measure_resampled(&pts, config)
}

pub(crate) fn measure_resampled(pts: &[Point], config: &MorphoConfig) -> CurveMetrics {
    let arc = arc_length(pts);
    let chord = if pts.len() >= 2 {
        dist(pts[0], pts[pts.len() - 1])
    } else {
        0.0
    };
    let tortuosity = (chord >= 1.0).then(|| (arc / chord).max(1.0));

    let dirs: Vec<Point> = pts
        .windows(2)
        .filter_map(|p| {
            let d = dist(p[0], p[1]);
            (d > 1e-12).then(|| [(p[1][0] - p[0][0]) / d, (p[1][1] - p[0][1]) / d])
        })
        .collect();
    let mut turns = Vec::new();
    let mut cross = Vec::new();
    for d in dirs.windows(2) {
        let z = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        let dot = d[0][0] * d[1][0] + d[0][1] * d[1][1];
        turns.push(z.atan2(dot).to_degrees());
        cross.push(z);
    }
    let curve_angle: f64 = turns.iter().map(|t| t.abs()).sum();

    // Inflections: sign changes among significant cross products. The
    // breakpoint is the resampled vertex where the new sign first appears.
    let mut breaks = Vec::new();
    let mut last_sign = 0.0;
    for (i, &z) in cross.iter().enumerate() {
        if z.abs() <= config.inflection_eps {
            continue;
        }
        let s = z.signum();
        if last_sign != 0.0 && s != last_sign {
            breaks.push(i + 1);
        }
        last_sign = s;
    }
    let inflections = breaks.len() as u32;

    let tortuosity_density = (arc > 0.0).then(|| {
        let mut bounds = vec![0];
        bounds.extend(&breaks);
        bounds.push(pts.len() - 1);
        let n = (bounds.len() - 1) as f64;
        let excess: f64 = bounds
            .windows(2)
            .map(|b| {
                let sub = &pts[b[0]..=b[1]];
                let c = dist(sub[0], sub[sub.len() - 1]);
                if c > 0.0 {
                    (arc_length(sub) / c - 1.0).max(0.0)
                } else {
                    0.0
                }
            })
            .sum();
        (n - 1.0) / n * excess / arc
    });

    let fractal = {
        let px = rasterize(pts);
        let (minx, maxx) = px
            .iter()
            .fold((i64::MAX, i64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let (miny, maxy) = px
            .iter()
            .fold((i64::MAX, i64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let extent = (maxx - minx).max(maxy - miny) + 1;
        let sizes: Vec<i64> = (0..)
            .map(|k| 1i64 << k)
            .take_while(|&s| 2 * s <= extent)
            .collect();
        box_count_dimension(&px, &sizes)
    };

    CurveMetrics {
        arc_length: arc,
        chord_length: chord,
        tortuosity,
        tortuosity_density,
        inflection_count: inflections,
        inflection_tortuosity: tortuosity.map(|t| (inflections as f64 + 1.0) * t),
        curve_angle,
        curve_angle_tortuosity: (!turns.is_empty()).then(|| curve_angle / turns.len() as f64),
        angle_tortuosity: (arc > 0.0).then(|| curve_angle / arc),
        fractal_tortuosity: fractal,
    }
}
