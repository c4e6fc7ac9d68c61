//! Synthetic vessel trees with exact ground truth, and mask perturbation for
//! simulating imperfect proposals.

mod perturb;
mod scene;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use perturb::{perturb, PerturbSpec};
pub use scene::{random_tree_spec, sample_clean_scene, SceneOptions};

use crate::error::{Error, Result};
use crate::raster::{write_image, write_mask, GrayImage, Mask};

pub const TRUTH_SCHEMA: &str = "gtruth/1";
pub const VESSEL_LEVEL: f64 = 200.0;
pub const BACKGROUND_LEVEL: f64 = 30.0;
pub const NOISE_SIGMA: f64 = 8.0;

/// Lateral sinusoidal displacement `amplitude * sin(2 pi s / period)` along
/// the nominal segment direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wiggle {
    pub amplitude: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub width: usize,
    pub height: usize,
    pub root: [f64; 2],
    /// Degrees, image coordinates (y down); -90 points up.
    pub heading_deg: f64,
    /// Segment levels; 1 is a single segment, 3 a root with two levels of
    /// binary branching.
    pub generations: u32,
    pub length_min: f64,
    pub length_max: f64,
    /// Signed child deviations from the parent's end tangent, degrees.
    pub branch_angles: [f64; 2],
    /// Uniform jitter added to each child angle, degrees.
    pub angle_jitter: f64,
    pub root_width: f64,
    /// Width multiplier per generation.
    pub taper: f64,
    /// Wiggle per generation (index 0 is the root); the last entry repeats.
    /// Empty means straight segments.
    pub wiggle: Vec<Wiggle>,
    pub seed: u64,
}

impl TreeSpec {
    pub fn straight_bar(width: usize, height: usize, length: f64, bar_width: f64) -> Self {
        Self {
            width,
            height,
            root: [(width as f64 - length) / 2.0, height as f64 / 2.0],
            heading_deg: 0.0,
            generations: 1,
            length_min: length,
            length_max: length,
            branch_angles: [-30.0, 30.0],
            angle_jitter: 0.0,
            root_width: bar_width,
            taper: 1.0,
            wiggle: Vec::new(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("canvas must be non-empty"));
        }
        if self.generations == 0 {
            return Err(Error::invalid("generations must be >= 1"));
        }
        if !(self.length_min > 0.0 && self.length_min <= self.length_max) {
            return Err(Error::invalid(
                "segment length range must satisfy 0 < min <= max",
            ));
        }
        if !(self.taper > 0.0) || !(self.root_width > 0.0) {
            return Err(Error::invalid("widths and taper must be positive"));
        }
        if self.leaf_width() < 2.0 {
            return Err(Error::invalid(format!(
                "leaf width {:.2} px is below 2 px",
                self.leaf_width()
            )));
        }
        if self
            .wiggle
            .iter()
            .any(|w| !(w.period > 0.0) || w.amplitude < 0.0)
        {
            return Err(Error::invalid(
                "wiggle period must be positive and amplitude non-negative",
            ));
        }
        Ok(())
    }

    pub fn width_at(&self, generation: u32) -> f64 {
        self.root_width * self.taper.powi(generation as i32 - 1)
    }

    pub fn leaf_width(&self) -> f64 {
        self.width_at(self.generations)
    }

    fn wiggle_at(&self, generation: u32) -> Option<Wiggle> {
        let i = (generation as usize - 1).min(self.wiggle.len().checked_sub(1)?);
        let w = self.wiggle[i];
        (w.amplitude > 0.0).then_some(w)
    }

    /// Same tree with every length scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.width = (self.width as f64 * factor).round() as usize;
        s.height = (self.height as f64 * factor).round() as usize;
        s.root = [self.root[0] * factor, self.root[1] * factor];
        s.length_min *= factor;
        s.length_max *= factor;
        s.root_width *= factor;
        s.wiggle = self
            .wiggle
            .iter()
            .map(|w| Wiggle {
                amplitude: w.amplitude * factor,
                period: w.period * factor,
            })
            .collect();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSegment {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// 1 for the root segment.
    pub generation: u32,
    pub strahler: u32,
    pub width: f64,
    /// Dense samples of the analytic centreline.
    pub polyline: Vec<[f64; 2]>,
    pub arc_length: f64,
    pub chord_length: f64,
    /// Tangent directions at the start and end, degrees.
    pub heading_start_deg: f64,
    pub heading_end_deg: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthJunction {
    pub position: [f64; 2],
    pub parent: usize,
    pub children: [usize; 2],
    /// Angle between the two child start tangents, degrees.
    pub branching_angle: f64,
    /// Each child's deviation from the parent end tangent, degrees.
    pub child_deviation: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub schema: String,
    pub width: usize,
    pub height: usize,
    pub segments: Vec<TruthSegment>,
    pub junctions: Vec<TruthJunction>,
    pub junction_count: usize,
    /// Free tips of leaf segments (the root's start is not counted).
    pub terminal_count: usize,
    pub depth: u32,
    pub truncated: bool,
    /// True when non-adjacent vessels touch or nearly touch, so the mask's
    /// topology may differ from the generator's.
    pub collision: bool,
}

impl GroundTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: GroundTruth = serde_json::from_str(s)?;
        if t.schema != TRUTH_SCHEMA {
            return Err(Error::Malformed(format!(
                "unsupported truth schema {:?}",
                t.schema
            )));
        }
        Ok(t)
    }

    pub fn total_arc_length(&self) -> f64 {
        self.segments.iter().map(|s| s.arc_length).sum()
    }
}

fn rotate(v: [f64; 2], deg: f64) -> [f64; 2] {
    let (s, c) = deg.to_radians().sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn heading_of(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0]).to_degrees()
}

pub(crate) fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Composite Simpson quadrature of `f` over `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

struct Curve {
    start: [f64; 2],
    dir: [f64; 2],
    normal: [f64; 2],
    wiggle: Option<Wiggle>,
}

impl Curve {
    fn point(&self, s: f64) -> [f64; 2] {
        let off = self.wiggle.map_or(0.0, |w| {
            w.amplitude * (std::f64::consts::TAU * s / w.period).sin()
        });
        [
            self.start[0] + s * self.dir[0] + off * self.normal[0],
            self.start[1] + s * self.dir[1] + off * self.normal[1],
        ]
    }

    fn tangent(&self, s: f64) -> [f64; 2] {
        let d = self.wiggle.map_or(0.0, |w| {
            w.amplitude * std::f64::consts::TAU / w.period
                * (std::f64::consts::TAU * s / w.period).cos()
        });
        let t = [
            self.dir[0] + d * self.normal[0],
            self.dir[1] + d * self.normal[1],
        ];
        let n = t[0].hypot(t[1]);
        [t[0] / n, t[1] / n]
    }

    fn speed(&self, s: f64) -> f64 {
        let d = self.wiggle.map_or(0.0, |w| {
            w.amplitude * std::f64::consts::TAU / w.period
                * (std::f64::consts::TAU * s / w.period).cos()
        });
        (1.0 + d * d).sqrt()
    }
}

const SAMPLE_STEP: f64 = 0.5;

/// Build the tree geometry (no rasterization).
pub fn generate_truth(spec: &TreeSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut segments: Vec<TruthSegment> = Vec::new();
    // (parent, generation, start, direction)
    let mut queue = std::collections::VecDeque::new();
    queue.push_back((
        None::<usize>,
        1u32,
        spec.root,
        rotate([1.0, 0.0], spec.heading_deg),
    ));
    let (w, h) = (spec.width as f64, spec.height as f64);

    while let Some((parent, generation, start, dir)) = queue.pop_front() {
        let length = if spec.length_max > spec.length_min {
            rng.random_range(spec.length_min..=spec.length_max)
        } else {
            spec.length_min
        };
        let width = spec.width_at(generation);
        let curve = Curve {
            start,
            dir,
            normal: [-dir[1], dir[0]],
            wiggle: spec.wiggle_at(generation),
        };
        let margin = width / 2.0 + 1.0;
        let inside = |p: [f64; 2]| {
            p[0] >= margin && p[1] >= margin && p[0] <= w - 1.0 - margin && p[1] <= h - 1.0 - margin
        };
        let steps = (length / SAMPLE_STEP).ceil() as usize;
        let mut polyline = Vec::with_capacity(steps + 1);
        let mut end_s = 0.0;
        let mut truncated = false;
        for k in 0..=steps {
            let s = (k as f64 * SAMPLE_STEP).min(length);
            let p = curve.point(s);
            if !inside(p) {
                truncated = true;
                break;
            }
            polyline.push(p);
            end_s = s;
        }
        if polyline.len() < 2 {
            if parent.is_none() {
                return Err(Error::invalid("tree has no on-canvas segment"));
            }
            continue;
        }
        let id = segments.len();
        let last = *polyline.last().expect("two points");
        let chord = (last[0] - start[0]).hypot(last[1] - start[1]);
        let arc = simpson(|s| curve.speed(s), 0.0, end_s, 4096);
        let t_end = curve.tangent(end_s);
        segments.push(TruthSegment {
            id,
            parent,
            children: Vec::new(),
            generation,
            strahler: 1,
            width,
            polyline,
            arc_length: arc,
            chord_length: chord,
            heading_start_deg: heading_of(curve.tangent(0.0)),
            heading_end_deg: heading_of(t_end),
            truncated,
        });
        if let Some(p) = parent {
            segments[p].children.push(id);
        }
        if !truncated && generation < spec.generations {
            for &a in &spec.branch_angles {
                let jitter = if spec.angle_jitter > 0.0 {
                    rng.random_range(-spec.angle_jitter..=spec.angle_jitter)
                } else {
                    0.0
                };
                queue.push_back((Some(id), generation + 1, last, rotate(t_end, a + jitter)));
            }
        }
    }

    // Strahler, leaves first (children always have larger ids).
    for i in (0..segments.len()).rev() {
        let kids: Vec<u32> = segments[i]
            .children
            .iter()
            .map(|&c| segments[c].strahler)
            .collect();
        if let Some(&max) = kids.iter().max() {
            let at_max = kids.iter().filter(|&&k| k == max).count();
            segments[i].strahler = if at_max >= 2 { max + 1 } else { max };
        }
    }

    let mut junctions = Vec::new();
    for s in &segments {
        if s.children.len() == 2 {
            let (c1, c2) = (&segments[s.children[0]], &segments[s.children[1]]);
            junctions.push(TruthJunction {
                position: *s.polyline.last().expect("non-empty"),
                parent: s.id,
                children: [c1.id, c2.id],
                branching_angle: angle_diff(c1.heading_start_deg, c2.heading_start_deg),
                child_deviation: [
                    angle_diff(c1.heading_start_deg, s.heading_end_deg),
                    angle_diff(c2.heading_start_deg, s.heading_end_deg),
                ],
            });
        }
    }

    let collision = detect_collision(&segments);
    Ok(GroundTruth {
        schema: TRUTH_SCHEMA.to_string(),
        width: spec.width,
        height: spec.height,
        junction_count: segments.iter().filter(|s| !s.children.is_empty()).count(),
        terminal_count: segments.iter().filter(|s| s.children.is_empty()).count(),
        depth: segments.iter().map(|s| s.generation).max().unwrap_or(0),
        truncated: segments.iter().any(|s| s.truncated),
        junctions,
        segments,
        collision,
    })
}

/// Vessels closer than their half widths plus a small gap, ignoring the
/// stretch near a shared junction.
fn detect_collision(segments: &[TruthSegment]) -> bool {
    const GAP: f64 = 3.0;
    let related = |a: &TruthSegment, b: &TruthSegment| {
        a.parent == Some(b.id)
            || b.parent == Some(a.id)
            || (a.parent.is_some() && a.parent == b.parent)
    };
    for (i, a) in segments.iter().enumerate() {
        for b in &segments[i + 1..] {
            let limit = (a.width + b.width) / 2.0 + GAP;
            let shared = if related(a, b) {
                let ends = [a.polyline[0], *a.polyline.last().unwrap()];
                let bends = [b.polyline[0], *b.polyline.last().unwrap()];
                ends.iter()
                    .flat_map(|p| bends.iter().map(move |q| (*p, *q)))
                    .find(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]) < 1e-9)
                    .map(|(p, _)| p)
            } else {
                None
            };
            let exclusion = a.width + b.width + 10.0;
            for p in a.polyline.iter().step_by(4) {
                if let Some(j) = shared {
                    if (p[0] - j[0]).hypot(p[1] - j[1]) < exclusion {
                        continue;
                    }
                }
                for q in b.polyline.iter().step_by(4) {
                    if let Some(j) = shared {
                        if (q[0] - j[0]).hypot(q[1] - j[1]) < exclusion {
                            continue;
                        }
                    }
                    if (p[0] - q[0]).hypot(p[1] - q[1]) < limit {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// Set every pixel whose centre lies closer than the local radius to the
/// polyline. `widths` holds one full width per point.
pub fn rasterize_polyline(mask: &mut Mask, points: &[[f64; 2]], widths: &[f64]) {
    assert_eq!(points.len(), widths.len(), "one width per point");
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let stamp = |mask: &mut Mask, a: [f64; 2], b: [f64; 2], ra: f64, rb: f64| {
        let r = ra.max(rb);
        let x0 = ((a[0].min(b[0]) - r).floor() as isize).max(0);
        let x1 = ((a[0].max(b[0]) + r).ceil() as isize).min(w - 1);
        let y0 = ((a[1].min(b[1]) - r).floor() as isize).max(0);
        let y1 = ((a[1].max(b[1]) + r).ceil() as isize).min(h - 1);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (px, py) = (x as f64, y as f64);
                let t = if len2 > 0.0 {
                    (((px - a[0]) * dx + (py - a[1]) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = (px - a[0] - t * dx).hypot(py - a[1] - t * dy);
                if d < ra + t * (rb - ra) {
                    mask.set(x as usize, y as usize, true);
                }
            }
        }
    };
    if points.len() == 1 {
        stamp(mask, points[0], points[0], widths[0] / 2.0, widths[0] / 2.0);
    }
    for i in 1..points.len() {
        stamp(
            mask,
            points[i - 1],
            points[i],
            widths[i - 1] / 2.0,
            widths[i] / 2.0,
        );
    }
}

/// Exact vessel mask of a ground truth.
pub fn rasterize_truth(truth: &GroundTruth) -> Mask {
    let mut mask = Mask::new(truth.width, truth.height);
    for s in &truth.segments {
        let widths = vec![s.width; s.polyline.len()];
        rasterize_polyline(&mut mask, &s.polyline, &widths);
    }
    mask
}

/// Bright vessels on a dark background with seeded Gaussian noise.
pub fn render_image(mask: &Mask, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a6e);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let (w, h) = mask.dims();
    GrayImage::from_fn(w, h, |x, y| {
        let base = if mask.get(x, y) {
            VESSEL_LEVEL
        } else {
            BACKGROUND_LEVEL
        };
        (base + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8
    })
}

/// Mask, rendered image and ground truth of a tree.
pub fn generate(spec: &TreeSpec) -> Result<(Mask, GrayImage, GroundTruth)> {
    let truth = generate_truth(spec)?;
    let mask = rasterize_truth(&truth);
    let image = render_image(&mask, spec.seed);
    Ok((mask, image, truth))
}

/// Write `image.png`, `mask.png` and `truth.json` into `dir`.
pub fn write_bundle(
    dir: impl AsRef<Path>,
    mask: &Mask,
    image: &GrayImage,
    truth: &GroundTruth,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_image(image, dir.join("image.png"))?;
    write_mask(mask, dir.join("mask.png"))?;
    let path = dir.join("truth.json");
    std::fs::write(&path, truth.to_json()?).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
