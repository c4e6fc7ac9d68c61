use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{generate, GroundTruth, TreeSpec, Wiggle};
use crate::error::{Error, Result};
use crate::raster::{GrayImage, Mask};

/// Ranges for randomly drawn trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOptions {
    pub width: usize,
    pub height: usize,
    pub generations: (u32, u32),
    pub length: (f64, f64),
    pub root_width: (f64, f64),
    pub min_leaf_width: f64,
    /// Child deviation from the parent direction, degrees.
    pub deviation: (f64, f64),
    pub angle_jitter: f64,
    pub wiggle_amplitude: (f64, f64),
    pub wiggle_period: (f64, f64),
}

impl SceneOptions {
    /// 1024 x 1024 trees with widths between 4 and 12 px.
    pub fn large() -> Self {
        Self {
            width: 1024,
            height: 1024,
            generations: (3, 4),
            length: (120.0, 190.0),
            root_width: (9.0, 12.0),
            min_leaf_width: 4.0,
            deviation: (25.0, 45.0),
            angle_jitter: 5.0,
            wiggle_amplitude: (0.0, 0.0),
            wiggle_period: (80.0, 160.0),
        }
    }

    /// Small scenes for fast correction-loop simulation.
    pub fn small(size: usize) -> Self {
        let s = size as f64;
        Self {
            width: size,
            height: size,
            generations: (2, 3),
            length: (0.22 * s, 0.32 * s),
            root_width: (6.0, 8.0),
            min_leaf_width: 3.0,
            deviation: (25.0, 45.0),
            angle_jitter: 5.0,
            wiggle_amplitude: (0.0, 2.0),
            wiggle_period: (0.3 * s, 0.6 * s),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..=range.1)
    } else {
        range.0
    }
}

/// A random tree growing upward from the bottom edge.
pub fn random_tree_spec(seed: u64, opts: &SceneOptions) -> TreeSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generations = rng.random_range(opts.generations.0..=opts.generations.1);
    let root_width = draw(&mut rng, opts.root_width);
    let min_taper = if generations > 1 {
        (opts.min_leaf_width / root_width).powf(1.0 / (generations - 1) as f64)
    } else {
        1.0
    };
    let taper = draw(&mut rng, (min_taper.max(0.7).min(0.9), 0.9));
    let (w, h) = (opts.width as f64, opts.height as f64);
    let amp = draw(&mut rng, opts.wiggle_amplitude);
    let period = draw(&mut rng, opts.wiggle_period);
    TreeSpec {
        width: opts.width,
        height: opts.height,
        root: [
            draw(&mut rng, (0.4 * w, 0.6 * w)),
            h - 1.0 - root_width - 4.0,
        ],
        heading_deg: -90.0 + draw(&mut rng, (-12.0, 12.0)),
        generations,
        length_min: opts.length.0,
        length_max: opts.length.1,
        branch_angles: [
            -draw(&mut rng, opts.deviation),
            draw(&mut rng, opts.deviation),
        ],
        angle_jitter: opts.angle_jitter,
        root_width,
        taper,
        wiggle: if amp > 0.0 {
            vec![Wiggle {
                amplitude: amp,
                period,
            }]
        } else {
            Vec::new()
        },
        seed,
    }
}

/// Draw trees from `seed` onward until one is fully on canvas with no
/// touching vessels.
pub fn sample_clean_scene(
    seed: u64,
    opts: &SceneOptions,
) -> Result<(TreeSpec, Mask, GrayImage, GroundTruth)> {
    for attempt in 0..1000u64 {
        let spec = random_tree_spec(seed.wrapping_mul(1000).wrapping_add(attempt), opts);
        let Ok((mask, image, truth)) = generate(&spec) else {
            continue;
        };
        if !truth.truncated && !truth.collision {
            return Ok((spec, mask, image, truth));
        }
    }
    Err(Error::State(format!(
        "no clean scene found for seed {seed}"
    )))
}
