use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Mask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    /// Probability that each vessel-bearing tile is erased.
    pub dropout_rate: f64,
    /// Probability that each boundary pixel is flipped.
    pub dilation_noise: f64,
    pub seed: u64,
    /// Side of the square dropout tiles, pixels.
    #[serde(default = "default_tile")]
    pub tile: usize,
}

fn default_tile() -> usize {
    16
}

impl PerturbSpec {
    pub fn new(dropout_rate: f64, dilation_noise: f64, seed: u64) -> Self {
        Self {
            dropout_rate,
            dilation_noise,
            seed,
            tile: default_tile(),
        }
    }
}

/// Degrade a mask: erase random vessel spans (tiles) and flip random
/// boundary pixels, growing or eroding the vessel edge.
pub fn perturb(mask: &Mask, spec: &PerturbSpec) -> Result<Mask> {
    if !(0.0..=1.0).contains(&spec.dropout_rate) || !(0.0..=1.0).contains(&spec.dilation_noise) {
        return Err(Error::invalid("perturbation rates must lie in [0, 1]"));
    }
    if spec.tile == 0 {
        return Err(Error::invalid("dropout tile must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = mask.dims();
    let mut out = mask.clone();

    if spec.dropout_rate > 0.0 {
        let (tx, ty) = (w.div_ceil(spec.tile), h.div_ceil(spec.tile));
        for by in 0..ty {
            for bx in 0..tx {
                let drop = rng.random_bool(spec.dropout_rate);
                if !drop {
                    continue;
                }
                for y in by * spec.tile..((by + 1) * spec.tile).min(h) {
                    for x in bx * spec.tile..((bx + 1) * spec.tile).min(w) {
                        out.set(x, y, false);
                    }
                }
            }
        }
    }

    if spec.dilation_noise > 0.0 {
        let snapshot = out.clone();
        for y in 0..h {
            for x in 0..w {
                let v = snapshot.get(x, y);
                let boundary = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    nx >= 0
                        && ny >= 0
                        && (nx as usize) < w
                        && (ny as usize) < h
                        && snapshot.get_signed(nx, ny) != v
                });
                if boundary && rng.random_bool(spec.dilation_noise) {
                    out.set(x, y, !v);
                }
            }
        }
    }
    Ok(out)
}
