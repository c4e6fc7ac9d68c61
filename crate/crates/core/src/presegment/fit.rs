//! Exhaustive refit of the built-in proposer on corrected masks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::{check_filter_input, image_data, is_flat, single_scale};
use super::{Structureness, VesselnessParams};
use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, GrayImage, Mask};

/// Search space for [`fit_on_corrections`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitGrid {
    /// Candidate ridge widths; subsets of these are searched.
    pub scale_pool: Vec<f64>,
    pub min_subset: usize,
    pub max_subset: usize,
    /// Candidate thresholds, ascending.
    pub thresholds: Vec<f64>,
    pub beta: f64,
}

impl Default for FitGrid {
    fn default() -> Self {
        Self {
            scale_pool: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            min_subset: 1,
            max_subset: 4,
            thresholds: (1..20).map(|k| k as f64 / 20.0).collect(),
            beta: 0.5,
        }
    }
}

impl FitGrid {
    /// Non-empty scale subsets (as index lists into `scale_pool`), ordered by
    /// size and then lexicographically.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        let n = self.scale_pool.len();
        let mut out = Vec::new();
        for size in self.min_subset.max(1)..=self.max_subset.min(n) {
            let mut combo: Vec<usize> = (0..size).collect();
            loop {
                out.push(combo.clone());
                let Some(i) = (0..size).rev().find(|&i| combo[i] != i + n - size) else {
                    break;
                };
                combo[i] += 1;
                for j in i + 1..size {
                    combo[j] = combo[j - 1] + 1;
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let mut sorted = self.scale_pool.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted != self.scale_pool || sorted.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::invalid("scale pool must be strictly increasing"));
        }
        if self.thresholds.is_empty() || self.thresholds.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::invalid("thresholds must be non-empty and ascending"));
        }
        if self.subsets().is_empty() {
            return Err(Error::invalid("fit grid has no scale subsets"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub params: VesselnessParams,
    /// Mean Dice between refit proposals and the corrected masks.
    pub mean_dice: f64,
}

/// Dice with the empty/empty convention.
fn dice_from(intersection: u64, pred: u64, truth: u64) -> f64 {
    if pred + truth == 0 {
        1.0
    } else {
        2.0 * intersection as f64 / (pred + truth) as f64
    }
}

/// Per-threshold Dice for one image given its combined response.
fn dice_per_threshold(response: &[f32], truth: &Mask, thresholds: &[f64]) -> Vec<f64> {
    // bucket b holds pixels exceeding exactly the first b thresholds
    let k = thresholds.len();
    let mut all = vec![0u64; k + 1];
    let mut hit = vec![0u64; k + 1];
    for (&v, &t) in response.iter().zip(truth.bits()) {
        let b = thresholds.partition_point(|&th| th <= v as f64);
        all[b] += 1;
        hit[b] += t as u64;
    }
    let truth_total = truth.count_ones() as u64;
    let mut out = vec![0.0; k];
    let (mut pred, mut inter) = (0u64, 0u64);
    for t in (0..k).rev() {
        pred += all[t + 1];
        inter += hit[t + 1];
        out[t] = dice_from(inter, pred, truth_total);
    }
    out
}

/// Grid search over scale subsets x thresholds maximizing mean Dice between
/// proposals and corrected masks. Ties go to the lower threshold, then to
/// fewer scales, then to the lexicographically first subset.
pub fn fit_on_corrections(pairs: &[(GrayImage, Mask)], grid: &FitGrid) -> Result<FitOutcome> {
    if pairs.is_empty() {
        return Err(Error::invalid("cannot fit on an empty training set"));
    }
    grid.validate()?;
    for (img, mask) in pairs {
        ensure_same_dims(img.dims(), mask.dims())?;
        check_filter_input(img)?;
    }

    // responses[image][pool scale]
    let responses: Vec<Vec<Vec<f32>>> = pairs
        .par_iter()
        .map(|(img, _)| {
            let (w, h) = img.dims();
            if is_flat(img) {
                return vec![vec![0.0f32; w * h]; grid.scale_pool.len()];
            }
            let data = image_data(img);
            grid.scale_pool
                .iter()
                .map(|&s| {
                    single_scale(&data, w, h, s, grid.beta, Structureness::HalfMaxNorm)
                        .into_iter()
                        .map(|v| v.clamp(0.0, 1.0) as f32)
                        .collect()
                })
                .collect()
        })
        .collect();

    let subsets = grid.subsets();
    let scored: Vec<Vec<f64>> = subsets
        .par_iter()
        .map(|subset| {
            let mut totals = vec![0.0; grid.thresholds.len()];
            for (per_scale, (_, truth)) in responses.iter().zip(pairs) {
                let mut combined = per_scale[subset[0]].clone();
                for &s in &subset[1..] {
                    for (c, &v) in combined.iter_mut().zip(&per_scale[s]) {
                        *c = c.max(v);
                    }
                }
                for (acc, d) in
                    totals
                        .iter_mut()
                        .zip(dice_per_threshold(&combined, truth, &grid.thresholds))
                {
                    *acc += d;
                }
            }
            totals.iter().map(|t| t / pairs.len() as f64).collect()
        })
        .collect();

    // Visit thresholds ascending, subsets in (size, lexicographic) order, and
    // only replace on strict improvement: this realizes the tie-break order.
    let mut best: Option<(usize, usize, f64)> = None;
    for (ti, _) in grid.thresholds.iter().enumerate() {
        for (si, scores) in scored.iter().enumerate() {
            let d = scores[ti];
            if best.is_none_or(|(_, _, bd)| d > bd) {
                best = Some((ti, si, d));
            }
        }
    }
    let (ti, si, mean_dice) = best.expect("grid is non-empty");
    let params = VesselnessParams {
        scales: subsets[si].iter().map(|&i| grid.scale_pool[i]).collect(),
        beta: grid.beta,
        structureness: Structureness::HalfMaxNorm,
        threshold: grid.thresholds[ti],
    };
    Ok(FitOutcome { params, mean_dice })
}
