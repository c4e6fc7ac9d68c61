use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Mask;

/// Gaps between consecutive events longer than this count as idle.
pub const IDLE_CUTOFF_MS: u64 = 30_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tool {
    Add,
    Erase,
}

/// One brush stroke.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditEvent {
    pub seq: u64,
    /// Client timestamp, milliseconds.
    pub t_ms: u64,
    pub tool: Tool,
    pub radius_px: u32,
    /// Polyline of `[x, y]` pixel coordinates.
    pub path: Vec<[i64; 2]>,
}

/// Pixels `(dx, dy)` covered by a brush of radius `r`: pixel centres within
/// `r - 1/2` of the stroke point, so radius 1 is a single pixel.
pub fn brush_offsets(r: u32) -> Vec<(i64, i64)> {
    let r = r as i64;
    let lim = (2 * r - 1) * (2 * r - 1);
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if 4 * (dx * dx + dy * dy) <= lim {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn div_round(n: i64, d: i64) -> i64 {
    (2 * n + d).div_euclid(2 * d)
}

/// Integer points of the segment `a -> b`, both ends included.
pub fn line_points(a: [i64; 2], b: [i64; 2]) -> Vec<[i64; 2]> {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let steps = dx.abs().max(dy.abs());
    if steps == 0 {
        return vec![a];
    }
    (0..=steps)
        .map(|k| {
            [
                a[0] + div_round(dx * k, steps),
                a[1] + div_round(dy * k, steps),
            ]
        })
        .collect()
}

/// Every stroke centre of a path, consecutive duplicates removed.
pub fn path_points(path: &[[i64; 2]]) -> Vec<[i64; 2]> {
    let mut out: Vec<[i64; 2]> = Vec::new();
    if path.len() == 1 {
        return path.to_vec();
    }
    for w in path.windows(2) {
        for p in line_points(w[0], w[1]) {
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
    }
    out
}

/// Checks a log against a canvas: sequence numbers strictly increasing (and
/// above `after_seq` when given), radius >= 1, non-empty in-bounds paths.
pub fn validate_events(
    events: &[EditEvent],
    dims: (usize, usize),
    after_seq: Option<u64>,
) -> Result<()> {
    let (w, h) = (dims.0 as i64, dims.1 as i64);
    let mut prev = after_seq;
    for (i, e) in events.iter().enumerate() {
        if prev.is_some_and(|p| e.seq <= p) {
            return Err(Error::InvalidEditLog(format!(
                "event {i}: seq {} is not increasing",
                e.seq
            )));
        }
        prev = Some(e.seq);
        if e.radius_px == 0 {
            return Err(Error::InvalidEditLog(format!(
                "event {i}: radius must be at least 1"
            )));
        }
        if e.path.is_empty() {
            return Err(Error::InvalidEditLog(format!("event {i}: empty path")));
        }
        if let Some(p) = e
            .path
            .iter()
            .find(|p| p[0] < 0 || p[1] < 0 || p[0] >= w || p[1] >= h)
        {
            return Err(Error::InvalidEditLog(format!(
                "event {i}: point ({}, {}) outside {}x{} canvas",
                p[0], p[1], w, h
            )));
        }
    }
    Ok(())
}

/// Stamps one event onto `mask`; brush pixels falling outside are ignored.
pub fn apply_event(mask: &mut Mask, e: &EditEvent) {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let on = e.tool == Tool::Add;
    let offsets = brush_offsets(e.radius_px);
    for c in path_points(&e.path) {
        for &(dx, dy) in &offsets {
            let (x, y) = (c[0] + dx, c[1] + dy);
            if x >= 0 && y >= 0 && x < w && y < h {
                mask.set(x as usize, y as usize, on);
            }
        }
    }
}

/// Replays a validated log onto a copy of `proposal`.
pub fn apply_events(proposal: &Mask, events: &[EditEvent]) -> Result<Mask> {
    validate_events(events, proposal.dims(), None)?;
    let mut out = proposal.clone();
    for e in events {
        apply_event(&mut out, e);
    }
    Ok(out)
}

/// Error unless replaying `events` over `proposal` yields exactly `final_mask`.
pub fn verify_replay(proposal: &Mask, events: &[EditEvent], final_mask: &Mask) -> Result<()> {
    if final_mask.dims() != proposal.dims() {
        return Err(Error::DimensionMismatch {
            expected: proposal.dims(),
            actual: final_mask.dims(),
        });
    }
    let replayed = apply_events(proposal, events)?;
    match replayed.hamming(final_mask)? {
        0 => Ok(()),
        diff => Err(Error::ReplayMismatch(diff)),
    }
}

/// Sum of inter-event gaps, each capped at `cutoff_ms`. Out-of-order
/// timestamps contribute nothing.
pub fn active_ms(events: &[EditEvent], cutoff_ms: u64) -> u64 {
    events
        .windows(2)
        .map(|w| w[1].t_ms.saturating_sub(w[0].t_ms).min(cutoff_ms))
        .sum()
}

/// A compact log turning `from` into `to`: one radius-1 stroke per horizontal
/// run of pixels that must be switched on or off. Timestamps start at
/// `t0_ms`; each stroke takes `per_event_ms` plus `per_pixel_ms` per pixel.
pub fn diff_events(
    from: &Mask,
    to: &Mask,
    first_seq: u64,
    t0_ms: u64,
    per_event_ms: u64,
    per_pixel_ms: u64,
) -> Result<Vec<EditEvent>> {
    if from.dims() != to.dims() {
        return Err(Error::DimensionMismatch {
            expected: from.dims(),
            actual: to.dims(),
        });
    }
    let (w, h) = from.dims();
    let mut out = Vec::new();
    let mut t = t0_ms;
    for y in 0..h {
        let mut x = 0;
        while x < w {
            let target = to.get(x, y);
            if from.get(x, y) == target {
                x += 1;
                continue;
            }
            let start = x;
            while x < w && from.get(x, y) != to.get(x, y) && to.get(x, y) == target {
                x += 1;
            }
            let len = (x - start) as u64;
            out.push(EditEvent {
                seq: first_seq + out.len() as u64,
                t_ms: t,
                tool: if target { Tool::Add } else { Tool::Erase },
                radius_px: 1,
                path: vec![[start as i64, y as i64], [(x - 1) as i64, y as i64]],
            });
            t += per_event_ms + per_pixel_ms * len;
        }
    }
    Ok(out)
}
