//! Topology-preserving thinning and the exact Euclidean distance transform.

use crate::raster::Mask;

/// Offsets of the 8 neighbours in clockwise order starting north:
/// N, NE, E, SE, S, SW, W, NW. Even indices are the 4-neighbours.
pub(crate) const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// 1-px medial axis of a mask together with its distance map.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub bits: Mask,
    /// Euclidean distance from each pixel centre to the nearest background
    /// pixel centre; pixels outside the frame count as background.
    pub dt: Vec<f64>,
}

impl Skeleton {
    pub fn width(&self) -> usize {
        self.bits.width()
    }

    pub fn height(&self) -> usize {
        self.bits.height()
    }

    #[inline]
    pub fn dt_at(&self, x: usize, y: usize) -> f64 {
        self.dt[y * self.bits.width() + x]
    }

    pub fn pixel_count(&self) -> usize {
        self.bits.count_ones()
    }
}

#[inline]
fn ring_values(m: &Mask, x: usize, y: usize) -> [bool; 8] {
    let mut out = [false; 8];
    for (k, (dx, dy)) in RING.iter().enumerate() {
        out[k] = m.get_signed(x as isize + dx, y as isize + dy);
    }
    out
}

/// Yokoi connectivity number for 8-connected foreground. A pixel is simple
/// (removable without changing topology) iff this equals 1.
#[inline]
fn connectivity8(n: &[bool; 8]) -> u32 {
    let nb = |k: usize| !n[k % 8] as u32;
    (0..8)
        .step_by(2)
        .map(|k| nb(k) - nb(k) * nb(k + 1) * nb(k + 2))
        .sum()
}

#[inline]
fn removable(m: &Mask, x: usize, y: usize) -> bool {
    let n = ring_values(m, x, y);
    let b = n.iter().filter(|&&v| v).count();
    b >= 2 && connectivity8(&n) == 1
}

/// Two-subcycle parallel thinning. Candidates are selected per subcycle from
/// a snapshot with the directional rules (at least three foreground neighbours,
/// which keeps two-pixel diagonal bands from eroding away); each is re-checked for
/// simplicity against the live image before removal, so components are never
/// split or merged. A final pass removes staircase corners that would
/// otherwise appear as spurious branch points.
pub fn thin(mask: &Mask) -> Mask {
    let mut m = mask.clone();
    let (w, h) = m.dims();
    loop {
        let mut changed = false;
        for sub in 0..2 {
            let mut candidates = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    if !m.get(x, y) {
                        continue;
                    }
                    let n = ring_values(&m, x, y);
                    let b = n.iter().filter(|&&v| v).count();
                    if !(3..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&k| !n[k] && n[(k + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
                    let keep = if sub == 0 {
                        (p2 && p4 && p6) || (p4 && p6 && p8)
                    } else {
                        (p2 && p4 && p8) || (p2 && p6 && p8)
                    };
                    if !keep {
                        candidates.push((x, y));
                    }
                }
            }
            for (x, y) in candidates {
                if removable(&m, x, y) {
                    m.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Staircase corners: a pixel with two perpendicular 4-neighbours whose
    // removal keeps everything connected.
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                if !m.get(x, y) {
                    continue;
                }
                let n = ring_values(&m, x, y);
                let corner = (0..8)
                    .step_by(2)
                    .any(|k| n[k] && n[(k + 2) % 8] && !n[(k + 4) % 8] && !n[(k + 6) % 8]);
                if corner && removable(&m, x, y) {
                    m.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    m
}

/// Squared 1-D distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q].is_infinite() && f[v[k]].is_infinite() {
            continue;
        }
        loop {
            let p = v[k];
            let s =
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if f[v[0]].is_infinite() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance to the nearest background pixel, with the frame
/// surrounded by background. Background pixels get 0.
pub fn distance_transform(mask: &Mask) -> Vec<f64> {
    let (w, h) = mask.dims();
    let (pw, ph) = (w + 2, h + 2);
    let mut grid = vec![0.0f64; pw * ph];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                grid[(y + 1) * pw + x + 1] = f64::INFINITY;
            }
        }
    }
    let n = pw.max(ph);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0f64; n + 1]);
    let mut col = vec![0.0; ph];
    let mut tmp = vec![0.0; ph];
    for x in 0..pw {
        for y in 0..ph {
            col[y] = grid[y * pw + x];
        }
        edt_1d(&col, &mut tmp, &mut v, &mut z);
        for y in 0..ph {
            grid[y * pw + x] = tmp[y];
        }
    }
    let mut row_out = vec![0.0; pw];
    for y in 0..ph {
        let row = &grid[y * pw..(y + 1) * pw];
        edt_1d(row, &mut row_out, &mut v, &mut z);
        grid[y * pw..(y + 1) * pw].copy_from_slice(&row_out);
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(grid[(y + 1) * pw + x + 1].sqrt());
        }
    }
    out
}

/// Thin the mask to a 1-px skeleton and attach its distance map.
pub fn skeletonize(mask: &Mask) -> Skeleton {
    Skeleton {
        bits: thin(mask),
        dt: distance_transform(mask),
    }
}

/// Number of 8-connected foreground components.
pub fn count_components(mask: &Mask) -> usize {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || mask.bits()[start] == 0 {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in RING {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_dt(mask: &Mask) -> Vec<f64> {
        let (w, h) = mask.dims();
        let mut bg = Vec::new();
        for y in -1..=h as isize {
            for x in -1..=w as isize {
                if !mask.get_signed(x, y) {
                    bg.push((x, y));
                }
            }
        }
        let mut out = Vec::new();
        for y in 0..h as isize {
            for x in 0..w as isize {
                if !mask.get_signed(x, y) {
                    out.push(0.0);
                    continue;
                }
                let best = bg
                    .iter()
                    .map(|&(bx, by)| ((bx - x).pow(2) + (by - y).pow(2)) as f64)
                    .fold(f64::INFINITY, f64::min);
                out.push(best.sqrt());
            }
        }
        out
    }

    #[test]
    fn horizontal_bar_thins_to_centerline() {
        let mask = Mask::from_fn(60, 15, |x, y| (5..55).contains(&x) && (4..11).contains(&y));
        let sk = skeletonize(&mask);
        let pts: Vec<_> = sk.bits.ones().collect();
        let len =
            pts.iter().map(|p| p.0).max().unwrap() - pts.iter().map(|p| p.0).min().unwrap() + 1;
        assert!((48..=52).contains(&len), "skeleton span {len}");
        assert_eq!(count_components(&sk.bits), 1);
        let centre: Vec<_> = pts.iter().filter(|p| p.1 == 7).collect();
        assert!(centre.len() >= 40);
        assert!((sk.dt_at(30, 7) - 3.5).abs() <= 0.5);
    }

    #[test]
    fn empty_and_single_pixel() {
        assert!(skeletonize(&Mask::new(8, 8)).bits.is_empty());
        let mut m = Mask::new(8, 8);
        m.set(3, 4, true);
        let sk = skeletonize(&m);
        assert_eq!(sk.bits, m);
        assert_eq!(sk.dt_at(3, 4), 1.0);
    }

    #[test]
    fn square_block_keeps_one_component() {
        let m = Mask::from_fn(10, 10, |x, y| (3..5).contains(&x) && (3..5).contains(&y));
        let sk = thin(&m);
        assert!(!sk.is_empty());
        assert_eq!(count_components(&sk), 1);
    }

    #[test]
    fn ring_keeps_its_hole() {
        let m = Mask::from_fn(30, 30, |x, y| {
            let d = ((x as f64 - 15.0).powi(2) + (y as f64 - 15.0).powi(2)).sqrt();
            (6.0..10.0).contains(&d)
        });
        let sk = thin(&m);
        // Background components (4-connected) are preserved: the hole stays.
        let inv = Mask::from_fn(30, 30, |x, y| !sk.get(x, y));
        let holes = count4(&inv);
        assert_eq!(holes, 2);
    }

    fn count4(m: &Mask) -> usize {
        let (w, h) = m.dims();
        let mut seen = vec![false; w * h];
        let mut n = 0;
        for s in 0..w * h {
            if seen[s] || m.bits()[s] == 0 {
                continue;
            }
            n += 1;
            let mut st = vec![s];
            seen[s] = true;
            while let Some(i) = st.pop() {
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    if m.get_signed(x + dx, y + dy) {
                        let j = (y + dy) as usize * w + (x + dx) as usize;
                        if !seen[j] {
                            seen[j] = true;
                            st.push(j);
                        }
                    }
                }
            }
        }
        n
    }

    #[test]
    fn full_frame_distance_counts_border_as_background() {
        let m = Mask::filled(5, 5);
        let dt = distance_transform(&m);
        assert_eq!(dt[2 * 5 + 2], 3.0);
        assert_eq!(dt[0], 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn dt_matches_brute_force(w in 1usize..40, h in 1usize..40, density in 0.2f64..0.95, seed in any::<u64>()) {
            let mut s = seed | 1;
            let m = Mask::from_fn(w, h, |_, _| {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                (s % 1000) as f64 / 1000.0 < density
            });
            prop_assert_eq!(distance_transform(&m), brute_dt(&m));
        }

        #[test]
        fn thinning_is_subset_and_preserves_components(w in 3usize..48, h in 3usize..48, seed in any::<u64>()) {
            let mut s = seed | 1;
            let raw = Mask::from_fn(w, h, |_, _| {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                s % 5 < 3
            });
            let sk = thin(&raw);
            prop_assert!(sk.is_subset_of(&raw));
            prop_assert_eq!(count_components(&sk), count_components(&raw));
        }
    }

    #[test]
    fn dt_exact_on_64x64() {
        let m = Mask::from_fn(64, 64, |x, y| {
            ((x / 7) + (y / 5)) % 3 != 0 || (x * y) % 11 == 1
        });
        assert_eq!(distance_transform(&m), brute_dt(&m));
    }
}
