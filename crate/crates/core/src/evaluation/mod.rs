//! Pixel-level agreement between predicted and reference vessel maps, with
//! percentile-bootstrap confidence intervals over images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, Mask, ProbabilityGrid};

pub const REPORT_SCHEMA: &str = "eval/1";
pub const CI_METHOD: &str = "percentile-bootstrap-over-images";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio((self.tp + self.tn) as f64, self.total() as f64)
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn as f64, (self.tn + self.fp) as f64)
    }

    /// `2 tp / (2 tp + fp + fn)`; 1.0 when both masks are empty.
    pub fn dice(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / den as f64
        }
    }

    /// Identical to [`Self::dice`] on binary masks.
    pub fn f1(&self) -> f64 {
        self.dice()
    }

    fn scaled_add(&mut self, other: &ConfusionCounts, k: u64) {
        self.tp += k * other.tp;
        self.fp += k * other.fp;
        self.fn_ += k * other.fn_;
        self.tn += k * other.tn;
    }
}

pub fn confusion(pred: &Mask, truth: &Mask) -> Result<ConfusionCounts> {
    ensure_same_dims(truth.dims(), pred.dims())?;
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

/// `2|A n B| / (|A| + |B|)`, with two empty masks scoring 1.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(confusion(a, b)?.dice())
}

/// Weighted rank statistic over (score, positive) samples already sorted by
/// ascending score. Ties count one half.
fn sorted_auc(samples: &[(f32, bool, usize)], weight: impl Fn(usize) -> f64) -> Option<f64> {
    let (mut num, mut neg_below, mut pos_total) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < samples.len() {
        let score = samples[i].0;
        let (mut p, mut n) = (0.0, 0.0);
        while i < samples.len() && samples[i].0 == score {
            let w = weight(samples[i].2);
            if samples[i].1 {
                p += w;
            } else {
                n += w;
            }
            i += 1;
        }
        num += p * (neg_below + 0.5 * n);
        neg_below += n;
        pos_total += p;
    }
    (pos_total > 0.0 && neg_below > 0.0).then(|| num / (pos_total * neg_below))
}

/// Probability that a random vessel pixel outscores a random background
/// pixel (ties count one half).
pub fn auc(grid: &ProbabilityGrid, truth: &Mask) -> Result<f64> {
    ensure_same_dims(truth.dims(), grid.dims())?;
    let mut samples: Vec<(f32, bool, usize)> = grid
        .values()
        .iter()
        .zip(truth.bits())
        .map(|(&s, &t)| (s, t == 1, 0))
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted_auc(&samples, |_| 1.0).ok_or(Error::SingleClass)
}

#[derive(Debug, Clone, Copy)]
pub struct EvalInput<'a> {
    pub pred: &'a Mask,
    pub truth: &'a Mask,
    pub grid: Option<&'a ProbabilityGrid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub value: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub dice: MetricEstimate,
    #[serde(rename = "f1_score")]
    pub f1: MetricEstimate,
    pub auc: MetricEstimate,
    pub accuracy: MetricEstimate,
    pub sensitivity: MetricEstimate,
    pub specificity: MetricEstimate,
    pub confusion: ConfusionCounts,
    pub n_images: usize,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub ci_method: String,
    pub ci_level: f64,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Replicate {
    counts: ConfusionCounts,
    auc: Option<f64>,
}

fn estimate(point: Option<f64>, mut draws: Vec<f64>) -> MetricEstimate {
    let Some(v) = point else {
        return MetricEstimate {
            value: None,
            ci_lo: None,
            ci_hi: None,
        };
    };
    if draws.is_empty() {
        return MetricEstimate {
            value: Some(v),
            ci_lo: None,
            ci_hi: None,
        };
    }
    draws.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&draws, 0.025).min(v);
    let hi = quantile_sorted(&draws, 0.975).max(v);
    MetricEstimate {
        value: Some(v),
        ci_lo: Some(lo),
        ci_hi: Some(hi),
    }
}

/// Pooled-pixel point estimates and 95% percentile-bootstrap intervals,
/// resampling whole images. AUC is reported only when every input carries a
/// probability grid. Resample indices are drawn up front so the result does
/// not depend on thread scheduling.
pub fn bootstrap_report(inputs: &[EvalInput], n_boot: usize, seed: u64) -> Result<EvalReport> {
    if inputs.len() < 2 {
        return Err(Error::invalid("bootstrap needs at least two images"));
    }
    let per_image: Vec<ConfusionCounts> = inputs
        .iter()
        .map(|i| confusion(i.pred, i.truth))
        .collect::<Result<_>>()?;
    let with_auc = inputs.iter().all(|i| i.grid.is_some());
    let mut samples: Vec<(f32, bool, usize)> = Vec::new();
    if with_auc {
        for (k, i) in inputs.iter().enumerate() {
            let grid = i.grid.expect("checked");
            ensure_same_dims(i.truth.dims(), grid.dims())?;
            samples.extend(
                grid.values()
                    .iter()
                    .zip(i.truth.bits())
                    .map(|(&s, &t)| (s, t == 1, k)),
            );
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let n = inputs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let multiplicities: Vec<Vec<u64>> = (0..n_boot)
        .map(|_| {
            let mut m = vec![0u64; n];
            for _ in 0..n {
                m[rng.random_range(0..n)] += 1;
            }
            m
        })
        .collect();

    let replicate = |m: &[u64]| -> Replicate {
        let mut counts = ConfusionCounts::default();
        for (c, &k) in per_image.iter().zip(m) {
            counts.scaled_add(c, k);
        }
        let auc = if with_auc {
            sorted_auc(&samples, |img| m[img] as f64)
        } else {
            None
        };
        Replicate { counts, auc }
    };

    let ones = vec![1u64; n];
    let point = replicate(&ones);
    let reps: Vec<Replicate> = multiplicities.par_iter().map(|m| replicate(m)).collect();

    let collect =
        |f: &dyn Fn(&Replicate) -> Option<f64>| -> Vec<f64> { reps.iter().filter_map(f).collect() };
    Ok(EvalReport {
        schema: REPORT_SCHEMA.to_string(),
        dice: estimate(
            Some(point.counts.dice()),
            collect(&|r| Some(r.counts.dice())),
        ),
        f1: estimate(Some(point.counts.f1()), collect(&|r| Some(r.counts.f1()))),
        auc: estimate(point.auc, collect(&|r| r.auc)),
        accuracy: estimate(point.counts.accuracy(), collect(&|r| r.counts.accuracy())),
        sensitivity: estimate(
            point.counts.sensitivity(),
            collect(&|r| r.counts.sensitivity()),
        ),
        specificity: estimate(
            point.counts.specificity(),
            collect(&|r| r.counts.specificity()),
        ),
        confusion: point.counts,
        n_images: n,
        n_bootstrap: n_boot,
        seed,
        ci_method: CI_METHOD.to_string(),
        ci_level: 0.95,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f32], labels: &[bool]) -> f64 {
        let (mut num, mut pairs) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            if !labels[i] {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] {
                    continue;
                }
                pairs += 1.0;
                num += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
        num / pairs
    }

    #[test]
    fn arithmetic_examples() {
        let c = ConfusionCounts {
            tp: 2,
            fp: 2,
            fn_: 2,
            tn: 10,
        };
        assert_eq!(c.sensitivity(), Some(0.5));
        assert!((c.specificity().unwrap() - 10.0 / 12.0).abs() < 1e-12);
        assert_eq!(c.accuracy(), Some(0.75));
        assert_eq!(c.f1(), 0.5);
    }

    #[test]
    fn identical_masks() {
        let m = Mask::from_fn(10, 10, |x, y| y == 0 && x < 10);
        let c = confusion(&m, &m).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 10,
                fp: 0,
                fn_: 0,
                tn: 90
            }
        );
    }

    #[test]
    fn dice_conventions() {
        let e = Mask::new(4, 4);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        let a = Mask::from_fn(4, 4, |x, _| x == 0);
        let b = Mask::from_fn(4, 4, |x, _| x == 3);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        let a = Mask::from_fn(4, 4, |x, y| y == 0 && x < 4);
        let b = Mask::from_fn(4, 4, |x, y| (y == 0 && x < 2) || (y == 1 && x < 2));
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert!(dice(&a, &Mask::new(3, 3)).is_err());
    }

    #[test]
    fn auc_examples() {
        let g = ProbabilityGrid::new(4, 1, vec![0.9, 0.8, 0.4, 0.1]).unwrap();
        let t = Mask::from_bits(4, 1, vec![1, 1, 0, 0]).unwrap();
        assert_eq!(auc(&g, &t).unwrap(), 1.0);
        let t = Mask::from_bits(4, 1, vec![1, 0, 1, 0]).unwrap();
        assert_eq!(auc(&g, &t).unwrap(), 0.75);
        let t = Mask::from_bits(4, 1, vec![1, 1, 1, 1]).unwrap();
        assert!(matches!(auc(&g, &t), Err(Error::SingleClass)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn auc_matches_pairwise(scores in prop::collection::vec(0u8..20, 2..300), seed in any::<u64>()) {
            let n = scores.len();
            let mut s = seed | 1;
            let labels: Vec<bool> = (0..n).map(|_| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; s % 3 == 0 }).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let vals: Vec<f32> = scores.iter().map(|&v| v as f32 / 20.0).collect();
            let g = ProbabilityGrid::new(n, 1, vals.clone()).unwrap();
            let t = Mask::from_bits(n, 1, labels.iter().map(|&l| l as u8).collect()).unwrap();
            let fast = auc(&g, &t).unwrap();
            prop_assert!((fast - brute_auc(&vals, &labels)).abs() < 1e-9);
            // complement symmetry
            let flipped = Mask::from_bits(n, 1, labels.iter().map(|&l| (!l) as u8).collect()).unwrap();
            prop_assert!((auc(&g.complement(), &flipped).unwrap() - fast).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_pairs_report_ones() {
        let m = Mask::from_fn(8, 8, |x, y| (x + y) % 3 == 0);
        let g = ProbabilityGrid::new(8, 8, m.bits().iter().map(|&b| b as f32).collect()).unwrap();
        let inputs = vec![
            EvalInput {
                pred: &m,
                truth: &m,
                grid: Some(&g)
            };
            3
        ];
        let r = bootstrap_report(&inputs, 200, 1).unwrap();
        for e in [
            r.dice,
            r.f1,
            r.auc,
            r.accuracy,
            r.sensitivity,
            r.specificity,
        ] {
            assert_eq!(e.value, Some(1.0));
            assert_eq!((e.ci_lo, e.ci_hi), (Some(1.0), Some(1.0)));
        }
    }

    #[test]
    fn deterministic_report() {
        let a = Mask::from_fn(16, 16, |x, y| (x * y) % 5 == 0);
        let b = Mask::from_fn(16, 16, |x, y| (x + 2 * y) % 4 == 0);
        let c = Mask::from_fn(16, 16, |x, _| x % 2 == 0);
        let inputs = [
            EvalInput {
                pred: &a,
                truth: &b,
                grid: None,
            },
            EvalInput {
                pred: &b,
                truth: &c,
                grid: None,
            },
            EvalInput {
                pred: &c,
                truth: &a,
                grid: None,
            },
        ];
        let r1 = bootstrap_report(&inputs, 300, 42).unwrap();
        let r2 = bootstrap_report(&inputs, 300, 42).unwrap();
        assert_eq!(r1.to_json().unwrap(), r2.to_json().unwrap());
        assert_eq!(r1.auc.value, None);
    }

    #[test]
    fn two_image_bounds_match_resample_enumeration() {
        let t1 = Mask::from_fn(10, 10, |x, _| x < 5);
        let p1 = Mask::from_fn(10, 10, |x, _| x < 4);
        let t2 = Mask::from_fn(10, 10, |_, y| y < 3);
        let p2 = Mask::from_fn(10, 10, |x, y| y < 3 && x < 3 || y == 9);
        let c1 = confusion(&p1, &t1).unwrap();
        let c2 = confusion(&p2, &t2).unwrap();
        let pooled = |k1: u64, k2: u64| {
            let mut c = ConfusionCounts::default();
            c.scaled_add(&c1, k1);
            c.scaled_add(&c2, k2);
            c.dice()
        };
        // multisets {1,1}, {1,2}, {2,2}; {1,2} appears twice among ordered draws
        let patterns = [pooled(2, 0), pooled(1, 1), pooled(0, 2)];
        let lo = patterns.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = patterns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let inputs = [
            EvalInput {
                pred: &p1,
                truth: &t1,
                grid: None,
            },
            EvalInput {
                pred: &p2,
                truth: &t2,
                grid: None,
            },
        ];
        let r = bootstrap_report(&inputs, 1000, 5).unwrap();
        assert_eq!(r.dice.ci_lo, Some(lo));
        assert_eq!(r.dice.ci_hi, Some(hi));
        assert_eq!(r.dice.value, Some(pooled(1, 1)));
    }

    #[test]
    fn single_image_rejected() {
        let m = Mask::new(2, 2);
        assert!(bootstrap_report(
            &[EvalInput {
                pred: &m,
                truth: &m,
                grid: None
            }],
            10,
            0
        )
        .is_err());
    }

    #[test]
    fn report_json_vocabulary() {
        let a = Mask::from_fn(8, 8, |x, _| x < 3);
        let g =
            ProbabilityGrid::new(8, 8, (0..64).map(|i| (i % 8) as f32 / 8.0).collect()).unwrap();
        let inputs = [EvalInput {
            pred: &a,
            truth: &a,
            grid: Some(&g),
        }; 2];
        let json: serde_json::Value =
            serde_json::from_str(&bootstrap_report(&inputs, 50, 0).unwrap().to_json().unwrap())
                .unwrap();
        for key in [
            "f1_score",
            "auc",
            "accuracy",
            "sensitivity",
            "specificity",
            "dice",
        ] {
            for sub in ["value", "ci_lo", "ci_hi"] {
                assert!(json[key][sub].is_number(), "{key}.{sub}");
            }
        }
        assert_eq!(json["ci_method"], CI_METHOD);
    }
}
