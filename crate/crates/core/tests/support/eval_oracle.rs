//! Segmentation metrics against brute-force pixel tallies.

use chorovessel_core::evaluation::{auc, bootstrap_report, confusion, EvalInput};
use chorovessel_core::raster::{Mask, ProbabilityGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::super::Outcome;

fn pairwise_auc(scores: &[f32], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f32> = scores
        .iter()
        .zip(labels)
        .filter(|p| *p.1)
        .map(|p| *p.0)
        .collect();
    let neg: Vec<f32> = scores
        .iter()
        .zip(labels)
        .filter(|p| !*p.1)
        .map(|p| *p.0)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0f64;
    for &p in &pos {
        for &n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() as f64 * neg.len() as f64))
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn run() -> Outcome {
    let mut worst_auc = 0.0f64;
    let mut auc_cases = 0;
    for case in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let (pt, pp) = match case {
            0 => (0.0, 0.0),
            1 => (1.0, 1.0),
            2 => (0.0, 0.4),
            _ => (rng.random_range(0.0..0.6), rng.random_range(0.0..0.6)),
        };
        let truth = Mask::from_fn(64, 64, |_, _| rng.random_bool(pt));
        let pred = Mask::from_fn(64, 64, |_, _| rng.random_bool(pp));
        // coarse levels force many ties
        let levels = [2u32, 5, 17, 1000][case as usize % 4];
        let scores: Vec<f32> = truth
            .bits()
            .iter()
            .map(|&t| {
                let base: f64 = rng.random_range(0.0..1.0) * 0.7 + if t == 1 { 0.3 } else { 0.0 };
                ((base * levels as f64).floor() / levels as f64) as f32
            })
            .collect();
        let grid = ProbabilityGrid::new(64, 64, scores.clone()).map_err(|e| e.to_string())?;

        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for y in 0..64 {
            for x in 0..64 {
                match (pred.get(x, y), truth.get(x, y)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => tn += 1,
                }
            }
        }
        let c = confusion(&pred, &truth).map_err(|e| e.to_string())?;
        if (c.tp, c.fp, c.fn_, c.tn) != (tp, fp, fn_, tn) {
            return Err(format!(
                "case {case}: confusion {c:?} vs ({tp},{fp},{fn_},{tn})"
            ));
        }
        let dice = if tp + fp + fn_ == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        let checks = [
            ("dice", Some(c.dice()), Some(dice)),
            ("f1", Some(c.f1()), Some(dice)),
            ("accuracy", c.accuracy(), ratio(tp + tn, tp + fp + fn_ + tn)),
            ("sensitivity", c.sensitivity(), ratio(tp, tp + fn_)),
            ("specificity", c.specificity(), ratio(tn, tn + fp)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(format!("case {case}: {name} {got:?} vs {want:?}"));
            }
        }
        let labels: Vec<bool> = truth.bits().iter().map(|&b| b == 1).collect();
        match (auc(&grid, &truth), pairwise_auc(&scores, &labels)) {
            (Ok(a), Some(b)) => {
                worst_auc = worst_auc.max((a - b).abs());
                auc_cases += 1;
            }
            (Err(_), None) => {}
            (a, b) => return Err(format!("case {case}: auc {a:?} vs pairwise {b:?}")),
        }
    }
    if worst_auc > 1e-9 {
        return Err(format!(
            "AUC deviates from pairwise concordance by {worst_auc:e}"
        ));
    }

    // report vocabulary
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let masks: Vec<(Mask, Mask, ProbabilityGrid)> = (0..3)
        .map(|_| {
            let t = Mask::from_fn(32, 32, |_, _| rng.random_bool(0.3));
            let p = Mask::from_fn(32, 32, |_, _| rng.random_bool(0.3));
            let g = ProbabilityGrid::new(32, 32, (0..1024).map(|_| rng.random::<f32>()).collect())
                .unwrap();
            (p, t, g)
        })
        .collect();
    let inputs: Vec<EvalInput> = masks
        .iter()
        .map(|(p, t, g)| EvalInput {
            pred: p,
            truth: t,
            grid: Some(g),
        })
        .collect();
    let report = bootstrap_report(&inputs, 50, 1).map_err(|e| e.to_string())?;
    let v: serde_json::Value =
        serde_json::from_str(&report.to_json().map_err(|e| e.to_string())?).unwrap();
    for key in ["f1_score", "auc", "accuracy", "sensitivity", "specificity"] {
        let field = &v[key];
        if !["value", "ci_lo", "ci_hi"]
            .iter()
            .all(|k| field.get(*k).is_some_and(|x| x.is_number()))
        {
            return Err(format!("report field {key} missing or incomplete: {field}"));
        }
    }
    Ok(format!(
        "100 cases exact; AUC max deviation {worst_auc:.1e} over {auc_cases} two-class cases; report fields f1_score/auc/accuracy/sensitivity/specificity present"
    ))
}
