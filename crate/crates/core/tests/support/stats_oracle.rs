//! Statistics criteria: brute-force and simulation oracles.

use chorovessel_core::evaluation::quantile_sorted;
use chorovessel_core::stats::{
    adjusted_fences, fdr_adjust, logistic_fit, medcouple, run_association, write_results_csv,
    AnalysisRow, AnalysisTable, AssociationConfig, LogisticOptions,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use super::super::Outcome;

const TRUE_BETA: [f64; 4] = [-1.0, 0.7, 0.01, 0.3];

/// Kernel median by literal enumeration of every index pair.
pub fn brute_medcouple(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let m = if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    };
    let ties: Vec<usize> = (0..n).filter(|&i| x[i] == m).collect();
    let k = ties.len() as i64;
    let tie_rank = |i: usize| ties.iter().position(|&t| t == i).unwrap() as i64 + 1;
    let mut h = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (xi, xj) = (x[i], x[j]);
            if !(xi <= m && m <= xj) {
                continue;
            }
            if xi == m && xj == m {
                let s = tie_rank(i) + tie_rank(j) - 1;
                h.push(if s < k {
                    -1.0
                } else if s == k {
                    0.0
                } else {
                    1.0
                });
            } else {
                h.push(((xj - m) - (m - xi)) / (xj - xi));
            }
        }
    }
    h.sort_by(f64::total_cmp);
    let c = h.len();
    if c % 2 == 1 {
        h[c / 2]
    } else {
        0.5 * (h[c / 2 - 1] + h[c / 2])
    }
}

fn check_medcouple() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..300 {
        let n = rng.random_range(3..=200);
        let ties = case % 3 == 0;
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = rng.sample::<f64, _>(StandardNormal).exp();
                if ties {
                    (v * 4.0).round() / 4.0
                } else {
                    v
                }
            })
            .collect();
        let fast = medcouple(&x).map_err(|e| e.to_string())?;
        let slow = brute_medcouple(&x);
        if fast != slow {
            return Err(format!(
                "medcouple case {case} (n={n}): {fast} vs brute {slow}"
            ));
        }
    }
    Ok("medcouple exact on 300 vectors".into())
}

fn check_fences() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let half: Vec<f64> = (0..rng.random_range(2..50))
            .map(|_| rng.random_range(0.1..10.0))
            .collect();
        let mut x: Vec<f64> = half.iter().flat_map(|&v| [v, -v]).collect();
        if case % 2 == 0 {
            x.push(0.0);
        }
        let f = adjusted_fences(&x, 3.0).map_err(|e| e.to_string())?;
        let mut s = x.clone();
        s.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.75));
        let iqr = q3 - q1;
        if f.medcouple != 0.0 || f.lower != q1 - 3.0 * iqr || f.upper != q3 + 3.0 * iqr {
            return Err(format!(
                "fences case {case}: mc {} [{}, {}]",
                f.medcouple, f.lower, f.upper
            ));
        }
    }
    Ok("MC=0 fences equal 3-IQR rule on 100 symmetric samples".into())
}

fn check_bh() -> Result<String, String> {
    let q = fdr_adjust(&[0.01, 0.02, 0.03, 0.04, 0.05]).map_err(|e| e.to_string())?;
    if q.iter().any(|v| (v - 0.05).abs() > 1e-15) {
        return Err(format!("BH example: {q:?}"));
    }
    Ok("BH example all 0.05".into())
}

struct Sim {
    y: Vec<f64>,
    x: DMatrix<f64>,
}

fn simulate(n: usize, seed: u64) -> Sim {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n);
    let mut cols = Vec::with_capacity(n * 4);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let age = rng.random_range(20.0..80.0);
        let sex = rng.random_range(0..2) as f64;
        let eta = TRUE_BETA[0] + TRUE_BETA[1] * z + TRUE_BETA[2] * age + TRUE_BETA[3] * sex;
        let p = 1.0 / (1.0 + (-eta).exp());
        y.push(if rng.random_bool(p) { 1.0 } else { 0.0 });
        cols.extend([1.0, z, age, sex]);
    }
    Sim {
        y,
        x: DMatrix::from_row_slice(n, 4, &cols),
    }
}

fn check_recovery() -> Result<String, String> {
    let fits: Vec<Vec<f64>> = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let sim = simulate(2000, s);
            logistic_fit(&sim.y, &sim.x, &LogisticOptions::default()).map(|f| f.coefficients)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let bias: Vec<f64> = (0..4)
        .map(|k| fits.iter().map(|b| b[k]).sum::<f64>() / fits.len() as f64 - TRUE_BETA[k])
        .collect();
    let worst = bias.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let detail = format!(
        "logistic mean bias {:?} (max {worst:.4})",
        bias.iter().map(|b| format!("{b:+.4}")).collect::<Vec<_>>()
    );
    if worst < 0.03 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn check_coverage() -> Result<String, String> {
    let covered: Vec<bool> = (0..200u64)
        .into_par_iter()
        .map(|s| {
            let sim = simulate(400, 5000 + s);
            let f = logistic_fit(&sim.y, &sim.x, &LogisticOptions::default()).expect("fit");
            let (_, lo, hi) =
                chorovessel_core::stats::odds_ratio(f.coefficients[1], f.std_errors[1]);
            let truth = TRUE_BETA[1].exp();
            lo <= truth && truth <= hi
        })
        .collect();
    let rate = covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64;
    let detail = format!("CI coverage {:.1}%", 100.0 * rate);
    if (0.90..=0.99).contains(&rate) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Monte-Carlo allowance on a rate estimated from `n` draws.
fn mc_tolerance(q: f64, n: usize) -> f64 {
    1.96 * (q * (1.0 - q) / n as f64).sqrt()
}

fn check_null_fdr() -> Result<String, String> {
    let q = 0.05;
    // 1000 uniform p-values per simulation: every rejection is false
    let sims = 500;
    let fdp: Vec<f64> = (0..sims as u64)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + s);
            let p: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
            let any = fdr_adjust(&p).unwrap().iter().any(|&v| v < q);
            if any {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mean_fdp = fdp.iter().sum::<f64>() / sims as f64;
    if mean_fdp > q + mc_tolerance(q, sims) {
        return Err(format!("uniform-null FDP {mean_fdp:.3}"));
    }

    // noise metrics through the whole pipeline
    let cohorts = 200;
    let counts: Vec<usize> = (0..cohorts as u64)
        .into_par_iter()
        .map(|s| {
            let t = cohort(400, 100, false, 20_000 + s);
            let rep = run_association(&t, &AssociationConfig::default()).expect("association");
            rep.results.iter().filter(|r| r.significant).count()
        })
        .collect();
    let ok = counts.iter().filter(|&&c| c <= 10).count() as f64 / cohorts as f64;
    let pipeline_fdp = counts.iter().filter(|&&c| c > 0).count() as f64 / cohorts as f64;
    let detail = format!(
        "uniform-null FDP {mean_fdp:.3}; noise cohorts: <=10 significant in {:.1}%, FDP {pipeline_fdp:.3}",
        100.0 * ok
    );
    if ok >= 0.95 && pipeline_fdp <= q + mc_tolerance(q, cohorts) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Cohort with `noise` null metrics and, when `signal`, one metric whose
/// per-SD log-odds is 0.7.
pub fn cohort(n: usize, noise: usize, signal: bool, seed: u64) -> AnalysisTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names: Vec<String> = Vec::new();
    if signal {
        names.push("signal".into());
    }
    names.extend((0..noise).map(|k| format!("noise_{k:03}")));
    let shapes: Vec<(f64, f64, bool)> = (0..noise)
        .map(|_| {
            (
                rng.random_range(-5.0..50.0),
                rng.random_range(0.2..20.0),
                rng.random_bool(0.3),
            )
        })
        .collect();
    let mut t = AnalysisTable::new(names).unwrap();
    for i in 0..n {
        let u: f64 = rng.sample(StandardNormal);
        let age = rng.random_range(20.0..80.0);
        let sex = rng.random_range(0..2u8);
        let eta =
            -0.5 + if signal { 0.7 * u } else { 0.0 } + 0.01 * (age - 50.0) + 0.3 * sex as f64;
        let outcome = rng.random_bool(1.0 / (1.0 + (-eta).exp())) as u8;
        let mut metrics = Vec::new();
        if signal {
            metrics.push(Some(100.0 + 15.0 * u));
        }
        for &(mean, sd, skewed) in &shapes {
            let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
            let v = if skewed {
                mean + sd * (0.8 * z).exp()
            } else {
                mean + sd * z
            };
            metrics.push((rng.random::<f64>() > 0.05).then_some(v));
        }
        t.push(AnalysisRow {
            id: format!("p{i:04}"),
            outcome,
            age,
            sex,
            metrics,
        })
        .unwrap();
    }
    t
}

pub fn run() -> Outcome {
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for check in [
        check_medcouple,
        check_fences,
        check_bh,
        check_recovery,
        check_coverage,
        check_null_fdr,
    ] {
        match check() {
            Ok(d) => parts.push(d),
            Err(d) => failures.push(d),
        }
    }
    if failures.is_empty() {
        Ok(parts.join("; "))
    } else {
        Err(format!(
            "{}; passed: {}",
            failures.join("; "),
            parts.join("; ")
        ))
    }
}

pub fn run_end_to_end() -> Outcome {
    let t = cohort(400, 100, true, 42);
    let cfg = AssociationConfig::default();
    let rep = run_association(&t, &cfg).map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    write_results_csv(&rep.results, &mut csv).map_err(|e| e.to_string())?;
    let again = run_association(&t, &cfg).map_err(|e| e.to_string())?;
    let mut csv2 = Vec::new();
    write_results_csv(&again.results, &mut csv2).map_err(|e| e.to_string())?;
    if csv != csv2 {
        return Err("results CSV not reproducible".into());
    }
    let text = String::from_utf8(csv).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with("signal,"))
        .ok_or("signal metric missing from results")?;
    let r = rep.results.iter().find(|r| r.metric == "signal").unwrap();
    let or = r.odds_ratio.ok_or("no estimate for signal metric")?;
    let summary = r.summary().unwrap();
    let shape_ok = {
        let s = summary.as_str();
        s.starts_with("OR = ")
            && s.contains(" [95% CI: ")
            && s.ends_with(']')
            && line.ends_with(&summary)
    };
    let false_hits = rep
        .results
        .iter()
        .filter(|r| r.significant && r.metric != "signal")
        .count();
    let detail = format!(
        "signal {summary}, p_fdr {:.2e}, significant {}; {false_hits} noise metrics significant",
        r.p_fdr.unwrap_or(f64::NAN),
        r.significant
    );
    if r.significant && (1.6..=2.6).contains(&or) && shape_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}
