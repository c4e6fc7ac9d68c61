use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::{logistic_fit, odds_ratio, LogisticOptions};
use super::robust::{missing_and_modal_fraction, remove_outliers, standardize};
use super::{fdr_adjust, AnalysisTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    /// Metrics with a larger missing share are dropped.
    pub max_missing: f64,
    /// Metrics whose most common value exceeds this share are dropped.
    pub max_modal: f64,
    /// Adjusted-boxplot coefficient.
    pub outlier_range: f64,
    /// Significance level on FDR-adjusted p-values.
    pub alpha: f64,
    pub logistic: LogisticOptions,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            max_missing: 0.90,
            max_modal: 0.95,
            outlier_range: 3.0,
            alpha: 0.05,
            logistic: LogisticOptions::default(),
        }
    }
}

/// Per-SD association of one metric with the outcome, adjusted for age and sex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub metric: String,
    pub n_used: usize,
    pub odds_ratio: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub p_value: Option<f64>,
    pub p_fdr: Option<f64>,
    pub converged: bool,
    pub significant: bool,
    /// Why no estimate is available, or a fit warning.
    pub note: Option<String>,
}

impl AssociationResult {
    /// `OR = 1.72 [95% CI: 1.12-2.63]`
    pub fn summary(&self) -> Option<String> {
        Some(format!(
            "OR = {:.2} [95% CI: {:.2}-{:.2}]",
            self.odds_ratio?, self.ci_lo?, self.ci_hi?
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationReport {
    pub n_rows: usize,
    pub retained: Vec<String>,
    pub dropped: Vec<String>,
    pub results: Vec<AssociationResult>,
}

/// Metrics kept after the missingness and near-constant screens.
pub fn filter_metrics(table: &AnalysisTable, cfg: &AssociationConfig) -> Vec<String> {
    table
        .metric_names
        .iter()
        .filter(|name| {
            let col = table.column(name).expect("own column");
            let (missing, modal) = missing_and_modal_fraction(&col);
            missing <= cfg.max_missing && modal <= cfg.max_modal
        })
        .cloned()
        .collect()
}

fn failed(metric: &str, n_used: usize, err: &Error) -> AssociationResult {
    AssociationResult {
        metric: metric.to_string(),
        n_used,
        odds_ratio: None,
        ci_lo: None,
        ci_hi: None,
        p_value: None,
        p_fdr: None,
        converged: false,
        significant: false,
        note: Some(err.to_string()),
    }
}

fn fit_metric(table: &AnalysisTable, metric: &str, cfg: &AssociationConfig) -> AssociationResult {
    let col = table.column(metric).expect("retained metric exists");
    let present = col.iter().flatten().count();
    let cleaned = match remove_outliers(&col, cfg.outlier_range) {
        Ok((kept, _)) => kept,
        Err(e) => return failed(metric, present, &e),
    };
    let z = match standardize(&cleaned) {
        Ok(z) => z,
        Err(e) => return failed(metric, cleaned.iter().flatten().count(), &e),
    };
    let used: Vec<usize> = (0..table.rows.len()).filter(|&i| z[i].is_some()).collect();
    let n = used.len();
    let y: Vec<f64> = used.iter().map(|&i| table.rows[i].outcome as f64).collect();
    let x = DMatrix::from_fn(n, 4, |r, c| {
        let row = &table.rows[used[r]];
        match c {
            0 => 1.0,
            1 => z[used[r]].unwrap(),
            2 => row.age,
            _ => row.sex as f64,
        }
    });
    let fit = match logistic_fit(&y, &x, &cfg.logistic) {
        Ok(f) => f,
        Err(e) => return failed(metric, n, &e),
    };
    let (coef, se) = (fit.coefficients[1], fit.std_errors[1]);
    let (or, lo, hi) = odds_ratio(coef, se);
    let note = if fit.separation {
        Some("separation: coefficient diverged".to_string())
    } else if !fit.converged {
        Some(format!(
            "no convergence after {} iterations",
            fit.iterations
        ))
    } else {
        None
    };
    AssociationResult {
        metric: metric.to_string(),
        n_used: n,
        odds_ratio: Some(or),
        ci_lo: Some(lo),
        ci_hi: Some(hi),
        p_value: Some(fit.p_value(1)),
        p_fdr: None,
        converged: fit.converged,
        significant: false,
        note,
    }
}

/// Screen metrics, then per metric: outlier removal, SD scaling and
/// `outcome ~ metric + age + sex`; p-values are FDR-adjusted across all
/// metrics that produced an estimate.
pub fn run_association(
    table: &AnalysisTable,
    cfg: &AssociationConfig,
) -> Result<AssociationReport> {
    if table.rows.is_empty() {
        return Err(Error::invalid("analysis table has no rows"));
    }
    let retained = filter_metrics(table, cfg);
    let dropped = table
        .metric_names
        .iter()
        .filter(|n| !retained.contains(n))
        .cloned()
        .collect();
    let mut results: Vec<AssociationResult> = retained
        .par_iter()
        .map(|m| fit_metric(table, m, cfg))
        .collect();

    let idx: Vec<usize> = (0..results.len())
        .filter(|&i| results[i].p_value.is_some())
        .collect();
    let p: Vec<f64> = idx.iter().map(|&i| results[i].p_value.unwrap()).collect();
    for (&i, q) in idx.iter().zip(fdr_adjust(&p)?) {
        results[i].p_fdr = Some(q);
        results[i].significant = q < cfg.alpha;
    }
    Ok(AssociationReport {
        n_rows: table.rows.len(),
        retained,
        dropped,
        results,
    })
}

pub const RESULT_COLUMNS: [&str; 10] = [
    "metric",
    "n_used",
    "or",
    "ci_lo",
    "ci_hi",
    "p",
    "p_fdr",
    "converged",
    "significant",
    "summary",
];

pub fn write_results_csv(results: &[AssociationResult], writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(RESULT_COLUMNS)?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in results {
        w.write_record([
            r.metric.clone(),
            r.n_used.to_string(),
            num(r.odds_ratio),
            num(r.ci_lo),
            num(r.ci_hi),
            num(r.p_value),
            num(r.p_fdr),
            r.converged.to_string(),
            r.significant.to_string(),
            r.summary().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_results_csv_file(results: &[AssociationResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results_csv(results, std::io::BufWriter::new(f))
}
