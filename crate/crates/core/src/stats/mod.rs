//! Association statistics: metric screening, skewness-adjusted outlier
//! removal, SD scaling, logistic regression with Wald intervals and
//! Benjamini-Hochberg adjustment.

mod association;
mod logistic;
mod robust;
mod table;

pub use association::{
    filter_metrics, run_association, write_results_csv, write_results_csv_file, AssociationConfig,
    AssociationReport, AssociationResult, RESULT_COLUMNS,
};
pub use logistic::{
    information, logistic_fit, odds_ratio, score, wald_p, LogisticFit, LogisticOptions,
    SEPARATION_BOUND, Z_95,
};
pub use robust::{
    adjusted_fences, medcouple, missing_and_modal_fraction, remove_outliers, standardize,
    OutlierFences,
};
pub use table::{AnalysisRow, AnalysisTable};

use crate::error::{Error, Result};

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn fdr_adjust(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(p[i] * (m as f64 / (rank + 1) as f64));
        out[i] = running.min(1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bh_examples() {
        let q = fdr_adjust(&[0.01, 0.02, 0.03, 0.04, 0.05]).unwrap();
        assert!(q.iter().all(|v| (v - 0.05).abs() < 1e-15), "{q:?}");
        assert_eq!(fdr_adjust(&[0.3]).unwrap(), vec![0.3]);
        assert!(fdr_adjust(&[1.2]).is_err());
        assert_eq!(fdr_adjust(&[]).unwrap(), Vec::<f64>::new());
    }

    proptest! {
        #[test]
        fn bh_dominates_and_keeps_rank(p in proptest::collection::vec(0.0f64..=1.0, 1..80)) {
            let q = fdr_adjust(&p).unwrap();
            for i in 0..p.len() {
                prop_assert!(q[i] >= p[i] && q[i] <= 1.0);
                for j in 0..p.len() {
                    if p[i] < p[j] {
                        prop_assert!(q[i] <= q[j]);
                    }
                }
            }
        }
    }
}
