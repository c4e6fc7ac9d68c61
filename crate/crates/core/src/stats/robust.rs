use crate::error::{Error, Result};
use crate::evaluation::quantile_sorted;

fn sorted_present(values: &[Option<f64>]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().flatten().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust skewness: the median of `((xj - m) - (m - xi)) / (xj - xi)` over
/// all pairs with `xi <= m <= xj`, `m` the sample median. Pairs where both
/// values equal the median take -1, 0 or +1 by their rank among the ties.
pub fn medcouple(values: &[f64]) -> Result<f64> {
    if values.len() < 3 {
        return Err(Error::invalid("medcouple needs at least 3 values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("medcouple input must be finite"));
    }
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let m = median_sorted(&x);
    // upper: values >= m in descending order; lower: values <= m, descending
    let upper: Vec<f64> = x.iter().rev().copied().filter(|&v| v >= m).collect();
    let lower: Vec<f64> = x.iter().rev().copied().filter(|&v| v <= m).collect();
    let p = upper.len();
    let mut kernels = Vec::with_capacity(p * lower.len());
    for (i, &xj) in upper.iter().enumerate() {
        for (j, &xi) in lower.iter().enumerate() {
            let h = if xj == m && xi == m {
                // ties sit at the tail of `upper` and the head of `lower`
                (p as i64 - 1 - i as i64 - j as i64).signum() as f64
            } else {
                ((xj - m) - (m - xi)) / (xj - xi)
            };
            kernels.push(h);
        }
    }
    let n = kernels.len();
    let (_, hi, _) = kernels.select_nth_unstable_by(n / 2, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        return Ok(hi);
    }
    let lo = kernels[..n / 2]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierFences {
    pub q1: f64,
    pub q3: f64,
    pub medcouple: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Skewness-adjusted boxplot fences with coefficient `range`.
pub fn adjusted_fences(values: &[f64], range: f64) -> Result<OutlierFences> {
    if values.len() < 4 {
        return Err(Error::invalid("outlier fences need at least 4 values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let mc = medcouple(&v)?;
    let (a, b) = if mc >= 0.0 { (-4.0, 3.0) } else { (-3.0, 4.0) };
    Ok(OutlierFences {
        q1,
        q3,
        medcouple: mc,
        lower: q1 - range * (a * mc).exp() * iqr,
        upper: q3 + range * (b * mc).exp() * iqr,
    })
}

/// Values outside the adjusted fences become missing. With a zero IQR
/// nothing is removed.
pub fn remove_outliers(
    values: &[Option<f64>],
    range: f64,
) -> Result<(Vec<Option<f64>>, OutlierFences)> {
    let present = sorted_present(values);
    let fences = adjusted_fences(&present, range)?;
    if fences.q3 - fences.q1 <= 0.0 {
        return Ok((values.to_vec(), fences));
    }
    let kept = values
        .iter()
        .map(|v| v.filter(|&x| x >= fences.lower && x <= fences.upper))
        .collect();
    Ok((kept, fences))
}

/// `(x - mean) / sd` over the present entries, sample SD.
pub fn standardize(values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.len() < 2 {
        return Err(Error::invalid("standardize needs at least 2 values"));
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::ZeroVariance);
    }
    Ok(values.iter().map(|v| v.map(|x| (x - mean) / sd)).collect())
}

/// Share of missing entries and, among present ones, of the most common value.
pub fn missing_and_modal_fraction(values: &[Option<f64>]) -> (f64, f64) {
    if values.is_empty() {
        return (1.0, 1.0);
    }
    let present = sorted_present(values);
    let missing = 1.0 - present.len() as f64 / values.len() as f64;
    if present.is_empty() {
        return (missing, 1.0);
    }
    let mut best = 0usize;
    let mut run = 0usize;
    for (i, v) in present.iter().enumerate() {
        run = if i > 0 && present[i - 1] == *v {
            run + 1
        } else {
            1
        };
        best = best.max(run);
    }
    (missing, best as f64 / present.len() as f64)
}
