//! Static SVG figures: forest plot of odds ratios, ROC curve, metric bars.

use std::fmt::Write;

use chorovessel_core::{AssociationResult, EvalReport, MetricEstimate};

const FONT: &str = "font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\"";

fn open(w: f64, h: f64) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    )
    .unwrap();
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Odds ratios with 95% intervals on a log axis; significant rows are filled.
pub fn forest(results: &[AssociationResult]) -> String {
    let rows: Vec<(&AssociationResult, f64, f64, f64)> = results
        .iter()
        .filter_map(|r| Some((r, r.odds_ratio?, r.ci_lo?, r.ci_hi?)))
        .collect();
    let (label_w, plot_w, text_w, row_h, top) = (260.0, 360.0, 200.0, 18.0, 40.0);
    let width = label_w + plot_w + text_w;
    let height = top + row_h * rows.len().max(1) as f64 + 50.0;
    let mut s = open(width, height);

    let lo = rows
        .iter()
        .map(|r| r.2)
        .fold(1.0f64, f64::min)
        .max(1e-6)
        .ln();
    let hi = rows
        .iter()
        .map(|r| r.3)
        .fold(1.0f64, f64::max)
        .min(1e6)
        .ln();
    let pad = 0.05 * (hi - lo).max(0.1);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |or: f64| label_w + plot_w * (or.clamp(1e-6, 1e6).ln() - lo) / (hi - lo);

    writeln!(
        s,
        "<text x=\"{:.2}\" y=\"20\" {FONT} font-weight=\"bold\">Odds ratio per SD (95% CI)</text>",
        label_w
    )
    .unwrap();
    let bottom = top + row_h * rows.len().max(1) as f64;
    writeln!(
        s,
        "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>",
        x(1.0),
        top - 6.0,
        bottom
    )
    .unwrap();
    for (i, (r, or, cl, ch)) in rows.iter().enumerate() {
        let y = top + row_h * (i as f64 + 0.5);
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"end\">{}</text>",
            label_w - 10.0,
            y + 4.0,
            escape(&r.metric)
        )
        .unwrap();
        writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>",
            x(*cl),
            x(*ch)
        )
        .unwrap();
        let fill = if r.significant { "black" } else { "white" };
        writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"{fill}\" stroke=\"black\"/>",
            x(*or) - 4.0,
            y - 4.0
        )
        .unwrap();
        let summary = r.summary().unwrap_or_default();
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT}>{}</text>",
            label_w + plot_w + 10.0,
            y + 4.0,
            escape(&summary)
        )
        .unwrap();
    }
    // axis with ticks at round odds ratios inside the range
    writeln!(s, "<line x1=\"{label_w:.2}\" y1=\"{bottom:.2}\" x2=\"{:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>", label_w + plot_w).unwrap();
    for t in [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
        let lt = f64::ln(t);
        if lt < lo || lt > hi {
            continue;
        }
        writeln!(
            s,
            "<line x1=\"{0:.2}\" y1=\"{bottom:.2}\" x2=\"{0:.2}\" y2=\"{1:.2}\" stroke=\"black\"/>",
            x(t),
            bottom + 5.0
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">{t}</text>",
            x(t),
            bottom + 20.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Pooled ROC points `(fpr, tpr)` from scores and labels, thinned so that
/// consecutive kept points differ by at least `step` on some axis.
pub fn roc_points(samples: &mut [(f32, bool)], step: f64) -> Vec<(f64, f64)> {
    let pos = samples.iter().filter(|s| s.1).count() as f64;
    let neg = samples.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Vec::new();
    }
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < samples.len() {
        let score = samples[i].0;
        while i < samples.len() && samples[i].0 == score {
            if samples[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let p = (fp / neg, tp / pos);
        let last = *out.last().unwrap();
        if i == samples.len() || (p.0 - last.0).abs() >= step || (p.1 - last.1).abs() >= step {
            out.push(p);
        }
    }
    out
}

pub fn roc(points: &[(f64, f64)], auc: Option<f64>) -> String {
    let (m, side) = (50.0, 320.0);
    let mut s = open(side + 2.0 * m, side + 2.0 * m);
    let px = |fpr: f64| m + side * fpr;
    let py = |tpr: f64| m + side * (1.0 - tpr);
    writeln!(s, "<rect x=\"{m}\" y=\"{m}\" width=\"{side}\" height=\"{side}\" fill=\"none\" stroke=\"black\"/>").unwrap();
    writeln!(s, "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>", px(0.0), py(0.0), px(1.0), py(1.0)).unwrap();
    if !points.is_empty() {
        let path: Vec<String> = points
            .iter()
            .map(|&(f, t)| format!("{:.2},{:.2}", px(f), py(t)))
            .collect();
        writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>",
            path.join(" ")
        )
        .unwrap();
    }
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">{t}</text>",
            px(t),
            m + side + 18.0
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"end\">{t}</text>",
            m - 6.0,
            py(t) + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">1 - specificity</text>",
        m + side / 2.0,
        m + side + 38.0
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"14\" y=\"{0:.2}\" {FONT} text-anchor=\"middle\" transform=\"rotate(-90 14 {0:.2})\">sensitivity</text>",
        m + side / 2.0
    )
    .unwrap();
    let title = match auc {
        Some(a) => format!("ROC, AUC = {a:.3}"),
        None => "ROC".to_string(),
    };
    writeln!(
        s,
        "<text x=\"{m}\" y=\"30\" {FONT} font-weight=\"bold\">{title}</text>"
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Point estimates with interval whiskers on a shared [0, 1] axis.
pub fn metric_bars(report: &EvalReport) -> String {
    let bars: [(&str, &MetricEstimate); 6] = [
        ("Dice", &report.dice),
        ("F1", &report.f1),
        ("AUC", &report.auc),
        ("Accuracy", &report.accuracy),
        ("Sensitivity", &report.sensitivity),
        ("Specificity", &report.specificity),
    ];
    let (m, bw, gap, ph) = (50.0, 50.0, 20.0, 240.0);
    let width = 2.0 * m + bars.len() as f64 * (bw + gap);
    let mut s = open(width, ph + 2.0 * m + 20.0);
    let y = |v: f64| m + ph * (1.0 - v.clamp(0.0, 1.0));
    writeln!(
        s,
        "<line x1=\"{m}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        y(0.0),
        width - m,
        y(0.0)
    )
    .unwrap();
    for (i, (name, est)) in bars.iter().enumerate() {
        let x0 = m + gap / 2.0 + i as f64 * (bw + gap);
        let cx = x0 + bw / 2.0;
        writeln!(
            s,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">{name}</text>",
            y(0.0) + 18.0
        )
        .unwrap();
        let Some(v) = est.value else {
            writeln!(
                s,
                "<text x=\"{cx:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">n/a</text>",
                y(0.0) - 6.0
            )
            .unwrap();
            continue;
        };
        writeln!(
            s,
            "<rect x=\"{x0:.2}\" y=\"{:.2}\" width=\"{bw}\" height=\"{:.2}\" fill=\"#5b8db8\"/>",
            y(v),
            y(0.0) - y(v)
        )
        .unwrap();
        if let (Some(lo), Some(hi)) = (est.ci_lo, est.ci_hi) {
            writeln!(
                s,
                "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
                y(lo),
                y(hi)
            )
            .unwrap();
        }
        writeln!(
            s,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" {FONT} text-anchor=\"middle\">{v:.3}</text>",
            y(v) - 8.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roc_of_perfect_scores() {
        let mut s = vec![(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        let p = roc_points(&mut s, 0.0);
        assert_eq!(
            p,
            vec![(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]
        );
    }

    #[test]
    fn roc_ties_move_diagonally() {
        let mut s = vec![(0.5, true), (0.5, false)];
        assert_eq!(roc_points(&mut s, 0.0), vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn forest_skips_rows_without_estimate() {
        let r = AssociationResult {
            metric: "a<b".into(),
            n_used: 10,
            odds_ratio: Some(2.0),
            ci_lo: Some(1.5),
            ci_hi: Some(3.0),
            p_value: Some(0.01),
            p_fdr: Some(0.01),
            converged: true,
            significant: true,
            note: None,
        };
        let mut empty = r.clone();
        empty.odds_ratio = None;
        let svg = forest(&[r, empty]);
        assert_eq!(svg.matches("<rect x=").count(), 1);
        assert!(svg.contains("a&lt;b"));
    }
}
