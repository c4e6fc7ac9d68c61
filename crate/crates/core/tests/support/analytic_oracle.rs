//! Closed-form geometry: tortuosity of digitized curves and box-counting
//! dimension of lines and filled squares.

use std::f64::consts::{FRAC_PI_2, PI};

use chorovessel_core::morphometry::{
    curve_metrics, mask_fractal_dimension, segment_metrics, MorphoConfig,
};
use chorovessel_core::raster::Mask;
use chorovessel_core::synth::rasterize_polyline;
use chorovessel_core::vesselgraph::{build_graph, skeletonize, GraphConfig, VesselGraph};

use super::super::Outcome;

fn single_edge_graph(mask: &Mask) -> Result<VesselGraph, String> {
    let g = build_graph(&skeletonize(mask), &GraphConfig::default());
    if g.edges.len() != 1 {
        return Err(format!("expected one segment, graph has {}", g.edges.len()));
    }
    Ok(g)
}

/// Ordered one-pixel digitization of a semicircle: dense samples rounded to
/// pixel centres, consecutive repeats dropped.
fn digital_semicircle(r: f64) -> Vec<[f64; 2]> {
    let n = 20_000;
    let mut out: Vec<[f64; 2]> = Vec::new();
    for k in 0..=n {
        let t = PI * k as f64 / n as f64;
        let q = [
            (r + 20.0 + r * t.cos()).round(),
            (20.0 + r * t.sin()).round(),
        ];
        if out.last() != Some(&q) {
            out.push(q);
        }
    }
    out
}

pub fn run_tortuosity() -> Outcome {
    let cfg = MorphoConfig::default();
    let mut notes = Vec::new();

    for r in [60.0, 100.0, 200.0] {
        // one-pixel digital semicircle, measured directly and through the graph
        let chain = digital_semicircle(r);
        let direct = curve_metrics(&chain, &cfg)
            .tortuosity
            .ok_or("no tortuosity")?;
        let side = (2.0 * r) as usize + 41;
        let mut mask = Mask::new(side, side);
        for p in &chain {
            mask.set(p[0] as usize, p[1] as usize, true);
        }
        let g = single_edge_graph(&mask)?;
        let via_graph = segment_metrics(&g, 0, &cfg)
            .curve
            .tortuosity
            .ok_or("no tortuosity")?;
        for (what, t) in [("chain", direct), ("graph", via_graph)] {
            let err = (t / FRAC_PI_2 - 1.0).abs();
            if err > 0.01 {
                return Err(format!(
                    "semicircle r={r} ({what}): tortuosity {t:.5}, error {:.2}%",
                    100.0 * err
                ));
            }
        }
        notes.push(format!("r={r}: {direct:.4}/{via_graph:.4}"));
    }

    let straight = |what: String,
                    m: chorovessel_core::morphometry::CurveMetrics|
     -> Result<(), String> {
        let t = m.tortuosity.ok_or("no tortuosity")?;
        if (t - 1.0).abs() > 1e-9 || m.curve_angle.abs() > 1e-9 || m.tortuosity_density != Some(0.0)
        {
            return Err(format!(
                "straight {what}: tortuosity {t}, curve angle {}, density {:?}",
                m.curve_angle, m.tortuosity_density
            ));
        }
        Ok(())
    };

    // one-pixel digital straight chains in the four exact directions
    for (dx, dy) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)] {
        let chain: Vec<[f64; 2]> = (0..=100)
            .map(|k| [20.0 + k as f64 * dx, 150.0 + k as f64 * dy])
            .collect();
        straight(format!("chain ({dx},{dy})"), curve_metrics(&chain, &cfg))?;
    }

    // thick axis-aligned vessels through skeleton and graph
    for (dx, dy) in [(1.0, 0.0), (0.0, 1.0)] {
        let mut mask = Mask::new(300, 300);
        let a = [150.0 - 100.0 * dx, 150.0 - 100.0 * dy];
        let b = [150.0 + 100.0 * dx, 150.0 + 100.0 * dy];
        rasterize_polyline(&mut mask, &[a, b], &[7.0, 7.0]);
        let g = single_edge_graph(&mask)?;
        straight(
            format!("bar ({dx},{dy})"),
            segment_metrics(&g, 0, &cfg).curve,
        )?;
    }
    Ok(format!(
        "semicircle pi/2 within 1% ({}); straight segments exact",
        notes.join(", ")
    ))
}

pub fn run_fractal() -> Outcome {
    let n = 512;
    let line = Mask::from_fn(n, n, |_, y| y == 200);
    let diagonal = Mask::from_fn(n, n, |x, y| x == y);
    let square = Mask::from_fn(n, n, |x, y| {
        (64..448).contains(&x) && (64..448).contains(&y)
    });
    let full = Mask::filled(n, n);
    let mut out = Vec::new();
    for (name, mask, expected) in [
        ("line", &line, 1.0),
        ("diagonal", &diagonal, 1.0),
        ("square", &square, 2.0),
        ("full", &full, 2.0),
    ] {
        let d = mask_fractal_dimension(mask).ok_or(format!("{name}: no dimension"))?;
        if (d - expected).abs() > 0.1 {
            return Err(format!("{name}: dimension {d:.4}, expected {expected}"));
        }
        out.push(format!("{name} {d:.3}"));
    }
    Ok(out.join(", "))
}
