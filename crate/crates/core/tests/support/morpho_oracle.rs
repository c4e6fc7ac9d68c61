//! Graph and morphometry recovery on synthetic trees with known geometry.

use std::time::Instant;

use chorovessel_core::morphometry::{branching_metrics, segment_metrics, MorphoConfig};
use chorovessel_core::synth::{sample_clean_scene, GroundTruth, SceneOptions};
use chorovessel_core::vesselgraph::{build_graph, skeletonize, GraphConfig, VesselGraph};
use rayon::prelude::*;

pub const SCENES: u64 = 20;
pub const ARC_TOL: f64 = 0.02;
pub const CALIBER_TOL: f64 = 1.0;
pub const ANGLE_TOL: f64 = 3.0;

#[derive(Debug, Default)]
pub struct SceneReport {
    pub seed: u64,
    pub problems: Vec<String>,
    pub worst_arc: f64,
    pub worst_caliber: f64,
    pub worst_angle: f64,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Truth segment -> graph edge whose polyline passes nearest its midpoint.
fn match_segments(truth: &GroundTruth, graph: &VesselGraph) -> Vec<Option<usize>> {
    truth
        .segments
        .iter()
        .map(|s| {
            let mid = s.polyline[s.polyline.len() / 2];
            graph
                .edges
                .iter()
                .map(|e| {
                    let d = e
                        .polyline
                        .iter()
                        .map(|p| dist([p[0] as f64, p[1] as f64], mid))
                        .fold(f64::INFINITY, f64::min);
                    (e.id, d)
                })
                .filter(|&(_, d)| d <= s.width)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(id, _)| id)
        })
        .collect()
}

pub fn check_scene(seed: u64) -> SceneReport {
    let mut r = SceneReport {
        seed,
        ..Default::default()
    };
    let (_, mask, _, truth) = sample_clean_scene(seed, &SceneOptions::large()).expect("scene");
    let skeleton = skeletonize(&mask);
    let graph = build_graph(&skeleton, &GraphConfig::default());
    let cfg = MorphoConfig::default();

    let junctions = graph.nodes.iter().filter(|n| n.degree >= 3).count();
    if junctions != truth.junction_count {
        r.problems
            .push(format!("junctions {junctions} != {}", truth.junction_count));
    }
    // free ends: every leaf tip plus the root's start
    if graph.terminal_count() != truth.terminal_count + 1 {
        r.problems.push(format!(
            "terminal points {} != {}",
            graph.terminal_count(),
            truth.terminal_count + 1
        ));
    }
    if graph.edges.len() != truth.segments.len() || graph.components.len() != 1 {
        r.problems.push(format!(
            "{} edges / {} components for {} segments",
            graph.edges.len(),
            graph.components.len(),
            truth.segments.len()
        ));
        return r;
    }

    let matched = match_segments(&truth, &graph);
    let mut used = vec![false; graph.edges.len()];
    let (mut arc_measured, mut arc_true) = (0.0, 0.0);
    for (s, m) in truth.segments.iter().zip(&matched) {
        let Some(e) = *m else {
            r.problems.push(format!("segment {} unmatched", s.id));
            continue;
        };
        if std::mem::replace(&mut used[e], true) {
            r.problems.push(format!("edge {e} matched twice"));
        }
        let edge = &graph.edges[e];
        if edge.strahler != s.strahler || edge.level + 1 != s.generation {
            r.problems.push(format!(
                "segment {}: strahler {} level {} vs {} {}",
                s.id,
                edge.strahler,
                edge.level,
                s.strahler,
                s.generation - 1
            ));
        }
        let sm = segment_metrics(&graph, e, &cfg);
        let cal_err = (sm.mean_caliber - s.width).abs();
        r.worst_caliber = r.worst_caliber.max(cal_err);
        if cal_err > CALIBER_TOL {
            r.problems.push(format!(
                "segment {}: caliber {:.2} vs {:.2}",
                s.id, sm.mean_caliber, s.width
            ));
        }
        arc_measured += sm.curve.arc_length;
        arc_true += s.arc_length;
    }
    let arc_err = (arc_measured / arc_true - 1.0).abs();
    r.worst_arc = arc_err;
    if arc_err > ARC_TOL {
        r.problems
            .push(format!("arc {arc_measured:.1} vs {arc_true:.1}"));
    }

    let branches = branching_metrics(&graph, &cfg);
    for j in &truth.junctions {
        let node = graph
            .nodes
            .iter()
            .filter(|n| n.degree >= 3)
            .min_by(|a, b| {
                dist([a.x as f64, a.y as f64], j.position)
                    .total_cmp(&dist([b.x as f64, b.y as f64], j.position))
            })
            .map(|n| n.id);
        let Some(b) = branches.iter().find(|b| Some(b.node) == node) else {
            r.problems.push(format!(
                "junction at {:?} has no branching record",
                j.position
            ));
            continue;
        };
        let err = (b.branching_angle - j.branching_angle).abs();
        r.worst_angle = r.worst_angle.max(err);
        if err > ANGLE_TOL {
            r.problems.push(format!(
                "junction {:?}: angle {:.2} vs {:.2}",
                j.position, b.branching_angle, j.branching_angle
            ));
        }
    }
    r
}

pub fn run() -> super::super::Outcome {
    let t = Instant::now();
    let reports: Vec<SceneReport> = (0..SCENES).into_par_iter().map(check_scene).collect();
    let secs = t.elapsed().as_secs_f64();
    let worst = |f: fn(&SceneReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    let summary = format!(
        "{SCENES} scenes in {secs:.1}s; worst total-arc error {:.2}%, caliber {:.2} px, branching angle {:.2} deg",
        100.0 * worst(|r| r.worst_arc),
        worst(|r| r.worst_caliber),
        worst(|r| r.worst_angle)
    );
    let problems: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.problems
                .iter()
                .map(move |p| format!("seed {}: {p}", r.seed))
        })
        .collect();
    if !problems.is_empty() {
        return Err(format!("{summary}; {}", problems.join("; ")));
    }
    if secs >= 60.0 {
        return Err(format!("{summary}; over the 60 s budget"));
    }
    Ok(summary)
}
