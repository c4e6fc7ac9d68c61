//! Vessel morphometry: per-segment shape and caliber measures, per-junction
//! branching geometry, per-image density and complexity scalars, and the
//! consolidated per-image measurement row.

mod catalog;
mod curve;
mod table;

use serde::{Deserialize, Serialize};

pub use catalog::{catalog_fingerprint, metrics_catalog, CatalogEntry, Family, CATALOG_VERSION};
pub use curve::{
    arc_length, box_count_dimension, curve_metrics, rasterize, resample, smooth, CurveMetrics,
    Point,
};
pub use table::{ImageMetricsRow, MetricTable};

use crate::raster::Mask;
use crate::vesselgraph::{
    build_graph, skeletonize, trim_calibers, GraphConfig, Skeleton, VesselGraph,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphoConfig {
    pub resample_step: f64,
    /// Gaussian smoothing of the pixel chain, in samples, before resampling.
    pub smoothing_sigma: f64,
    pub inflection_eps: f64,
    /// Resampled points used to estimate a segment's direction at a junction.
    pub branch_window: usize,
    /// Points closer to the junction than this multiple of the junction's
    /// caliber are skipped before the direction fit: inside the junction
    /// blob the skeleton bends towards the medial branch point.
    pub branch_skip: f64,
}

impl Default for MorphoConfig {
    fn default() -> Self {
        Self {
            resample_step: 5.0,
            smoothing_sigma: 3.0,
            inflection_eps: 1e-3,
            branch_window: 10,
            branch_skip: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMetrics {
    pub edge_id: usize,
    #[serde(flatten)]
    pub curve: CurveMetrics,
    pub mean_caliber: f64,
    pub min_caliber: f64,
    pub max_caliber: f64,
    pub caliber_range: f64,
    pub surface_area: f64,
    pub length_diameter_ratio: Option<f64>,
    pub strahler: u32,
    pub level: u32,
    pub is_terminal: bool,
    pub terminal_caliber: Option<f64>,
}

fn polyline_points(poly: &[[usize; 2]]) -> Vec<Point> {
    poly.iter().map(|p| [p[0] as f64, p[1] as f64]).collect()
}

/// Measures of one graph edge.
pub fn segment_metrics(
    graph: &VesselGraph,
    edge_id: usize,
    config: &MorphoConfig,
) -> SegmentMetrics {
    let edge = &graph.edges[edge_id];
    let curve = curve_metrics(&polyline_points(&edge.polyline), config);
    let cal = trim_calibers(&edge.calibers, graph.config.caliber_trim);
    let mean = cal.iter().sum::<f64>() / cal.len().max(1) as f64;
    let min = cal.iter().copied().fold(f64::INFINITY, f64::min);
    let max = cal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let is_terminal = graph.nodes[edge.node_b].degree == 1;
    SegmentMetrics {
        edge_id,
        surface_area: curve.arc_length * mean,
        length_diameter_ratio: (mean > 0.0).then(|| curve.arc_length / mean),
        curve,
        mean_caliber: mean,
        min_caliber: min,
        max_caliber: max,
        caliber_range: max - min,
        strahler: edge.strahler,
        level: edge.level,
        is_terminal,
        terminal_caliber: is_terminal.then_some(mean),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchMetrics {
    pub node: usize,
    /// Degrees between the two thickest children.
    pub branching_angle: f64,
    /// Degrees, `|a1 - a2|` where `a_i` is child i's deviation from the
    /// continued parent direction.
    pub angular_asymmetry: f64,
    /// `min(a1, a2) / max(a1, a2)`.
    pub asymmetry_ratio: Option<f64>,
}

/// Unit direction of a point run by its principal axis, oriented from the
/// first point towards the last.
fn principal_direction(pts: &[Point]) -> Option<Point> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut d = [theta.cos(), theta.sin()];
    let last = pts[pts.len() - 1];
    let span = [last[0] - pts[0][0], last[1] - pts[0][1]];
    if span[0] == 0.0 && span[1] == 0.0 {
        return None;
    }
    if d[0] * span[0] + d[1] * span[1] < 0.0 {
        d = [-d[0], -d[1]];
    }
    Some(d)
}

fn angle_between(a: Point, b: Point) -> f64 {
    let dot = (a[0] * b[0] + a[1] * b[1]).clamp(-1.0, 1.0);
    dot.acos().to_degrees()
}

/// Direction of an edge leaving `node`, from the first resampled points.
fn leaving_direction(
    graph: &VesselGraph,
    edge_id: usize,
    node: usize,
    config: &MorphoConfig,
) -> Option<Point> {
    let edge = &graph.edges[edge_id];
    let mut pts = polyline_points(&edge.polyline);
    let mut cal = edge.calibers.clone();
    if edge.node_a != node {
        pts.reverse();
        cal.reverse();
    }
    let res = resample(&smooth(&pts, config.smoothing_sigma), config.resample_step);
    let origin = pts[0];
    let skip = config.branch_skip * cal.first().copied().unwrap_or(0.0);
    let mut start = res
        .iter()
        .position(|p| (p[0] - origin[0]).hypot(p[1] - origin[1]) >= skip)
        .unwrap_or(res.len());
    if res.len().saturating_sub(start) < 2 {
        start = 0;
    }
    let take = (res.len() - start).min(config.branch_window);
    principal_direction(&res[start..start + take])
}

fn mean_caliber(graph: &VesselGraph, edge_id: usize) -> f64 {
    let cal = trim_calibers(&graph.edges[edge_id].calibers, graph.config.caliber_trim);
    cal.iter().sum::<f64>() / cal.len().max(1) as f64
}

/// Branching geometry at every junction that has a parent and at least two
/// children. With more than two children the two thickest are used.
pub fn branching_metrics(graph: &VesselGraph, config: &MorphoConfig) -> Vec<BranchMetrics> {
    let mut out = Vec::new();
    for node in &graph.nodes {
        let Some(parent) = graph.parent_of(node.id) else {
            continue;
        };
        let mut children: Vec<usize> = graph.children_of(node.id).map(|e| e.id).collect();
        if children.len() < 2 {
            continue;
        }
        children.sort_by(|&a, &b| {
            mean_caliber(graph, b)
                .total_cmp(&mean_caliber(graph, a))
                .then(a.cmp(&b))
        });
        let Some(back) = leaving_direction(graph, parent.id, node.id, config) else {
            continue;
        };
        let forward = [-back[0], -back[1]];
        let (Some(c1), Some(c2)) = (
            leaving_direction(graph, children[0], node.id, config),
            leaving_direction(graph, children[1], node.id, config),
        ) else {
            continue;
        };
        let (a1, a2) = (angle_between(forward, c1), angle_between(forward, c2));
        let hi = a1.max(a2);
        out.push(BranchMetrics {
            node: node.id,
            branching_angle: angle_between(c1, c2),
            angular_asymmetry: (a1 - a2).abs(),
            asymmetry_ratio: (hi > 0.0).then(|| a1.min(a2) / hi),
        });
    }
    out
}

/// Per-image scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScalars {
    pub vessel_area_density: f64,
    pub vessel_skeleton_density: f64,
    /// Junctions per million pixels.
    pub branching_density: f64,
    pub fractal_dimension: Option<f64>,
    pub n_terminal_points: usize,
    pub n_components: usize,
}

/// Box-counting dimension of a mask over box sizes 2, 4, ... up to a quarter
/// of the shorter side.
pub fn mask_fractal_dimension(mask: &Mask) -> Option<f64> {
    let px: Vec<(i64, i64)> = mask.ones().map(|(x, y)| (x as i64, y as i64)).collect();
    let limit = (mask.width().min(mask.height()) / 4) as i64;
    let sizes: Vec<i64> = (1..)
        .map(|k| 1i64 << k)
        .take_while(|&s| s <= limit)
        .collect();
    box_count_dimension(&px, &sizes)
}

pub fn image_scalars(mask: &Mask, skeleton: &Skeleton, graph: &VesselGraph) -> ImageScalars {
    let total = mask.len().max(1) as f64;
    let junctions = graph.nodes.iter().filter(|n| n.degree >= 3).count();
    ImageScalars {
        vessel_area_density: mask.count_ones() as f64 / total,
        vessel_skeleton_density: skeleton.pixel_count() as f64 / total,
        branching_density: 1e6 * junctions as f64 / total,
        fractal_dimension: mask_fractal_dimension(&skeleton.bits),
        n_terminal_points: graph.terminal_count(),
        n_components: graph.components.len(),
    }
}

/// Full measurement row for one image given its mask, skeleton and graph.
pub fn image_metrics(
    image_id: &str,
    mask: &Mask,
    skeleton: &Skeleton,
    graph: &VesselGraph,
    config: &MorphoConfig,
) -> ImageMetricsRow {
    let scalars = image_scalars(mask, skeleton, graph);
    let segments: Vec<SegmentMetrics> = (0..graph.edges.len())
        .map(|e| segment_metrics(graph, e, config))
        .collect();
    let branches = branching_metrics(graph, config);
    ImageMetricsRow::consolidate(image_id, &scalars, &segments, &branches)
}

/// Skeletonize, build the graph and measure, in one call.
pub fn analyze_mask(
    image_id: &str,
    mask: &Mask,
    graph_config: &GraphConfig,
    config: &MorphoConfig,
) -> (VesselGraph, ImageMetricsRow) {
    let skeleton = skeletonize(mask);
    let graph = build_graph(&skeleton, graph_config);
    let row = image_metrics(image_id, mask, &skeleton, &graph, config);
    (graph, row)
}

/// Mean, sample SD, max and min of the present values. SD needs two values.
pub fn consolidate(values: &[f64]) -> [Option<f64>; 4] {
    if values.is_empty() {
        return [None; 4];
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() >= 2)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    [Some(mean), sd, Some(max), Some(min)]
}
