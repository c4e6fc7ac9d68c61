//! Vessel graph extraction: skeletonize a binary mask, turn the skeleton into
//! an acyclic graph of branch points and vessel segments, and annotate each
//! segment with caliber, Strahler order and generation level.

mod build;
mod skeleton;

use serde::{Deserialize, Serialize};

pub use build::build_graph;
pub use skeleton::{count_components, distance_transform, skeletonize, thin, Skeleton};

use crate::error::{Error, Result};

pub const GRAPH_SCHEMA: &str = "vgraph/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Points dropped at each end of a segment before summarizing caliber,
    /// so junction blobs do not inflate the estimate.
    pub caliber_trim: usize,
    /// Subtracted from `2 * dt` at each skeleton point. The distance map is
    /// measured to background pixel centres, half a pixel past the boundary.
    pub caliber_offset: f64,
    /// Leaf segments shorter than this (and thinner than their parent's mean
    /// caliber) are pruned as thinning spurs.
    pub spur_max_length: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            caliber_trim: 2,
            caliber_offset: 0.5,
            spur_max_length: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Endpoint,
    Junction,
    Isolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: usize,
    pub y: usize,
    pub degree: usize,
    pub kind: NodeKind,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    /// Upstream node (closer to the component root).
    pub node_a: usize,
    pub node_b: usize,
    /// Pixel chain from `node_a` to `node_b`, both included, as `[x, y]`.
    pub polyline: Vec<[usize; 2]>,
    /// Per-point caliber along `polyline`.
    pub calibers: Vec<f64>,
    pub strahler: u32,
    /// Branching generation; the root segment is level 0.
    pub level: u32,
    pub component: usize,
}

impl Edge {
    /// Sum of distances between consecutive polyline points.
    pub fn pixel_length(&self) -> f64 {
        self.polyline
            .windows(2)
            .map(|p| {
                let dx = p[1][0] as f64 - p[0][0] as f64;
                let dy = p[1][1] as f64 - p[0][1] as f64;
                dx.hypot(dy)
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: usize,
    pub root: usize,
    /// Edge ids in breadth-first order from the root.
    pub edges: Vec<usize>,
}

/// Acyclic vessel graph: every component is a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselGraph {
    pub schema: String,
    pub width: usize,
    pub height: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub components: Vec<Component>,
    pub config: GraphConfig,
}

impl VesselGraph {
    /// Edges whose `node_a` is `node`, i.e. children leaving that node.
    pub fn children_of(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.node_a == node)
    }

    /// The edge ending at `node`, if any.
    pub fn parent_of(&self, node: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.node_b == node)
    }

    pub fn terminal_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.degree == 1).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: VesselGraph = serde_json::from_str(s)?;
        if g.schema != GRAPH_SCHEMA {
            return Err(Error::Malformed(format!(
                "unsupported graph schema {:?}",
                g.schema
            )));
        }
        Ok(g)
    }
}

/// Per-point caliber along a pixel chain with `trim` points dropped at each
/// end. When trimming would leave nothing, the middle point is kept.
pub fn segment_calibers(
    skeleton: &Skeleton,
    polyline: &[[usize; 2]],
    config: &GraphConfig,
) -> Vec<f64> {
    let all: Vec<f64> = polyline
        .iter()
        .map(|p| point_caliber(skeleton.dt_at(p[0], p[1]), config))
        .collect();
    trim_calibers(&all, config.caliber_trim)
}

pub(crate) fn point_caliber(dt: f64, config: &GraphConfig) -> f64 {
    (2.0 * dt - config.caliber_offset).max(1.0)
}

pub fn trim_calibers(all: &[f64], trim: usize) -> Vec<f64> {
    if all.is_empty() {
        return Vec::new();
    }
    if all.len() > 2 * trim {
        all[trim..all.len() - trim].to_vec()
    } else {
        vec![all[all.len() / 2]]
    }
}
