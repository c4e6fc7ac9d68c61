//! Vessel-map workbench: proposal of vessel masks, round-based human
//! correction with proposer refitting, graph-based vessel morphometry and
//! disease-association statistics.
//!
//! Pipeline overview:
//!
//! image -> [`presegment::propose`] -> human (or simulated) correction via
//! [`hitl`] -> [`vesselgraph::skeletonize`] -> [`vesselgraph::build_graph`]
//! -> [`morphometry::image_metrics`] -> [`stats::run_association`].

pub mod error;
pub mod evaluation;
pub mod hitl;
pub mod morphometry;
pub mod presegment;
pub mod raster;
pub mod stats;
pub mod synth;
pub mod vesselgraph;

pub use error::{Error, Result};
pub use evaluation::{ConfusionCounts, EvalReport, MetricEstimate};
pub use hitl::{EditEvent, Project, RoundReport, RoundState, Workspace};
pub use morphometry::{ImageMetricsRow, MetricTable, SegmentMetrics};
pub use presegment::{SegmenterBackend, VesselnessParams};
pub use raster::{GrayImage, Mask, ProbabilityGrid};
pub use stats::{AnalysisTable, AssociationResult};
pub use synth::{GroundTruth, TreeSpec};
pub use vesselgraph::{Skeleton, VesselGraph};
