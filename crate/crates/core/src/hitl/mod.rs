//! Round-based correction loop: proposals, replayable edit logs, corrections,
//! active-time accounting, proposer refits and the HTTP API that drives them.
//!
//! Projects live in a plain directory:
//!
//! ```text
//! project.json
//! images/<id>.png
//! truths/<id>.png            (optional reference masks)
//! rounds/<n>/proposals/<id>.png
//! rounds/<n>/corrections/<id>.png
//! rounds/<n>/events/<id>.json
//! rounds/<n>/report.json
//! ```

pub mod api;
mod events;
mod project;
mod simulate;
mod workspace;

pub use events::{
    active_ms, apply_event, apply_events, brush_offsets, diff_events, line_points, path_points,
    validate_events, verify_replay, EditEvent, Tool, IDLE_CUTOFF_MS,
};
pub use project::{
    validate_id, ImageEntry, ImageRound, ImageStatus, Project, ProjectConfig, RoundReport,
    RoundState, ViewType, HITL_SCHEMA,
};
pub use simulate::{blend_toward, run_loop, simulate_annotator, LoopConfig, SimulatedCorrection};
pub use workspace::{Layout, Workspace};
