use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::events::IDLE_CUTOFF_MS;
use crate::error::{Error, Result};
use crate::presegment::{FitGrid, SegmenterBackend};

/// Version tag carried by the project file and every API response.
pub const HITL_SCHEMA: &str = "hitl/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewType {
    #[default]
    Standard,
    Ultrawide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub id: String,
    /// Where the frame was imported from, if anywhere.
    pub source: Option<String>,
    pub cohort: Option<String>,
    pub view: ViewType,
    pub width: usize,
    pub height: usize,
    pub has_truth: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageStatus {
    Proposed,
    InProgress,
    Corrected,
}

/// Per-image bookkeeping inside a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRound {
    pub status: ImageStatus,
    /// Bumped by every accepted mutation; writers must quote the current value.
    pub revision: u64,
    pub n_events: usize,
    pub last_seq: Option<u64>,
    /// Server-side active time (capped inter-event gaps).
    pub active_ms: Option<u64>,
    /// Time reported by the client, kept for reference.
    pub client_active_ms: Option<u64>,
    pub pixels_changed: Option<usize>,
    /// Dice between proposal and correction.
    pub dice: Option<f64>,
}

impl ImageRound {
    fn new() -> Self {
        Self {
            status: ImageStatus::Proposed,
            revision: 0,
            n_events: 0,
            last_seq: None,
            active_ms: None,
            client_active_ms: None,
            pixels_changed: None,
            dice: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    pub n_images: usize,
    pub mean_dice_proposal_vs_corrected: f64,
    pub mean_active_seconds: f64,
    pub mean_pixels_changed: f64,
    /// Mean Dice reached `stop_dice`.
    pub converged: bool,
    /// Corrected images the refit used (all rounds so far).
    pub training_images: usize,
    /// Mean Dice of the refit proposer on its training corrections.
    pub fit_dice: Option<f64>,
    /// Proposer for the next round.
    pub fitted: SegmenterBackend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundState {
    pub number: u32,
    pub image_ids: Vec<String>,
    pub images: BTreeMap<String, ImageRound>,
    /// Proposer that generated this round's proposals.
    pub backend: SegmenterBackend,
    pub report: Option<RoundReport>,
}

impl RoundState {
    pub(crate) fn new(number: u32, image_ids: Vec<String>, backend: SegmenterBackend) -> Self {
        let images = image_ids
            .iter()
            .map(|id| (id.clone(), ImageRound::new()))
            .collect();
        Self {
            number,
            image_ids,
            images,
            backend,
            report: None,
        }
    }

    pub fn is_finalized(&self) -> bool {
        self.report.is_some()
    }

    pub fn all_corrected(&self) -> bool {
        self.images
            .values()
            .all(|i| i.status == ImageStatus::Corrected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    /// Mean proposal Dice at which a round counts as converged.
    pub stop_dice: f64,
    pub idle_cutoff_ms: u64,
    pub fit_grid: FitGrid,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            stop_dice: 0.95,
            idle_cutoff_ms: IDLE_CUTOFF_MS,
            fit_grid: FitGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub schema: String,
    pub id: String,
    pub config: ProjectConfig,
    pub images: Vec<ImageEntry>,
    pub rounds: Vec<RoundState>,
    /// Proposer for the next round.
    pub backend: SegmenterBackend,
}

impl Project {
    pub fn new(id: impl Into<String>, config: ProjectConfig, backend: SegmenterBackend) -> Self {
        Self {
            schema: HITL_SCHEMA.to_string(),
            id: id.into(),
            config,
            images: Vec::new(),
            rounds: Vec::new(),
            backend,
        }
    }

    pub fn image(&self, id: &str) -> Result<&ImageEntry> {
        self.images
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::NotFound(format!("image {id}")))
    }

    pub fn round(&self, n: u32) -> Result<&RoundState> {
        n.checked_sub(1)
            .and_then(|i| self.rounds.get(i as usize))
            .ok_or_else(|| Error::NotFound(format!("round {n}")))
    }

    pub fn current_round(&self) -> Option<&RoundState> {
        self.rounds.last()
    }

    /// Round the image was assigned to, if any.
    pub fn round_of(&self, image_id: &str) -> Option<&RoundState> {
        self.rounds.iter().find(|r| r.images.contains_key(image_id))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.schema != HITL_SCHEMA {
            return Err(Error::Malformed(format!(
                "unsupported project schema {:?}",
                self.schema
            )));
        }
        for (i, r) in self.rounds.iter().enumerate() {
            if r.number as usize != i + 1 {
                return Err(Error::Malformed(format!(
                    "round numbers not contiguous at {}",
                    r.number
                )));
            }
        }
        Ok(())
    }
}

/// Ids double as file names: ASCII letters, digits, `-`, `_` and `.`, not
/// starting with a dot.
pub fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("invalid id {id:?}")))
    }
}
