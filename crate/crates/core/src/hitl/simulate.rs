use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::events::{apply_event, diff_events};
use super::project::{ImageStatus, ProjectConfig, RoundReport, ViewType};
use super::workspace::Workspace;
use crate::error::{Error, Result};
use crate::presegment::SegmenterBackend;
use crate::raster::Mask;
use crate::synth::{sample_clean_scene, SceneOptions};

/// Simulated stroke pacing: fixed cost per stroke plus per changed pixel.
const STROKE_MS: u64 = 1_500;
const PIXEL_MS: u64 = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedCorrection {
    pub image_id: String,
    pub pixels_changed: usize,
    pub n_events: usize,
}

fn image_seed(seed: u64, id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    seed ^ u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Move each pixel where `current` disagrees with `truth` over to the truth
/// with probability `fidelity`.
pub fn blend_toward(
    current: &Mask,
    truth: &Mask,
    fidelity: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Mask> {
    if current.dims() != truth.dims() {
        return Err(Error::DimensionMismatch {
            expected: current.dims(),
            actual: truth.dims(),
        });
    }
    let (w, h) = current.dims();
    let mut out = current.clone();
    for y in 0..h {
        for x in 0..w {
            let t = truth.get(x, y);
            if current.get(x, y) != t && (fidelity >= 1.0 || rng.random_bool(fidelity)) {
                out.set(x, y, t);
            }
        }
    }
    Ok(out)
}

/// Correct every unfinished image of the current round against its ground
/// truth, logging the strokes that realize the change and submitting.
pub fn simulate_annotator(
    ws: &mut Workspace,
    fidelity: f64,
    seed: u64,
) -> Result<Vec<SimulatedCorrection>> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::invalid("fidelity must lie in [0, 1]"));
    }
    let round = ws
        .project()
        .current_round()
        .ok_or_else(|| Error::State("no round started".into()))?
        .clone();
    if round.is_finalized() {
        return Err(Error::State(format!(
            "round {} is already finalized",
            round.number
        )));
    }
    let pending: Vec<String> = round
        .image_ids
        .iter()
        .filter(|id| round.images[*id].status != ImageStatus::Corrected)
        .cloned()
        .collect();
    for id in &pending {
        if !ws.project().image(id)?.has_truth {
            return Err(Error::NotFound(format!("ground truth for image {id}")));
        }
    }
    let mut out = Vec::with_capacity(pending.len());
    for id in pending {
        let proposal = ws.proposal(&id)?;
        let prior = ws.events(&id)?;
        let mut draft = proposal.clone();
        for e in &prior {
            apply_event(&mut draft, e);
        }
        let truth = ws.truth(&id)?;
        let mut rng = ChaCha8Rng::seed_from_u64(image_seed(seed, &id));
        let target = blend_toward(&draft, &truth, fidelity, &mut rng)?;
        let first_seq = prior.last().map_or(1, |e| e.seq + 1);
        let t0 = prior.last().map_or(0, |e| e.t_ms + STROKE_MS);
        let events = diff_events(&draft, &target, first_seq, t0, STROKE_MS, PIXEL_MS)?;
        let client_ms = events.last().map(|e| e.t_ms - t0 + STROKE_MS);
        let entry = ws.correct(&id, &events, &target, client_ms)?;
        out.push(SimulatedCorrection {
            image_id: id,
            pixels_changed: entry.pixels_changed.unwrap_or(0),
            n_events: events.len(),
        });
    }
    Ok(out)
}

/// Parameters of an end-to-end simulated correction loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub rounds: u32,
    pub images_per_round: usize,
    /// Side of the square synthetic scenes.
    pub scene_size: usize,
    pub fidelity: f64,
    pub seed: u64,
    pub project: ProjectConfig,
    pub backend: SegmenterBackend,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            rounds: 3,
            images_per_round: 4,
            scene_size: 160,
            fidelity: 1.0,
            seed: 42,
            project: ProjectConfig::default(),
            backend: SegmenterBackend::default(),
        }
    }
}

/// Build a project of synthetic scenes under `root` and run propose ->
/// simulated correction -> finalize for each round.
pub fn run_loop(root: impl Into<PathBuf>, cfg: &LoopConfig) -> Result<Vec<RoundReport>> {
    if cfg.rounds == 0 || cfg.images_per_round == 0 {
        return Err(Error::invalid(
            "loop needs at least one round and one image per round",
        ));
    }
    let mut ws = Workspace::create(
        root,
        &format!("loop-sim-{}", cfg.seed),
        cfg.project.clone(),
        cfg.backend.clone(),
    )?;
    let opts = SceneOptions::small(cfg.scene_size);
    let mut reports = Vec::new();
    for r in 1..=cfg.rounds {
        let mut ids = Vec::new();
        for k in 0..cfg.images_per_round {
            let scene_seed = cfg.seed * 10_000 + (r as u64) * 100 + k as u64;
            let (_, mask, image, _) = sample_clean_scene(scene_seed, &opts)?;
            let id = format!("r{r}-img{k:02}");
            ws.register_image(
                &id,
                &image,
                None,
                Some("synthetic".into()),
                ViewType::Standard,
            )?;
            ws.register_truth(&id, &mask)?;
            ids.push(id);
        }
        ws.start_round(&ids)?;
        simulate_annotator(&mut ws, cfg.fidelity, cfg.seed.wrapping_add(r as u64))?;
        reports.push(ws.finalize_round(r)?);
    }
    Ok(reports)
}
