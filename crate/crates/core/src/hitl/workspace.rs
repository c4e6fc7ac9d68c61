use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::events::{active_ms, validate_events, verify_replay, EditEvent};
use super::project::{
    validate_id, ImageEntry, ImageRound, ImageStatus, Project, ProjectConfig, RoundReport,
    RoundState, ViewType, HITL_SCHEMA,
};
use crate::error::{Error, Result};
use crate::evaluation::dice;
use crate::presegment::{fit_on_corrections, propose, SegmenterBackend};
use crate::raster::{
    decode_gray_png, decode_mask_png, encode_gray_png, encode_mask_png, GrayImage, Mask,
};

/// Write to a sibling temp file, then rename over the target.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path.display().to_string())
        } else {
            Error::io(path, e)
        }
    })
}

/// File locations inside a project directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn project_file(&self) -> PathBuf {
        self.root.join("project.json")
    }

    pub fn image(&self, id: &str) -> PathBuf {
        self.root.join("images").join(format!("{id}.png"))
    }

    pub fn truth(&self, id: &str) -> PathBuf {
        self.root.join("truths").join(format!("{id}.png"))
    }

    pub fn round_dir(&self, n: u32) -> PathBuf {
        self.root.join("rounds").join(n.to_string())
    }

    pub fn proposal(&self, n: u32, id: &str) -> PathBuf {
        self.round_dir(n)
            .join("proposals")
            .join(format!("{id}.png"))
    }

    pub fn correction(&self, n: u32, id: &str) -> PathBuf {
        self.round_dir(n)
            .join("corrections")
            .join(format!("{id}.png"))
    }

    pub fn events(&self, n: u32, id: &str) -> PathBuf {
        self.round_dir(n).join("events").join(format!("{id}.json"))
    }

    pub fn report(&self, n: u32) -> PathBuf {
        self.round_dir(n).join("report.json")
    }

    pub fn read_image(&self, id: &str) -> Result<GrayImage> {
        decode_gray_png(&read_bytes(&self.image(id))?)
    }

    pub fn read_mask(&self, path: &Path) -> Result<Mask> {
        decode_mask_png(&read_bytes(path)?)
    }

    pub fn read_events(&self, n: u32, id: &str) -> Result<Vec<EditEvent>> {
        let path = self.events(n, id);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let log: EventLog = serde_json::from_slice(&read_bytes(&path)?)?;
        Ok(log.events)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EventLog {
    schema: String,
    image_id: String,
    events: Vec<EditEvent>,
}

/// A project directory and its in-memory state. Every mutating call leaves
/// the directory consistent with `project()`; `project.json` is written last.
#[derive(Debug)]
pub struct Workspace {
    layout: Layout,
    project: Project,
}

impl Workspace {
    pub fn create(
        root: impl Into<PathBuf>,
        id: &str,
        config: ProjectConfig,
        backend: SegmenterBackend,
    ) -> Result<Self> {
        validate_id(id)?;
        let layout = Layout { root: root.into() };
        if layout.project_file().exists() {
            return Err(Error::State(format!(
                "{} already holds a project",
                layout.root.display()
            )));
        }
        let ws = Self {
            layout,
            project: Project::new(id, config, backend),
        };
        ws.save()?;
        Ok(ws)
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let layout = Layout { root: root.into() };
        let project: Project = serde_json::from_slice(&read_bytes(&layout.project_file())?)?;
        project.validate()?;
        Ok(Self { layout, project })
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn root(&self) -> &Path {
        &self.layout.root
    }

    fn save(&self) -> Result<()> {
        write_atomic(
            &self.layout.project_file(),
            &serde_json::to_vec_pretty(&self.project)?,
        )
    }

    pub fn register_image(
        &mut self,
        id: &str,
        img: &GrayImage,
        source: Option<String>,
        cohort: Option<String>,
        view: ViewType,
    ) -> Result<()> {
        validate_id(id)?;
        if self.project.images.iter().any(|e| e.id == id) {
            return Err(Error::State(format!("image {id} already registered")));
        }
        write_atomic(&self.layout.image(id), &encode_gray_png(img)?)?;
        self.project.images.push(ImageEntry {
            id: id.to_string(),
            source,
            cohort,
            view,
            width: img.width(),
            height: img.height(),
            has_truth: false,
        });
        self.save()
    }

    /// Attach a reference mask used by the simulated annotator.
    pub fn register_truth(&mut self, id: &str, mask: &Mask) -> Result<()> {
        let entry = self.project.image(id)?;
        if mask.dims() != (entry.width, entry.height) {
            return Err(Error::DimensionMismatch {
                expected: (entry.width, entry.height),
                actual: mask.dims(),
            });
        }
        write_atomic(&self.layout.truth(id), &encode_mask_png(mask)?)?;
        self.project
            .images
            .iter_mut()
            .find(|e| e.id == id)
            .expect("checked above")
            .has_truth = true;
        self.save()
    }

    pub fn image(&self, id: &str) -> Result<GrayImage> {
        self.project.image(id)?;
        self.layout.read_image(id)
    }

    pub fn truth(&self, id: &str) -> Result<Mask> {
        if !self.project.image(id)?.has_truth {
            return Err(Error::NotFound(format!("ground truth for image {id}")));
        }
        self.layout.read_mask(&self.layout.truth(id))
    }

    pub fn round(&self, n: u32) -> Result<&RoundState> {
        self.project.round(n)
    }

    fn assigned_round(&self, image_id: &str) -> Result<u32> {
        self.project.image(image_id)?;
        self.project
            .round_of(image_id)
            .map(|r| r.number)
            .ok_or_else(|| Error::NotFound(format!("image {image_id} is not assigned to a round")))
    }

    pub fn proposal(&self, image_id: &str) -> Result<Mask> {
        let n = self.assigned_round(image_id)?;
        self.layout.read_mask(&self.layout.proposal(n, image_id))
    }

    pub fn correction(&self, image_id: &str) -> Result<Mask> {
        let n = self.assigned_round(image_id)?;
        self.layout.read_mask(&self.layout.correction(n, image_id))
    }

    pub fn events(&self, image_id: &str) -> Result<Vec<EditEvent>> {
        let n = self.assigned_round(image_id)?;
        self.layout.read_events(n, image_id)
    }

    /// Generate and store proposals for `image_ids` with the current proposer.
    pub fn start_round(&mut self, image_ids: &[String]) -> Result<&RoundState> {
        if image_ids.is_empty() {
            return Err(Error::invalid("a round needs at least one image"));
        }
        if let Some(r) = self.project.current_round() {
            if !r.is_finalized() {
                return Err(Error::State(format!("round {} is not finalized", r.number)));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for id in image_ids {
            self.project.image(id)?;
            if !seen.insert(id) {
                return Err(Error::invalid(format!("image {id} listed twice")));
            }
            if let Some(r) = self.project.round_of(id) {
                return Err(Error::State(format!(
                    "image {id} already assigned to round {}",
                    r.number
                )));
            }
        }
        let n = self.project.rounds.len() as u32 + 1;
        let backend = self.project.backend.clone();
        let layout = &self.layout;
        image_ids.par_iter().try_for_each(|id| -> Result<()> {
            let img = layout.read_image(id)?;
            let (_, mask) = propose(&img, &backend)?;
            write_atomic(&layout.proposal(n, id), &encode_mask_png(&mask)?)
        })?;
        self.project
            .rounds
            .push(RoundState::new(n, image_ids.to_vec(), backend));
        self.save()?;
        Ok(self.project.rounds.last().expect("just pushed"))
    }

    /// Current-round entry for an image, checking the caller's revision.
    fn editable(&self, image_id: &str, revision: u64) -> Result<(u32, &ImageRound)> {
        let n = self.assigned_round(image_id)?;
        let round = self.project.round(n)?;
        if round.is_finalized() || n as usize != self.project.rounds.len() {
            return Err(Error::State(format!("round {n} is closed")));
        }
        let entry = &round.images[image_id];
        if entry.revision != revision {
            return Err(Error::StaleRevision {
                expected: entry.revision,
                actual: revision,
            });
        }
        Ok((n, entry))
    }

    fn entry_mut(&mut self, n: u32, image_id: &str) -> &mut ImageRound {
        self.project.rounds[n as usize - 1]
            .images
            .get_mut(image_id)
            .expect("entry exists")
    }

    /// Append strokes to an image's log. Returns the new revision.
    pub fn append_events(
        &mut self,
        image_id: &str,
        events: &[EditEvent],
        revision: u64,
    ) -> Result<u64> {
        let (n, entry) = self.editable(image_id, revision)?;
        if entry.status == ImageStatus::Corrected {
            return Err(Error::State(format!(
                "image {image_id} is already corrected"
            )));
        }
        let dims = {
            let e = self.project.image(image_id)?;
            (e.width, e.height)
        };
        validate_events(events, dims, entry.last_seq)?;
        let mut log = self.layout.read_events(n, image_id)?;
        log.extend_from_slice(events);
        let file = EventLog {
            schema: HITL_SCHEMA.to_string(),
            image_id: image_id.to_string(),
            events: log,
        };
        write_atomic(
            &self.layout.events(n, image_id),
            &serde_json::to_vec(&file)?,
        )?;
        let entry = self.entry_mut(n, image_id);
        entry.n_events = file.events.len();
        entry.last_seq = file.events.last().map(|e| e.seq).or(entry.last_seq);
        entry.status = ImageStatus::InProgress;
        entry.revision += 1;
        let rev = entry.revision;
        self.save()?;
        Ok(rev)
    }

    /// Accept the final mask if it equals the replay of the stored log over
    /// the proposal.
    pub fn submit_correction(
        &mut self,
        image_id: &str,
        final_mask: &Mask,
        client_active_ms: Option<u64>,
        revision: u64,
    ) -> Result<&ImageRound> {
        let (n, entry) = self.editable(image_id, revision)?;
        if entry.status == ImageStatus::Corrected {
            return Err(Error::State(format!(
                "image {image_id} is already corrected"
            )));
        }
        let proposal = self.layout.read_mask(&self.layout.proposal(n, image_id))?;
        let log = self.layout.read_events(n, image_id)?;
        verify_replay(&proposal, &log, final_mask)?;
        write_atomic(
            &self.layout.correction(n, image_id),
            &encode_mask_png(final_mask)?,
        )?;
        let cutoff = self.project.config.idle_cutoff_ms;
        let changed = proposal.hamming(final_mask)?;
        let d = dice(&proposal, final_mask)?;
        let entry = self.entry_mut(n, image_id);
        entry.status = ImageStatus::Corrected;
        entry.active_ms = Some(active_ms(&log, cutoff));
        entry.client_active_ms = client_active_ms;
        entry.pixels_changed = Some(changed);
        entry.dice = Some(d);
        entry.revision += 1;
        self.save()?;
        Ok(&self.project.rounds[n as usize - 1].images[image_id])
    }

    /// Log and submit in one step (events may be empty to accept as-is).
    pub fn correct(
        &mut self,
        image_id: &str,
        events: &[EditEvent],
        final_mask: &Mask,
        client_active_ms: Option<u64>,
    ) -> Result<&ImageRound> {
        let n = self.assigned_round(image_id)?;
        let mut rev = self.project.round(n)?.images[image_id].revision;
        if !events.is_empty() {
            rev = self.append_events(image_id, events, rev)?;
        }
        self.submit_correction(image_id, final_mask, client_active_ms, rev)
    }

    /// Close a fully corrected round: report, then refit the proposer on every
    /// correction collected so far.
    pub fn finalize_round(&mut self, n: u32) -> Result<RoundReport> {
        let round = self.project.round(n)?;
        if round.is_finalized() {
            return Err(Error::State(format!("round {n} is already finalized")));
        }
        if let Some((id, _)) = round
            .images
            .iter()
            .find(|(_, e)| e.status != ImageStatus::Corrected)
        {
            return Err(Error::State(format!(
                "round {n} is incomplete: image {id} is not corrected"
            )));
        }
        let k = round.images.len() as f64;
        let mean = |f: &dyn Fn(&ImageRound) -> f64| round.images.values().map(f).sum::<f64>() / k;
        let mean_dice = mean(&|e| e.dice.unwrap_or(0.0));
        let mean_active = mean(&|e| e.active_ms.unwrap_or(0) as f64 / 1000.0);
        let mean_changed = mean(&|e| e.pixels_changed.unwrap_or(0) as f64);

        let mut training = Vec::new();
        for r in &self.project.rounds[..n as usize] {
            for id in &r.image_ids {
                training.push((r.number, id.clone()));
            }
        }
        let pairs = training
            .par_iter()
            .map(|(rn, id)| {
                Ok((
                    self.layout.read_image(id)?,
                    self.layout.read_mask(&self.layout.correction(*rn, id))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let (fitted, fit_dice) = match &self.project.backend {
            SegmenterBackend::Builtin(_) => {
                let out = fit_on_corrections(&pairs, &self.project.config.fit_grid)?;
                (SegmenterBackend::Builtin(out.params), Some(out.mean_dice))
            }
            external => (external.clone(), None),
        };
        let report = RoundReport {
            round: n,
            n_images: round.images.len(),
            mean_dice_proposal_vs_corrected: mean_dice,
            mean_active_seconds: mean_active,
            mean_pixels_changed: mean_changed,
            converged: mean_dice >= self.project.config.stop_dice,
            training_images: pairs.len(),
            fit_dice,
            fitted: fitted.clone(),
        };
        let body = serde_json::json!({ "schema": HITL_SCHEMA, "report": &report });
        write_atomic(&self.layout.report(n), &serde_json::to_vec_pretty(&body)?)?;
        self.project.rounds[n as usize - 1].report = Some(report.clone());
        self.project.backend = fitted;
        self.save()?;
        Ok(report)
    }

    pub fn report(&self, n: u32) -> Result<&RoundReport> {
        self.project
            .round(n)?
            .report
            .as_ref()
            .ok_or_else(|| Error::NotFound(format!("report for round {n}")))
    }
}
