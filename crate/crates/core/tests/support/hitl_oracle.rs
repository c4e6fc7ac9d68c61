//! Correction-loop criteria: loop trend, replay determinism, persistence.

use chorovessel_core::hitl::{
    apply_event, apply_events, run_loop, simulate_annotator, verify_replay, EditEvent, LoopConfig,
    ProjectConfig, Tool, ViewType, Workspace,
};
use chorovessel_core::presegment::SegmenterBackend;
use chorovessel_core::raster::Mask;
use chorovessel_core::synth::{sample_clean_scene, SceneOptions};
use chorovessel_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::super::Outcome;

pub fn run_loop_trend() -> Outcome {
    let results: Vec<Result<(u64, Vec<f64>, Vec<f64>), String>> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let cfg = LoopConfig {
                seed,
                ..LoopConfig::default()
            };
            let reports = run_loop(dir.path().join("project"), &cfg)
                .map_err(|e| format!("seed {seed}: {e}"))?;
            Ok((
                seed,
                reports
                    .iter()
                    .map(|r| r.mean_dice_proposal_vs_corrected)
                    .collect(),
                reports.iter().map(|r| r.mean_pixels_changed).collect(),
            ))
        })
        .collect();
    let mut violations = Vec::new();
    for r in results {
        let (seed, dice, px) = r?;
        if dice.len() != 3 {
            return Err(format!("seed {seed}: {} rounds", dice.len()));
        }
        if dice.windows(2).any(|w| w[1] < w[0]) {
            violations.push(format!(
                "seed {seed} dice {:.4}/{:.4}/{:.4}",
                dice[0], dice[1], dice[2]
            ));
        }
        if px.windows(2).any(|w| w[1] >= w[0]) {
            violations.push(format!("seed {seed} pixels {}/{}/{}", px[0], px[1], px[2]));
        }
    }
    if violations.is_empty() {
        Ok("20 seeds x 3 rounds, zero violations".into())
    } else {
        Err(format!(
            "{} violations: {}",
            violations.len(),
            violations.join("; ")
        ))
    }
}

fn random_log(rng: &mut ChaCha8Rng, dims: (usize, usize)) -> Vec<EditEvent> {
    let n = rng.random_range(0..12);
    let mut t = 0;
    (0..n)
        .map(|k| {
            t += rng.random_range(0..60_000);
            let points = rng.random_range(1..6);
            EditEvent {
                seq: 3 * k as u64 + 1,
                t_ms: t,
                tool: if rng.random_bool(0.6) {
                    Tool::Add
                } else {
                    Tool::Erase
                },
                radius_px: [1, 2, 3, 5, 8][rng.random_range(0..5)],
                path: (0..points)
                    .map(|_| {
                        [
                            rng.random_range(0..dims.0 as i64),
                            rng.random_range(0..dims.1 as i64),
                        ]
                    })
                    .collect(),
            }
        })
        .collect()
}

pub fn run_replay() -> Outcome {
    let failures: Vec<String> = (0..1000u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let dims = (rng.random_range(16..97), rng.random_range(16..97));
            let proposal = Mask::from_fn(dims.0, dims.1, |_, _| rng.random_bool(0.2));
            let log = random_log(&mut rng, dims);
            let a = apply_events(&proposal, &log).ok()?;
            // second replay: independent stroke-by-stroke pass on a fresh copy
            let mut b = proposal.clone();
            for e in &log {
                apply_event(&mut b, e);
            }
            if a != b {
                return Some(format!("log {i}: replays differ"));
            }
            if verify_replay(&proposal, &log, &a).is_err() {
                return Some(format!("log {i}: genuine mask rejected"));
            }
            let mut tampered = a.clone();
            let (x, y) = (rng.random_range(0..dims.0), rng.random_range(0..dims.1));
            tampered.set(x, y, !tampered.get(x, y));
            match verify_replay(&proposal, &log, &tampered) {
                Err(Error::ReplayMismatch(1)) => None,
                other => Some(format!("log {i}: tampered mask gave {other:?}")),
            }
        })
        .collect();

    // the same rule enforced through project submission
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut ws = Workspace::create(
        dir.path(),
        "replay",
        ProjectConfig::default(),
        SegmenterBackend::default(),
    )
    .map_err(|e| e.to_string())?;
    let (_, truth, image, _) =
        sample_clean_scene(1, &SceneOptions::small(96)).map_err(|e| e.to_string())?;
    ws.register_image("a", &image, None, None, ViewType::Standard)
        .map_err(|e| e.to_string())?;
    ws.start_round(&["a".to_string()])
        .map_err(|e| e.to_string())?;
    let proposal = ws.proposal("a").map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let log = chorovessel_core::hitl::diff_events(&proposal, &truth, 1, 0, 1000, 10)
        .map_err(|e| e.to_string())?;
    let rev = ws.append_events("a", &log, 0).map_err(|e| e.to_string())?;
    let mut tampered = truth.clone();
    let (x, y) = (rng.random_range(0..96), rng.random_range(0..96));
    tampered.set(x, y, !tampered.get(x, y));
    let submit_rejects = matches!(
        ws.submit_correction("a", &tampered, None, rev),
        Err(Error::ReplayMismatch(1))
    );
    let submit_accepts = ws.submit_correction("a", &truth, None, rev).is_ok();

    if failures.is_empty() && submit_rejects && submit_accepts {
        Ok("1000 logs replay identically; every tampered mask rejected".into())
    } else {
        Err(format!(
            "{} failures {:?}; submit rejects tampered {submit_rejects}, accepts genuine {submit_accepts}",
            failures.len(),
            failures.iter().take(5).collect::<Vec<_>>()
        ))
    }
}

pub fn run_persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().join("project");
    let mut steps = 0usize;
    let mut check = |ws: &Workspace, what: &str| -> Result<(), String> {
        steps += 1;
        let again = Workspace::open(&root).map_err(|e| format!("{what}: reload failed: {e}"))?;
        if again.project() != ws.project() {
            return Err(format!("{what}: reloaded state differs"));
        }
        Ok(())
    };
    let e = |e: Error| e.to_string();
    let mut ws = Workspace::create(
        &root,
        "session",
        ProjectConfig::default(),
        SegmenterBackend::default(),
    )
    .map_err(e)?;
    check(&ws, "create")?;
    let mut ids = Vec::new();
    for k in 0..4u64 {
        let (_, mask, image, _) =
            sample_clean_scene(100 + k, &SceneOptions::small(96)).map_err(e)?;
        let id = format!("img{k}");
        ws.register_image(
            &id,
            &image,
            Some(format!("scan-{k}.png")),
            Some("control".into()),
            ViewType::Standard,
        )
        .map_err(e)?;
        check(&ws, "register image")?;
        ws.register_truth(&id, &mask).map_err(e)?;
        check(&ws, "register truth")?;
        ids.push(id);
    }

    // round 1: one manual correction, one simulated
    ws.start_round(&ids[..2]).map_err(e)?;
    check(&ws, "start round 1")?;
    let stroke = |seq: u64, tool: Tool| EditEvent {
        seq,
        t_ms: seq * 4_000,
        tool,
        radius_px: 3,
        path: vec![[10, 10], [40, 30], [60, 30]],
    };
    let rev = ws
        .append_events("img0", &[stroke(1, Tool::Add)], 0)
        .map_err(e)?;
    check(&ws, "append events")?;
    if ws
        .append_events("img0", &[stroke(2, Tool::Erase)], 0)
        .is_ok()
    {
        return Err("stale revision accepted".into());
    }
    check(&ws, "stale append")?;
    let rev = ws
        .append_events("img0", &[stroke(2, Tool::Erase)], rev)
        .map_err(e)?;
    check(&ws, "append events again")?;
    let mut fin = ws.proposal("img0").map_err(e)?;
    for ev in ws.events("img0").map_err(e)? {
        apply_event(&mut fin, &ev);
    }
    ws.submit_correction("img0", &fin, Some(9_000), rev)
        .map_err(e)?;
    check(&ws, "submit correction")?;
    simulate_annotator(&mut ws, 0.7, 5).map_err(e)?;
    check(&ws, "simulated annotator")?;
    ws.finalize_round(1).map_err(e)?;
    check(&ws, "finalize round 1")?;

    // round 2: accept-as-is plus full-fidelity simulation
    ws.start_round(&ids[2..]).map_err(e)?;
    check(&ws, "start round 2")?;
    let p = ws.proposal("img2").map_err(e)?;
    ws.correct("img2", &[], &p, None).map_err(e)?;
    check(&ws, "accept as-is")?;
    if ws.finalize_round(2).is_ok() {
        return Err("incomplete round finalized".into());
    }
    check(&ws, "premature finalize")?;
    simulate_annotator(&mut ws, 1.0, 6).map_err(e)?;
    check(&ws, "simulated annotator 2")?;
    ws.finalize_round(2).map_err(e)?;
    check(&ws, "finalize round 2")?;
    Ok(format!("{steps} reloads, all identical"))
}
