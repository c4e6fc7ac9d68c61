use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chorovessel_core::evaluation::{bootstrap_report, EvalInput};
use chorovessel_core::hitl::{api, run_loop, LoopConfig, ViewType, Workspace};
use chorovessel_core::morphometry::analyze_mask;
use chorovessel_core::presegment::propose;
use chorovessel_core::raster::{
    read_image, read_mask, read_probability, write_mask, write_probability,
};
use chorovessel_core::stats::{run_association, write_results_csv_file};
use chorovessel_core::synth::{generate, sample_clean_scene, write_bundle, SceneOptions};
use chorovessel_core::vesselgraph::{build_graph, skeletonize};
use chorovessel_core::{AnalysisTable, Mask, MetricTable, ProbabilityGrid, TreeSpec};
use clap::Args;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::plot;
use crate::CliError;

type CliResult = Result<(), CliError>;

fn require(path: &Path, what: &str) -> CliResult {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::input(format!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::internal(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::internal(format!("{}: {e}", dir.display())))
}

/// `(id, path)` for a single file, or for every file with extension `ext`
/// in a directory, sorted by id. The id is the file stem.
fn list_files(path: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>, CliError> {
    require(path, "input")?;
    let stem = |p: &Path| p.file_stem().and_then(|s| s.to_str()).map(str::to_string);
    if path.is_file() {
        let id = stem(path)
            .ok_or_else(|| CliError::input(format!("bad file name {}", path.display())))?;
        return Ok(vec![(id, path.to_path_buf())]);
    }
    let entries = std::fs::read_dir(path)
        .map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| CliError::internal(e.to_string()))?.path();
        if p.is_file() && p.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(id) = stem(&p) {
                out.push((id, p));
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::input(format!(
            "no .{ext} files in {}",
            path.display()
        )));
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Args)]
pub struct PresegArgs {
    /// Image file or directory of PNG images
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving masks/<id>.png and probability/<id>.vprb
    #[arg(long)]
    pub output: PathBuf,
    /// External segmentation service URL (replaces the built-in filter)
    #[arg(long)]
    pub endpoint: Option<String>,
}

pub fn preseg(args: PresegArgs, cfg: &PipelineConfig) -> CliResult {
    let images = list_files(&args.input, "png")?;
    let backend = cfg.backend(args.endpoint.as_deref());
    let (mask_dir, prob_dir) = (args.output.join("masks"), args.output.join("probability"));
    create_dir(&mask_dir)?;
    create_dir(&prob_dir)?;
    images.par_iter().try_for_each(|(id, path)| -> CliResult {
        let img = read_image(path)?;
        let (grid, mask) = propose(&img, &backend)?;
        write_mask(&mask, mask_dir.join(format!("{id}.png")))?;
        write_probability(&grid, prob_dir.join(format!("{id}.vprb")))?;
        Ok(())
    })?;
    println!(
        "proposed {} image(s) into {}",
        images.len(),
        args.output.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Binary mask PNG
    #[arg(long)]
    pub input: PathBuf,
    /// Graph JSON file
    #[arg(long)]
    pub output: PathBuf,
}

pub fn graph(args: GraphArgs, cfg: &PipelineConfig) -> CliResult {
    require(&args.input, "input")?;
    let mask = read_mask(&args.input)?;
    let g = build_graph(&skeletonize(&mask), &cfg.graph);
    write_text(&args.output, &g.to_json()?)?;
    println!(
        "{} nodes, {} segments, {} components",
        g.nodes.len(),
        g.edges.len(),
        g.components.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Mask PNG or directory of mask PNGs
    #[arg(long)]
    pub input: PathBuf,
    /// CSV file, one row per mask in id order
    #[arg(long)]
    pub output: PathBuf,
}

pub fn metrics(args: MetricsArgs, cfg: &PipelineConfig) -> CliResult {
    let masks = list_files(&args.input, "png")?;
    let rows = masks
        .par_iter()
        .map(|(id, path)| {
            let mask = read_mask(path)?;
            Ok(analyze_mask(id, &mask, &cfg.graph, &cfg.morphometry).1)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = MetricTable::new();
    table.rows = rows;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_text(&args.output, &String::from_utf8(buf).expect("csv is utf-8"))?;
    println!(
        "{} row(s) x {} metrics -> {}",
        table.rows.len(),
        table.columns.len(),
        args.output.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted mask PNG or directory
    #[arg(long)]
    pub input: PathBuf,
    /// Reference mask PNG or directory with matching file names
    #[arg(long)]
    pub truth: PathBuf,
    /// Directory of <id>.vprb probability maps; enables AUC and the ROC figure
    #[arg(long)]
    pub prob: Option<PathBuf>,
    /// Directory receiving report.json, metrics.svg and roc.svg
    #[arg(long)]
    pub output: PathBuf,
}

pub fn eval(args: EvalArgs, cfg: &PipelineConfig, seed: u64) -> CliResult {
    let preds = list_files(&args.input, "png")?;
    let truths = list_files(&args.truth, "png")?;
    let single = preds.len() == 1 && truths.len() == 1;
    let mut pairs: Vec<(String, Mask, Mask)> = Vec::new();
    for (id, path) in &preds {
        let truth_path = if single {
            &truths[0].1
        } else {
            &truths
                .iter()
                .find(|t| &t.0 == id)
                .ok_or_else(|| CliError::input(format!("no reference mask for {id}")))?
                .1
        };
        pairs.push((id.clone(), read_mask(path)?, read_mask(truth_path)?));
    }
    let grids: Option<Vec<ProbabilityGrid>> = match &args.prob {
        Some(dir) => {
            require(dir, "probability directory")?;
            Some(
                pairs
                    .iter()
                    .map(|(id, _, _)| {
                        let p = dir.join(format!("{id}.vprb"));
                        require(&p, "probability map")?;
                        Ok(read_probability(&p)?)
                    })
                    .collect::<Result<_, CliError>>()?,
            )
        }
        None => None,
    };
    let inputs: Vec<EvalInput> = pairs
        .iter()
        .enumerate()
        .map(|(k, (_, pred, truth))| EvalInput {
            pred,
            truth,
            grid: grids.as_ref().map(|g| &g[k]),
        })
        .collect();
    let report = bootstrap_report(&inputs, cfg.eval.n_bootstrap, seed)?;

    create_dir(&args.output)?;
    write_text(
        &args.output.join("report.json"),
        &(report.to_json()? + "\n"),
    )?;
    write_text(
        &args.output.join("metrics.svg"),
        &plot::metric_bars(&report),
    )?;
    if let Some(grids) = &grids {
        let mut samples: Vec<(f32, bool)> = grids
            .iter()
            .zip(&pairs)
            .flat_map(|(g, (_, _, t))| g.values().iter().zip(t.bits()).map(|(&s, &b)| (s, b == 1)))
            .collect();
        let points = plot::roc_points(&mut samples, 0.002);
        write_text(
            &args.output.join("roc.svg"),
            &plot::roc(&points, report.auc.value),
        )?;
    }
    let show = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
    println!(
        "dice {} f1 {} auc {} accuracy {} sensitivity {} specificity {} ({} images)",
        show(report.dice.value),
        show(report.f1.value),
        show(report.auc.value),
        show(report.accuracy.value),
        show(report.sensitivity.value),
        show(report.specificity.value),
        report.n_images
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct AssocArgs {
    /// Analysis CSV: id,outcome,age,sex followed by metric columns
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving results.csv, screen.json and forest.svg
    #[arg(long)]
    pub output: PathBuf,
}

pub fn assoc(args: AssocArgs, cfg: &PipelineConfig) -> CliResult {
    require(&args.input, "input")?;
    let table = AnalysisTable::read_csv_file(&args.input)?;
    let unknown = table.unknown_metrics();
    if !unknown.is_empty() {
        eprintln!(
            "warning: {} column(s) are not catalog metrics: {}",
            unknown.len(),
            unknown.join(", ")
        );
    }
    let report = run_association(&table, &cfg.association)?;
    create_dir(&args.output)?;
    write_results_csv_file(&report.results, args.output.join("results.csv"))?;
    let screen = serde_json::json!({
        "n_rows": report.n_rows,
        "retained": report.retained,
        "dropped": report.dropped,
    });
    write_text(
        &args.output.join("screen.json"),
        &(serde_json::to_string_pretty(&screen).expect("json") + "\n"),
    )?;
    write_text(
        &args.output.join("forest.svg"),
        &plot::forest(&report.results),
    )?;
    let hits: Vec<_> = report.results.iter().filter(|r| r.significant).collect();
    println!(
        "{} metric(s) tested, {} dropped by screening, {} significant",
        report.results.len(),
        report.dropped.len(),
        hits.len()
    );
    for r in hits {
        println!("  {}: {}", r.metric, r.summary().unwrap_or_default());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Tree spec JSON; without it a clean random scene is drawn from --seed
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Bundle directory: image.png, mask.png, truth.json, spec.json
    #[arg(long)]
    pub output: PathBuf,
    /// Side of a random scene; the default draws 1024 px trees
    #[arg(long)]
    pub size: Option<usize>,
}

pub fn synth(args: SynthArgs, seed: u64) -> CliResult {
    let (spec, mask, image, truth) = match &args.input {
        Some(path) => {
            require(path, "spec")?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let spec: TreeSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let (mask, image, truth) = generate(&spec)?;
            (spec, mask, image, truth)
        }
        None => {
            let opts = match args.size {
                Some(n) if n < 32 => return Err(CliError::input("--size must be at least 32")),
                Some(n) => SceneOptions::small(n),
                None => SceneOptions::large(),
            };
            sample_clean_scene(seed, &opts)?
        }
    };
    write_bundle(&args.output, &mask, &image, &truth)?;
    write_text(
        &args.output.join("spec.json"),
        &(serde_json::to_string_pretty(&spec).expect("json") + "\n"),
    )?;
    println!(
        "{} segments, {} junctions, {} terminals -> {}",
        truth.segments.len(),
        truth.junction_count,
        truth.terminal_count,
        args.output.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Directory of PNG images to register
    #[arg(long)]
    pub input: PathBuf,
    /// New project directory
    #[arg(long)]
    pub output: PathBuf,
    /// Directory of reference masks with matching names
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Project identifier
    #[arg(long, default_value = "project")]
    pub id: String,
    /// External segmentation service URL used as the proposer
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Propose round 1 over every registered image
    #[arg(long)]
    pub start_round: bool,
}

pub fn init(args: InitArgs, cfg: &PipelineConfig) -> CliResult {
    let images = list_files(&args.input, "png")?;
    let mut ws = Workspace::create(
        &args.output,
        &args.id,
        cfg.loop_sim.project.clone(),
        cfg.backend(args.endpoint.as_deref()),
    )?;
    for (id, path) in &images {
        ws.register_image(
            id,
            &read_image(path)?,
            Some(path.display().to_string()),
            None,
            ViewType::Standard,
        )?;
        if let Some(dir) = &args.truth {
            let t = dir.join(format!("{id}.png"));
            if t.exists() {
                ws.register_truth(id, &read_mask(&t)?)?;
            }
        }
    }
    if args.start_round {
        let ids: Vec<String> = images.iter().map(|(id, _)| id.clone()).collect();
        ws.start_round(&ids)?;
    }
    println!(
        "project {} with {} image(s) at {}",
        args.id,
        images.len(),
        args.output.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Project directory
    #[arg(long)]
    pub input: PathBuf,
    /// Listen address
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

pub fn serve(args: ServeArgs) -> CliResult {
    require(&args.input, "project")?;
    let ws = Workspace::open(&args.input)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::internal(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .map_err(|e| CliError::internal(format!("{}: {e}", args.addr)))?;
        let local = listener
            .local_addr()
            .map_err(|e| CliError::internal(e.to_string()))?;
        println!("listening on http://{local}");
        use std::io::Write;
        let _ = std::io::stdout().flush();
        api::serve_on(ws, listener).await.map_err(CliError::from)
    })
}

#[derive(Debug, Args)]
pub struct LoopSimArgs {
    /// Directory receiving the project and loop_report.json
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Fresh synthetic images per round
    #[arg(long)]
    pub images: Option<usize>,
    /// Side of the square synthetic scenes
    #[arg(long)]
    pub size: Option<usize>,
    /// Share of the proposal/reference difference the simulated annotator fixes
    #[arg(long)]
    pub fidelity: Option<f64>,
    /// External segmentation service URL used as the proposer
    #[arg(long)]
    pub endpoint: Option<String>,
}

pub fn loop_sim(args: LoopSimArgs, cfg: &PipelineConfig, seed: u64) -> CliResult {
    let s = &cfg.loop_sim;
    let lc = LoopConfig {
        rounds: args.rounds.unwrap_or(s.rounds),
        images_per_round: args.images.unwrap_or(s.images_per_round),
        scene_size: args.size.unwrap_or(s.scene_size),
        fidelity: args.fidelity.unwrap_or(s.fidelity),
        seed,
        project: s.project.clone(),
        backend: cfg.backend(args.endpoint.as_deref()),
    };
    if lc.scene_size < 32 {
        return Err(CliError::input("--size must be at least 32"));
    }
    if !(0.0..=1.0).contains(&lc.fidelity) {
        return Err(CliError::input("--fidelity must lie in [0, 1]"));
    }
    let project = args.output.join("project");
    if project.exists() {
        return Err(CliError::input(format!(
            "{} already exists",
            project.display()
        )));
    }
    let reports = run_loop(&project, &lc)?;
    let out = serde_json::json!({ "config": lc, "rounds": reports });
    write_text(
        &args.output.join("loop_report.json"),
        &(serde_json::to_string_pretty(&out).expect("json") + "\n"),
    )?;
    println!("round  images  mean_dice  mean_pixels_changed  mean_active_s");
    for r in &reports {
        println!(
            "{:>5}  {:>6}  {:>9.4}  {:>19.2}  {:>13.1}",
            r.round,
            r.n_images,
            r.mean_dice_proposal_vs_corrected,
            r.mean_pixels_changed,
            r.mean_active_seconds
        );
    }
    Ok(())
}
