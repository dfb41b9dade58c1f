//! `evlc`: simulate datasets, decode LED markers, estimate motion, localize
//! and benchmark.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or schema error, 3 pipeline
//! failure.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use evlc_core::bench::{
    self, comparison_csv, comparison_markdown, formats, plot_reports, run_benchmark, simulate_scene, BenchError,
    BenchReport, CompensateMode, DatasetLayout, SceneConfig,
};
use evlc_core::cmax::{estimate_motion_at, MotionModel};
use evlc_core::pipeline::{frame_times, run_pipeline, solve_pnp, Detection, PipelineConfig};
use evlc_core::{CameraIntrinsics, EventStream};

#[derive(Parser, Debug)]
#[command(name = "evlc", version, about = "Event-camera LED marker decoding and localization")]
struct Cli {
    /// Random seed for simulation (overrides the scene's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scene TOML for `simulate`; pipeline TOML for the other commands.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, depending on the command. Tables go to
    /// stdout when a file output is omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scene config to a dataset directory (requires --output).
    Simulate {
        /// Built-in scene used when --config is absent.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SceneConfig::PRESETS))]
        preset: Option<String>,
    },
    /// Events to detections CSV.
    Decode {
        #[arg(long)]
        events: PathBuf,
        /// Needed with --compensate.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        compensate: bool,
        #[arg(long, value_enum)]
        model: Option<Model>,
    },
    /// Events to per-window warp parameters CSV.
    EstimateMotion {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long, value_enum)]
        model: Option<Model>,
    },
    /// Detections and marker map to camera poses CSV.
    Localize {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        markers: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
    },
    /// Dataset directory to reports and comparison tables (written to
    /// --output, default `<dataset>/results`).
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        compensate: Mode,
    },
    /// Report JSON files to an SVG chart.
    Plot {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    Flow2,
    Rot3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Both,
    On,
    Off,
}

enum Failure {
    Usage(String),
    Bench(BenchError),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure::Bench(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Bench(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Simulate { preset } => simulate(&cli, preset.as_deref()),
        Command::Decode { events, calibration, compensate, model } => {
            decode(&cli, events, calibration.as_deref(), *compensate, *model)
        }
        Command::EstimateMotion { events, calibration, model } => estimate(&cli, events, calibration, *model),
        Command::Localize { detections, markers, calibration } => localize(&cli, detections, markers, calibration),
        Command::Bench { dataset, compensate } => bench_cmd(&cli, dataset, *compensate),
        Command::Plot { reports } => plot(&cli, reports),
    }
}

fn simulate(cli: &Cli, preset: Option<&str>) -> Result<(), Failure> {
    let out = cli.output.as_ref().ok_or_else(|| Failure::Usage("simulate needs --output <dir>".into()))?;
    let mut scene = match (&cli.config, preset) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give either --config or --preset".into())),
        (Some(path), None) => SceneConfig::from_toml(&formats::read_to_string(path)?, path)?,
        (None, Some(name)) => SceneConfig::preset(name).expect("validated by clap"),
        (None, None) => return Err(Failure::Usage("simulate needs --config <scene.toml> or --preset".into())),
    };
    if let Some(seed) = cli.seed {
        scene.sim.seed = seed;
    }
    let data = simulate_scene(&scene)?;
    data.write(&DatasetLayout::new(out))?;
    eprintln!(
        "wrote {} events, {} annotations, {} poses to {}",
        data.events.len(),
        data.annotations.len(),
        data.gt_poses.len(),
        out.display()
    );
    Ok(())
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let Some(path) = &cli.config else {
        return Ok(PipelineConfig::default());
    };
    let cfg: PipelineConfig = toml::from_str(&formats::read_to_string(path)?)
        .map_err(|e| BenchError::Schema { path: path.clone(), msg: e.to_string().trim_end().to_string() })?;
    cfg.validate().map_err(|e| BenchError::Schema { path: path.clone(), msg: e.to_string() })?;
    Ok(cfg)
}

fn model_of(m: Option<Model>, default: MotionModel) -> MotionModel {
    match m {
        Some(Model::Flow2) => MotionModel::Flow2,
        Some(Model::Rot3) => MotionModel::Rot3,
        None => default,
    }
}

fn frames_of(events: &EventStream, cfg: &PipelineConfig) -> Vec<u64> {
    match (events.events().first(), events.events().last()) {
        (Some(a), Some(b)) => frame_times(a.t, b.t, cfg.window_us, cfg.frame_rate_hz),
        _ => Vec::new(),
    }
}

/// Writes to `--output` or stdout.
fn emit(cli: &Cli, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), Failure> {
    match &cli.output {
        Some(path) => formats::write_with(path, |w| f(w))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(|e| BenchError::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn check_sensor(events: &EventStream, k: &CameraIntrinsics, path: &Path) -> Result<(), Failure> {
    if (events.width(), events.height()) != (k.width, k.height) {
        return Err(BenchError::Schema {
            path: path.to_path_buf(),
            msg: format!("calibration is {}x{} but events are {}x{}", k.width, k.height, events.width(), events.height()),
        }
        .into());
    }
    Ok(())
}

fn decode(
    cli: &Cli,
    events_path: &Path,
    calibration: Option<&Path>,
    compensate: bool,
    model: Option<Model>,
) -> Result<(), Failure> {
    let mut cfg = pipeline_config(cli)?;
    cfg.compensate = compensate;
    cfg.model = model_of(model, cfg.model);
    let events = formats::read_events(events_path)?;
    let k = match calibration {
        Some(path) => {
            let k = formats::read_calibration(path)?;
            check_sensor(&events, &k, path)?;
            k
        }
        None if compensate => return Err(Failure::Usage("--compensate needs --calibration".into())),
        // decoding alone only uses the sensor size
        None => {
            let (w, h) = (f64::from(events.width()), f64::from(events.height()));
            CameraIntrinsics::new(w, w, w / 2.0, h / 2.0, events.width(), events.height())
                .map_err(|e| BenchError::Pipeline(e.to_string()))?
        }
    };
    let frames = frames_of(&events, &cfg);
    let no_markers = Default::default();
    let results =
        run_pipeline(&events, &no_markers, &k, &cfg, &frames).map_err(|e| BenchError::Pipeline(e.to_string()))?;
    let detections: Vec<Detection> = results.into_iter().flat_map(|r| r.detections).collect();
    emit(cli, |w| formats::write_detections(w, &detections))
}

fn estimate(cli: &Cli, events_path: &Path, calibration: &Path, model: Option<Model>) -> Result<(), Failure> {
    let cfg = pipeline_config(cli)?;
    let model = model_of(model, cfg.model);
    let events = formats::read_events(events_path)?;
    let k = formats::read_calibration(calibration)?;
    check_sensor(&events, &k, calibration)?;
    let mut rows = Vec::new();
    for t in frames_of(&events, &cfg) {
        let window = events.window(t.saturating_sub(cfg.window_us), t);
        match estimate_motion_at(window, model, &cfg.cmax, &k, t) {
            Ok(est) => rows.push((t, est)),
            Err(e) => eprintln!("t = {t} us: {e}"),
        }
    }
    let name = match model {
        MotionModel::Flow2 => "flow2",
        MotionModel::Rot3 => "rot3",
    };
    emit(cli, |w| {
        writeln!(w, "t_us,model,p0,p1,p2,contrast,iterations")?;
        for (t, est) in &rows {
            let p = est.params.as_slice();
            let p2 = p.get(2).map_or(String::new(), |v| v.to_string());
            writeln!(w, "{t},{name},{},{},{p2},{},{}", p[0], p[1], est.contrast, est.iterations)?;
        }
        Ok(())
    })
}

fn localize(cli: &Cli, detections: &Path, markers: &Path, calibration: &Path) -> Result<(), Failure> {
    let cfg = pipeline_config(cli)?;
    let dets = formats::read_with(detections, formats::read_detections)?;
    let markers = formats::read_markers(markers)?;
    let k = formats::read_calibration(calibration)?;
    let mut frames: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        frames.entry(d.t).or_default().push(d);
    }
    let mut poses = Vec::new();
    for (t, ds) in &frames {
        match solve_pnp(ds, &markers, &k, cfg.min_points_pnp) {
            Ok(s) => poses.push((*t, s.pose)),
            Err(e) => eprintln!("t = {t} us: {e}"),
        }
    }
    emit(cli, |w| formats::write_poses(w, &poses))
}

fn bench_cmd(cli: &Cli, dataset: &Path, mode: Mode) -> Result<(), Failure> {
    let mode = match mode {
        Mode::Both => CompensateMode::Both,
        Mode::On => CompensateMode::On,
        Mode::Off => CompensateMode::Off,
    };
    let reports = match &cli.config {
        None => run_benchmark(dataset, mode)?,
        Some(_) => {
            let cfg = pipeline_config(cli)?;
            let mut data = bench::Dataset::read(&DatasetLayout::new(dataset))?;
            data.scene.protocol = cfg.protocol;
            data.scene.pipeline = bench::PipelineSection {
                window_us: cfg.window_us,
                frame_rate_hz: cfg.frame_rate_hz,
                model: cfg.model,
                min_points_pnp: cfg.min_points_pnp,
                cmax: cfg.cmax,
            };
            mode.flags().iter().map(|&c| bench::evaluate(&data, c)).collect::<Result<_, _>>()?
        }
    };
    let out = cli.output.clone().unwrap_or_else(|| dataset.join("results"));
    std::fs::create_dir_all(&out).map_err(|e| BenchError::io(&out, e))?;
    for r in &reports {
        formats::write_text(&out.join(r.file_name()), &r.to_json())?;
        if r.pose_mean_l1.is_none() {
            eprintln!("{} {}: no frame localized", r.sequence, r.mode);
        }
    }
    formats::write_text(&out.join("comparison.csv"), &comparison_csv(&reports))?;
    let md = comparison_markdown(&reports);
    formats::write_text(&out.join("comparison.md"), &md)?;
    print!("{md}");
    Ok(())
}

fn plot(cli: &Cli, paths: &[PathBuf]) -> Result<(), Failure> {
    let reports = paths.iter().map(|p| BenchReport::read(p)).collect::<Result<Vec<_>, _>>()?;
    let svg = plot_reports(&reports);
    emit(cli, |w| w.write_all(svg.as_bytes()))
}
