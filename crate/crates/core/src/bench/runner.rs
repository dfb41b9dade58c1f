//! Benchmark runner: baseline (raw events) against motion-compensated
//! decoding on one dataset.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{detection_rate, pose_error, FrameDecodes};
use super::scene::{Dataset, DatasetLayout};
use super::{formats, BenchError};
use crate::event::Micros;
use crate::pipeline::{frame_times, run_pipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompensateMode {
    Both,
    On,
    Off,
}

impl CompensateMode {
    /// Compensation flags to run, baseline first.
    pub fn flags(self) -> &'static [bool] {
        match self {
            CompensateMode::Both => &[false, true],
            CompensateMode::On => &[true],
            CompensateMode::Off => &[false],
        }
    }
}

pub fn mode_name(compensate: bool) -> &'static str {
    if compensate {
        "ours"
    } else {
        "baseline"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: Micros,
    pub n_events: usize,
    pub decoded_pixels: usize,
    pub detections: usize,
    /// Estimated warp parameters, when compensation ran.
    pub motion: Option<Vec<f64>>,
    /// Estimated camera center.
    pub position: Option<[f64; 3]>,
    pub pose_l1: Option<f64>,
    pub rms_px: Option<f64>,
    /// Why localization or compensation failed, if either did.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub sequence: String,
    /// `baseline` or `ours`.
    pub mode: String,
    pub detection_rate: f64,
    pub boxes_evaluated: usize,
    pub boxes_hit: usize,
    /// Over localized frames; absent when no frame localized.
    pub pose_mean_l1: Option<f64>,
    pub pose_median_l1: Option<f64>,
    pub frames_evaluated: usize,
    pub frames_localized: usize,
    pub frames: Vec<FrameRecord>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, BenchError> {
        let r: Self = serde_json::from_str(text)
            .map_err(|e| BenchError::Format { path: path.to_path_buf(), line: e.line(), msg: e.to_string() })?;
        if !(0.0..=1.0).contains(&r.detection_rate) || r.frames_localized > r.frames_evaluated {
            return Err(BenchError::schema(path, "inconsistent report"));
        }
        Ok(r)
    }

    pub fn read(path: &Path) -> Result<Self, BenchError> {
        Self::from_json(&formats::read_to_string(path)?, path)
    }

    /// `report_<sequence>_<mode>.json`
    pub fn file_name(&self) -> String {
        format!("report_{}_{}.json", self.sequence, self.mode)
    }
}

/// Runs the pipeline over a dataset once with the given compensation flag
/// and scores it. Frames cover the trajectory span on the scene's frame
/// grid, so every mode sees the same windows.
pub fn evaluate(data: &Dataset, compensate: bool) -> Result<BenchReport, BenchError> {
    let scene = &data.scene;
    let cfg = scene.pipeline_config(compensate).map_err(|m| BenchError::schema("scene.toml", m))?;
    let frames = frame_times(scene.trajectory.t0, scene.trajectory.t1, cfg.window_us, cfg.frame_rate_hz);
    let results = run_pipeline(&data.events, &data.markers, &data.calibration, &cfg, &frames)
        .map_err(|e| BenchError::Pipeline(e.to_string()))?;

    let decodes: Vec<FrameDecodes> =
        results.iter().map(|r| FrameDecodes { t: r.t, pixels: r.decoded_pixels().collect() }).collect();
    let tolerance = (0.5e6 / scene.sim.annotation_rate_hz).floor() as Micros;
    let dr = detection_rate(&decodes, &data.annotations, tolerance)?;

    let estimates: Vec<(Micros, nalgebra::Vector3<f64>)> =
        results.iter().filter_map(|r| r.pose().map(|p| (r.t, p.translation))).collect();
    let errors = if estimates.is_empty() { None } else { Some(pose_error(&estimates, &data.gt_poses)?) };

    let mut per_frame = errors.as_ref().map(|e| e.per_frame.iter()).into_iter().flatten();
    let mut records = Vec::with_capacity(results.len());
    for r in &results {
        let pose_l1 = match r.pose() {
            Some(_) => per_frame.next().map(|&(_, e)| e),
            None => None,
        };
        let failure = match (&r.localization, &r.motion_failure) {
            (_, Some(m)) => Some(format!("motion: {m}")),
            (Err(e), None) => Some(e.to_string()),
            (Ok(_), None) => None,
        };
        records.push(FrameRecord {
            t: r.t,
            n_events: r.n_events,
            decoded_pixels: r.decoded_pixels().count(),
            detections: r.detections.len(),
            motion: r.motion.as_ref().map(|m| m.as_slice().to_vec()),
            position: r.pose().map(|p| p.translation.into()),
            pose_l1,
            rms_px: r.localization.as_ref().ok().map(|s| s.rms_px),
            failure,
        });
    }
    records.sort_by_key(|f| f.t);
    Ok(BenchReport {
        sequence: scene.name.clone(),
        mode: mode_name(compensate).to_string(),
        detection_rate: dr.rate,
        boxes_evaluated: dr.boxes,
        boxes_hit: dr.hits,
        pose_mean_l1: errors.as_ref().map(|e| e.mean),
        pose_median_l1: errors.as_ref().map(|e| e.median),
        frames_evaluated: records.len(),
        frames_localized: estimates.len(),
        frames: records,
    })
}

/// Loads the dataset in `dir` and evaluates it in each requested mode,
/// baseline first.
pub fn run_benchmark(dir: &Path, mode: CompensateMode) -> Result<Vec<BenchReport>, BenchError> {
    let data = Dataset::read(&DatasetLayout::new(dir))?;
    mode.flags().iter().map(|&c| evaluate(&data, c)).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Reports sorted by sequence, then baseline before ours.
fn sorted(reports: &[BenchReport]) -> Vec<&BenchReport> {
    let mut r: Vec<&BenchReport> = reports.iter().collect();
    r.sort_by(|a, b| (&a.sequence, a.mode != "baseline").cmp(&(&b.sequence, b.mode != "baseline")));
    r
}

/// One row per report plus an unweighted mean row per mode.
pub fn comparison_csv(reports: &[BenchReport]) -> String {
    let mut s = String::from("sequence,mode,detection_rate,pose_mean_l1,pose_median_l1,frames_evaluated,frames_localized\n");
    for r in sorted(reports) {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.sequence,
            r.mode,
            r.detection_rate,
            opt(r.pose_mean_l1),
            opt(r.pose_median_l1),
            r.frames_evaluated,
            r.frames_localized
        )
        .unwrap();
    }
    s
}

/// Markdown table with baseline and ours side by side per sequence.
pub fn comparison_markdown(reports: &[BenchReport]) -> String {
    let mut s = String::from(
        "| Sequence | DR baseline | DR ours | Mean [m] baseline | Mean [m] ours | Median [m] baseline | Median [m] ours |\n\
         |---|---|---|---|---|---|---|\n",
    );
    let rows = sorted(reports);
    let mut names: Vec<&str> = rows.iter().map(|r| r.sequence.as_str()).collect();
    names.dedup();
    let find = |seq: &str, mode: &str| rows.iter().find(|r| r.sequence == seq && r.mode == mode).copied();
    let mut means: [Vec<f64>; 4] = Default::default();
    for name in &names {
        let (b, o) = (find(name, "baseline"), find(name, "ours"));
        let dr = |r: Option<&BenchReport>| r.map_or("-".into(), |r| format!("{:.3}", r.detection_rate));
        writeln!(
            s,
            "| {name} | {} | {} | {} | {} | {} | {} |",
            dr(b),
            dr(o),
            fmt_opt(b.and_then(|r| r.pose_mean_l1)),
            fmt_opt(o.and_then(|r| r.pose_mean_l1)),
            fmt_opt(b.and_then(|r| r.pose_median_l1)),
            fmt_opt(o.and_then(|r| r.pose_median_l1)),
        )
        .unwrap();
        for (i, r) in [b, o].into_iter().enumerate() {
            if let Some(r) = r {
                means[i].push(r.detection_rate);
                if let Some(m) = r.pose_mean_l1 {
                    means[2 + i].push(m);
                }
            }
        }
    }
    if names.len() > 1 {
        let avg = |v: &Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        writeln!(
            s,
            "| mean | {} | {} | {} | {} | | |",
            avg(&means[0]).map_or("-".into(), |x| format!("{x:.3}")),
            avg(&means[1]).map_or("-".into(), |x| format!("{x:.3}")),
            fmt_opt(avg(&means[2])),
            fmt_opt(avg(&means[3])),
        )
        .unwrap();
    }
    s
}
