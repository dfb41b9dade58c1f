//! Per-frame processing: optional motion compensation, per-pixel decoding,
//! clustering into detections and PnP localization.

mod detect;
mod pnp;

use std::collections::BTreeMap;

use nalgebra::{Point2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, Pose};
use crate::cmax::{estimate_motion_at, warp_events, CmaxConfig, CmaxError, MotionModel, WarpParams};
use crate::event::{EventStream, Micros};
use crate::protocol::{ProtocolConfig, ProtocolError};

pub use detect::{cluster_detections, decode_pixels, DecodedPixels, Detection};
pub use pnp::{solve_pnp_points, PnpError, PnpSolution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Cmax(#[from] CmaxError),
}

/// Marker ID to world position in meters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkerMap {
    pub markers: BTreeMap<u64, Vector3<f64>>,
}

impl MarkerMap {
    pub fn get(&self, id: u64) -> Option<&Vector3<f64>> {
        self.markers.get(&id)
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }
}

impl FromIterator<(u64, Vector3<f64>)> for MarkerMap {
    fn from_iter<I: IntoIterator<Item = (u64, Vector3<f64>)>>(iter: I) -> Self {
        Self { markers: iter.into_iter().collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub window_us: Micros,
    pub frame_rate_hz: f64,
    pub compensate: bool,
    pub model: MotionModel,
    pub protocol: ProtocolConfig,
    pub cmax: CmaxConfig,
    pub min_points_pnp: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_us: 25_000,
            frame_rate_hz: 40.0,
            compensate: false,
            model: MotionModel::Flow2,
            protocol: ProtocolConfig::default(),
            cmax: CmaxConfig::default(),
            min_points_pnp: 4,
        }
    }
}

impl PipelineConfig {
    /// Validated construction.
    pub fn new(window_us: Micros, compensate: bool, model: MotionModel) -> Result<Self, PipelineError> {
        let cfg = Self { window_us, compensate, model, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.protocol.validate()?;
        self.cmax.validate()?;
        let pattern = self.protocol.max_frame_period_us();
        if self.window_us < pattern {
            return Err(PipelineError::InvalidConfig(format!(
                "window of {} us is shorter than the longest pattern ({pattern} us)",
                self.window_us
            )));
        }
        if self.min_points_pnp < 4 {
            return Err(PipelineError::InvalidConfig("min_points_pnp must be at least 4".into()));
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(PipelineError::InvalidConfig("frame rate must be positive".into()));
        }
        Ok(())
    }
}

/// Pose from detections: one point per marker ID, taken from its largest
/// detection, matched against the marker map.
pub fn solve_pnp(
    detections: &[Detection],
    markers: &MarkerMap,
    k: &CameraIntrinsics,
    min_points: usize,
) -> Result<PnpSolution, PnpError> {
    let mut best: BTreeMap<u64, &Detection> = BTreeMap::new();
    for d in detections.iter().filter(|d| markers.get(d.id).is_some()) {
        let e = best.entry(d.id).or_insert(d);
        if d.pixel_count > e.pixel_count {
            *e = d;
        }
    }
    let world: Vec<Vector3<f64>> = best.keys().map(|id| markers.markers[id]).collect();
    let pixels: Vec<Point2<f64>> = best.values().map(|d| d.center).collect();
    solve_pnp_points(&world, &pixels, k, min_points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub t: Micros,
    pub n_events: usize,
    /// Estimated motion when compensation ran.
    pub motion: Option<WarpParams>,
    /// Why compensation fell back to raw events, if it did.
    pub motion_failure: Option<String>,
    pub decoded: DecodedPixels,
    pub detections: Vec<Detection>,
    pub localization: Result<PnpSolution, PnpError>,
}

impl FrameResult {
    pub fn pose(&self) -> Option<&Pose> {
        self.localization.as_ref().ok().map(|s| &s.pose)
    }

    /// `(x, y, id)` of every decoded pixel.
    pub fn decoded_pixels(&self) -> impl Iterator<Item = (u16, u16, u64)> + '_ {
        self.decoded
            .iter()
            .flat_map(|(&(x, y), ids)| ids.iter().map(move |d| (x, y, d.id)))
    }
}

/// Frame timestamps at `rate_hz`, starting once a full window is available.
pub fn frame_times(t_first: Micros, t_last: Micros, window_us: Micros, rate_hz: f64) -> Vec<Micros> {
    let start = t_first + window_us;
    crate::sim::ticks(start, t_last.max(start), rate_hz)
        .into_iter()
        .filter(|&t| t <= t_last)
        .collect()
}

/// Processes one frame ending at `t_frame`.
pub fn process_frame(
    events: &EventStream,
    markers: &MarkerMap,
    k: &CameraIntrinsics,
    cfg: &PipelineConfig,
    t_frame: Micros,
) -> FrameResult {
    let window = events.window(t_frame.saturating_sub(cfg.window_us), t_frame);
    let (mut motion, mut motion_failure, mut positions) = (None, None, None);
    if cfg.compensate {
        match estimate_motion_at(window, cfg.model, &cfg.cmax, k, t_frame) {
            Ok(est) => {
                positions = Some(warp_events(window, &est.params, t_frame, k).positions);
                motion = Some(est.params);
            }
            Err(e) => motion_failure = Some(e.to_string()),
        }
    }
    let decoded = decode_pixels(window, positions.as_deref(), k.width, k.height, &cfg.protocol);
    let detections = cluster_detections(&decoded, t_frame);
    let localization = solve_pnp(&detections, markers, k, cfg.min_points_pnp);
    FrameResult {
        t: t_frame,
        n_events: window.len(),
        motion,
        motion_failure,
        decoded,
        detections,
        localization,
    }
}

/// Runs every frame in `frames` (in parallel); results keep the order of
/// `frames`.
pub fn run_pipeline(
    events: &EventStream,
    markers: &MarkerMap,
    k: &CameraIntrinsics,
    cfg: &PipelineConfig,
    frames: &[Micros],
) -> Result<Vec<FrameResult>, PipelineError> {
    cfg.validate()?;
    k.validate().map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    if (events.width(), events.height()) != (k.width, k.height) {
        return Err(PipelineError::InvalidConfig(format!(
            "stream is {}x{} but calibration is {}x{}",
            events.width(),
            events.height(),
            k.width,
            k.height
        )));
    }
    Ok(frames
        .par_iter()
        .map(|&t| process_frame(events, markers, k, cfg, t))
        .collect())
}

#[cfg(test)]
mod tests;
