//! Deterministic event-camera simulation of blinking LED markers and moving
//! scene edges, plus ground truth and bounding-box annotations.
//!
//! All randomness comes from ChaCha streams derived from `SimConfig::seed`
//! and a fixed per-task stream id, so serial and parallel generation give
//! bit-identical output.

mod annotate;
mod edges;
mod led;
mod noise;
pub mod planted;
pub mod trajectory;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, Pose};
use crate::event::Micros;
use crate::protocol::{ProtocolConfig, ProtocolError};

pub use annotate::{export_ground_truth, make_annotations, Annotation, BBox};
pub use edges::simulate_edge_events;
pub use led::simulate_led_events;
pub use noise::inject_noise;
pub use trajectory::{sample_trajectory, Motion, TrajectorySpec, Waypoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("time {t} outside trajectory range [{t0}, {t1}]")]
    TimeOutOfRange { t: Micros, t0: Micros, t1: Micros },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Event-camera sensitivity preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensitivity {
    /// Tuned for LEDs only: scene edges produce no events.
    Low,
    Medium,
    High,
}

impl Sensitivity {
    /// Contrast threshold C in log-intensity units.
    pub fn contrast_threshold(self) -> f64 {
        match self {
            Sensitivity::Low | Sensitivity::Medium => 0.4,
            Sensitivity::High => 0.2,
        }
    }

    pub fn edge_events(self) -> bool {
        self != Sensitivity::Low
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedMarker {
    pub id: u64,
    pub position: Vector3<f64>,
    pub radius_m: f64,
    pub phase_us: Micros,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSegment {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    /// Log-intensity step height.
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub intrinsics: CameraIntrinsics,
    pub sensitivity: Sensitivity,
    pub contrast_threshold: f64,
    pub render_step_us: Micros,
    /// Background events per pixel per second.
    pub noise_rate_hz: f64,
    /// Half-width of the uniform jitter applied to LED event timestamps.
    pub jitter_us: Micros,
    /// Extra events per LED transition and pixel.
    pub dup_events: u32,
    pub seed: u64,
    pub frame_rate_hz: f64,
    pub annotation_rate_hz: f64,
    pub gt_pose_rate_hz: f64,
    pub protocol: ProtocolConfig,
}

impl SimConfig {
    pub fn new(intrinsics: CameraIntrinsics, sensitivity: Sensitivity) -> Self {
        Self {
            intrinsics,
            sensitivity,
            contrast_threshold: sensitivity.contrast_threshold(),
            render_step_us: 100,
            noise_rate_hz: 0.0,
            jitter_us: 0,
            dup_events: 0,
            seed: 0,
            frame_rate_hz: 40.0,
            annotation_rate_hz: 120.0,
            gt_pose_rate_hz: 100.0,
            protocol: ProtocolConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        self.intrinsics
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        self.protocol.validate()?;
        if !(self.contrast_threshold.is_finite() && self.contrast_threshold > 0.0) {
            return bad("contrast threshold must be positive");
        }
        if self.render_step_us == 0 {
            return bad("render step must be at least 1 us");
        }
        if !(self.noise_rate_hz.is_finite() && self.noise_rate_hz >= 0.0) {
            return bad("noise rate must be non-negative");
        }
        for r in [self.frame_rate_hz, self.annotation_rate_hz, self.gt_pose_rate_hz] {
            if !(r.is_finite() && r > 0.0) {
                return bad("rates must be positive");
            }
        }
        Ok(())
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Stream ids for the independent random sub-tasks.
pub(crate) mod streams {
    pub const NOISE: u64 = 1;
    pub const LED_BASE: u64 = 1 << 32;
}

/// Sample times `t0 + round(k * 1e6 / rate)` within `[t0, t1]`.
pub fn ticks(t0: Micros, t1: Micros, rate_hz: f64) -> Vec<Micros> {
    let period = 1e6 / rate_hz;
    (0..)
        .map(|k| t0 + (k as f64 * period).round() as Micros)
        .take_while(|&t| t <= t1)
        .collect()
}

/// Pixels whose centers fall inside the projected disk of a marker, or the
/// nearest pixel when the disk is smaller than one pixel. `None` when the
/// marker is behind the camera or fully outside the sensor.
pub fn marker_pixels(
    marker: &LedMarker,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Option<Vec<(u16, u16)>> {
    let pc = pose.world_to_camera(&marker.position);
    let center = k.project_camera(&pc)?;
    let r = k.fx * marker.radius_m / pc.z;
    let (w, h) = (f64::from(k.width), f64::from(k.height));
    let x_lo = (center.x - r).ceil().max(0.0);
    let x_hi = (center.x + r).floor().min(w - 1.0);
    let y_lo = (center.y - r).ceil().max(0.0);
    let y_hi = (center.y + r).floor().min(h - 1.0);
    let mut px = Vec::new();
    if x_lo <= x_hi && y_lo <= y_hi {
        for y in y_lo as u16..=y_hi as u16 {
            for x in x_lo as u16..=x_hi as u16 {
                let (dx, dy) = (f64::from(x) - center.x, f64::from(y) - center.y);
                if dx * dx + dy * dy <= r * r {
                    px.push((x, y));
                }
            }
        }
    }
    if px.is_empty() {
        let (x, y) = (center.x.round(), center.y.round());
        if x >= 0.0 && y >= 0.0 && x < w && y < h {
            px.push((x as u16, y as u16));
        }
    }
    (!px.is_empty()).then_some(px)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_grid() {
        assert_eq!(ticks(0, 100_000, 40.0), vec![0, 25_000, 50_000, 75_000, 100_000]);
        let a = ticks(1000, 26_000, 120.0);
        assert_eq!(a, vec![1000, 9333, 17_667, 26_000]);
    }

    #[test]
    fn presets() {
        assert!(!Sensitivity::Low.edge_events());
        assert_eq!(Sensitivity::Medium.contrast_threshold(), 0.4);
        assert_eq!(Sensitivity::High.contrast_threshold(), 0.2);
    }

    #[test]
    fn marker_disk_pixels() {
        let k = CameraIntrinsics::new(1000.0, 1000.0, 640.0, 360.0, 1280, 720).unwrap();
        let m = LedMarker {
            id: 1,
            position: Vector3::new(0.0, 0.0, 2.0),
            radius_m: 0.006, // 3 px at 2 m
            phase_us: 0,
        };
        let px = marker_pixels(&m, &Pose::identity(), &k).unwrap();
        // lattice points with x^2 + y^2 <= 9
        assert_eq!(px.len(), 29);
        let tiny = LedMarker { radius_m: 1e-6, ..m.clone() };
        assert_eq!(marker_pixels(&tiny, &Pose::identity(), &k).unwrap(), vec![(640, 360)]);
        let behind = LedMarker { position: Vector3::new(0.0, 0.0, -2.0), ..m };
        assert!(marker_pixels(&behind, &Pose::identity(), &k).is_none());
    }
}
