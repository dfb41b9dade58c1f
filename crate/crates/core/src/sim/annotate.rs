use serde::{Deserialize, Serialize};

use super::{marker_pixels, sample_trajectory, ticks, LedMarker, SimConfig, SimError, TrajectorySpec};
use crate::camera::Pose;
use crate::event::Micros;

/// Axis-aligned pixel box with inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: u16,
    pub y_min: u16,
    pub x_max: u16,
    pub y_max: u16,
}

impl BBox {
    pub fn contains(&self, x: u16, y: u16) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    /// Smallest box around a non-empty pixel set.
    pub fn around(pixels: &[(u16, u16)]) -> Option<Self> {
        let (&(x0, y0), rest) = pixels.split_first()?;
        let mut b = BBox { x_min: x0, y_min: y0, x_max: x0, y_max: y0 };
        for &(x, y) in rest {
            b.x_min = b.x_min.min(x);
            b.y_min = b.y_min.min(y);
            b.x_max = b.x_max.max(x);
            b.y_max = b.y_max.max(y);
        }
        Some(b)
    }

    /// Grows the box by `m` pixels on every side, clamped to the sensor.
    pub fn expand(self, m: u16, width: u16, height: u16) -> Self {
        BBox {
            x_min: self.x_min.saturating_sub(m),
            y_min: self.y_min.saturating_sub(m),
            x_max: self.x_max.saturating_add(m).min(width - 1),
            y_max: self.y_max.saturating_add(m).min(height - 1),
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (f64::from(self.x_min) + f64::from(self.x_max)) / 2.0,
            (f64::from(self.y_min) + f64::from(self.y_max)) / 2.0,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub t: Micros,
    pub id: u64,
    pub bbox: BBox,
}

/// Boxes of every visible marker at each annotation tick: the extent of the
/// projected disk pixels plus a 1 px margin.
pub fn make_annotations(
    markers: &[LedMarker],
    spec: &TrajectorySpec,
    cfg: &SimConfig,
) -> Result<Vec<Annotation>, SimError> {
    cfg.validate()?;
    spec.validate()?;
    let k = &cfg.intrinsics;
    let mut out = Vec::new();
    for t in ticks(spec.t0, spec.t1, cfg.annotation_rate_hz) {
        let pose = sample_trajectory(spec, t)?;
        for m in markers {
            if let Some(px) = marker_pixels(m, &pose, k) {
                let bbox = BBox::around(&px).expect("non-empty").expand(1, k.width, k.height);
                out.push(Annotation { t, id: m.id, bbox });
            }
        }
    }
    Ok(out)
}

/// Ground-truth camera poses sampled at `gt_pose_rate_hz`.
pub fn export_ground_truth(spec: &TrajectorySpec, cfg: &SimConfig) -> Result<Vec<(Micros, Pose)>, SimError> {
    spec.validate()?;
    if !(cfg.gt_pose_rate_hz.is_finite() && cfg.gt_pose_rate_hz > 0.0) {
        return Err(SimError::InvalidConfig("rates must be positive".into()));
    }
    ticks(spec.t0, spec.t1, cfg.gt_pose_rate_hz)
        .into_iter()
        .map(|t| Ok((t, sample_trajectory(spec, t)?)))
        .collect()
}
