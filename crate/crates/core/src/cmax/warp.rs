use nalgebra::{Point2, Vector2, Vector3};

use super::WarpParams;
use crate::camera::CameraIntrinsics;
use crate::event::{Event, Micros};
use crate::so3;

/// Warped event positions. `None` marks events the warp could not map
/// (rotated behind the camera).
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub positions: Vec<Option<Point2<f64>>>,
    pub dropped: usize,
}

impl Warped {
    pub fn kept(&self) -> Vec<Point2<f64>> {
        self.positions.iter().flatten().copied().collect()
    }
}

/// `t_ref - t` in seconds.
pub(crate) fn dt_s(t_ref: Micros, t: Micros) -> f64 {
    (t_ref as i64 - t as i64) as f64 * 1e-6
}

/// `x' = x + (t_ref - t) v`.
pub fn warp_flow(events: &[Event], v: &Vector2<f64>, t_ref: Micros) -> Vec<Point2<f64>> {
    events
        .iter()
        .map(|e| Point2::new(f64::from(e.x), f64::from(e.y)) + v * dt_s(t_ref, e.t))
        .collect()
}

/// Rotates each event's bearing by `exp((t_ref - t) omega)` and re-projects.
pub fn warp_rotation(events: &[Event], omega: &Vector3<f64>, t_ref: Micros, k: &CameraIntrinsics) -> Warped {
    let positions: Vec<_> = events
        .iter()
        .map(|e| {
            let xh = k.unproject(f64::from(e.x), f64::from(e.y));
            let r = so3::rotation_exp(&(omega * dt_s(t_ref, e.t)));
            k.project_camera(&(r * xh))
        })
        .collect();
    let dropped = positions.iter().filter(|p| p.is_none()).count();
    Warped { positions, dropped }
}

pub fn warp_events(events: &[Event], params: &WarpParams, t_ref: Micros, k: &CameraIntrinsics) -> Warped {
    match params {
        WarpParams::Flow(v) => Warped {
            positions: warp_flow(events, v, t_ref).into_iter().map(Some).collect(),
            dropped: 0,
        },
        WarpParams::Rotation(w) => warp_rotation(events, w, t_ref, k),
    }
}
