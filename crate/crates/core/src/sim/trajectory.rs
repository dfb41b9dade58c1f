//! Camera trajectories.

use nalgebra::Vector3;

use super::SimError;
use crate::camera::Pose;
use crate::event::Micros;
use crate::so3;

#[derive(Debug, Clone, PartialEq)]
pub struct Waypoint {
    pub t: Micros,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    Static,
    /// Constant world-frame linear velocity in m/s.
    Translation { velocity: Vector3<f64> },
    /// Constant world-frame angular velocity in rad/s, applied on the left:
    /// `R(t) = exp(w (t - t0)) R0`. The camera center stays fixed.
    Rotation { angular_velocity: Vector3<f64> },
    /// Linear translation and slerp rotation between timed poses. The
    /// start pose is ignored.
    Waypoints(Vec<Waypoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub start: Pose,
    pub motion: Motion,
    pub t0: Micros,
    pub t1: Micros,
}

impl TrajectorySpec {
    pub fn new(start: Pose, motion: Motion, t0: Micros, t1: Micros) -> Result<Self, SimError> {
        let spec = Self {
            start,
            motion,
            t0,
            t1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.t0 >= self.t1 {
            return Err(SimError::InvalidTrajectory(format!(
                "t0 ({}) must precede t1 ({})",
                self.t0, self.t1
            )));
        }
        if let Motion::Waypoints(wps) = &self.motion {
            if wps.is_empty() {
                return Err(SimError::InvalidTrajectory("no waypoints".into()));
            }
            if wps.windows(2).any(|w| w[0].t >= w[1].t) {
                return Err(SimError::InvalidTrajectory(
                    "waypoint times must be strictly increasing".into(),
                ));
            }
            let (first, last) = (wps[0].t, wps[wps.len() - 1].t);
            if self.t0 < first || self.t1 > last {
                return Err(SimError::InvalidTrajectory(format!(
                    "[{}, {}] not covered by waypoints [{first}, {last}]",
                    self.t0, self.t1
                )));
            }
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        (self.t1 - self.t0) as f64 * 1e-6
    }
}

/// Camera pose at time `t`, which must lie in `[t0, t1]`.
pub fn sample_trajectory(spec: &TrajectorySpec, t: Micros) -> Result<Pose, SimError> {
    if t < spec.t0 || t > spec.t1 {
        return Err(SimError::TimeOutOfRange {
            t,
            t0: spec.t0,
            t1: spec.t1,
        });
    }
    let dt = (t - spec.t0) as f64 * 1e-6;
    let pose = match &spec.motion {
        Motion::Static => spec.start,
        Motion::Translation { velocity } => Pose {
            rotation: spec.start.rotation,
            translation: spec.start.translation + velocity * dt,
        },
        Motion::Rotation { angular_velocity } => Pose {
            rotation: so3::rotation_exp(&(angular_velocity * dt)) * spec.start.rotation,
            translation: spec.start.translation,
        },
        Motion::Waypoints(wps) => interpolate_waypoints(wps, t),
    };
    Ok(pose)
}

fn interpolate_waypoints(wps: &[Waypoint], t: Micros) -> Pose {
    let i = wps.partition_point(|w| w.t <= t);
    if i == 0 {
        return wps[0].pose;
    }
    if i == wps.len() {
        return wps[wps.len() - 1].pose;
    }
    let (a, b) = (&wps[i - 1], &wps[i]);
    if t == a.t {
        return a.pose;
    }
    let s = (t - a.t) as f64 / (b.t - a.t) as f64;
    Pose {
        rotation: so3::slerp(&a.pose.rotation, &b.pose.rotation, s),
        translation: a.pose.translation.lerp(&b.pose.translation, s),
    }
}
