//! Contrast maximization: warp events to a reference time under a motion
//! hypothesis, accumulate them into an image of warped events (IWE) and
//! search for the motion that makes that image sharpest.

mod iwe;
mod newton;
mod objective;
mod warp;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraIntrinsics;
use crate::event::{Event, Micros};

pub use iwe::{build_iwe, contrast, Iwe};
pub use objective::Objective;
pub use warp::{warp_events, warp_flow, warp_rotation, Warped};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmaxError {
    #[error("insufficient events: need at least 2, got {0}")]
    InsufficientEvents(usize),
    #[error("invalid motion config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionModel {
    /// Constant image velocity in px/s.
    Flow2,
    /// Constant camera angular velocity in rad/s.
    Rot3,
}

impl MotionModel {
    pub fn dim(self) -> usize {
        match self {
            MotionModel::Flow2 => 2,
            MotionModel::Rot3 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarpParams {
    Flow(Vector2<f64>),
    Rotation(Vector3<f64>),
}

impl WarpParams {
    pub fn zero(model: MotionModel) -> Self {
        match model {
            MotionModel::Flow2 => WarpParams::Flow(Vector2::zeros()),
            MotionModel::Rot3 => WarpParams::Rotation(Vector3::zeros()),
        }
    }

    pub fn model(&self) -> MotionModel {
        match self {
            WarpParams::Flow(_) => MotionModel::Flow2,
            WarpParams::Rotation(_) => MotionModel::Rot3,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        match self {
            WarpParams::Flow(v) => v.as_slice(),
            WarpParams::Rotation(w) => w.as_slice(),
        }
    }

    /// Panics if `values` does not have the model's dimension.
    pub fn from_slice(model: MotionModel, values: &[f64]) -> Self {
        assert_eq!(values.len(), model.dim(), "parameter count for {model:?}");
        match model {
            MotionModel::Flow2 => WarpParams::Flow(Vector2::from_column_slice(values)),
            MotionModel::Rot3 => WarpParams::Rotation(Vector3::from_column_slice(values)),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }
}

/// Which instant of the event window the events are warped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TRefPolicy {
    WindowStart,
    WindowEnd,
    Midpoint,
}

impl TRefPolicy {
    /// Reference time for a time-sorted, non-empty window.
    pub fn resolve(self, events: &[Event]) -> Option<Micros> {
        let (first, last) = (events.first()?.t, events.last()?.t);
        Some(match self {
            TRefPolicy::WindowStart => first,
            TRefPolicy::WindowEnd => last,
            TRefPolicy::Midpoint => first + (last - first) / 2,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaxConfig {
    pub max_iters: usize,
    /// Stop once the parameter update norm falls below this.
    pub step_tol: f64,
    pub t_ref: TRefPolicy,
    pub epsilon_px: f64,
    pub truncation_px: u32,
    /// Starting point; zero motion when absent.
    pub initial: Option<WarpParams>,
    /// Seed the optimizer from the best point of a coarse 3^n grid around
    /// the initial guess.
    pub multi_start: bool,
    /// Grid spacing expressed as displacement over the window, in pixels.
    pub grid_step_px: f64,
}

impl Default for CmaxConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            step_tol: 1e-6,
            t_ref: TRefPolicy::WindowEnd,
            epsilon_px: 1.0,
            truncation_px: 3,
            initial: None,
            multi_start: false,
            grid_step_px: 8.0,
        }
    }
}

impl CmaxConfig {
    pub fn validate(&self) -> Result<(), CmaxError> {
        let bad = |m: &str| Err(CmaxError::InvalidConfig(m.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.step_tol.is_finite() && self.step_tol >= 0.0) {
            return bad("step_tol must be non-negative");
        }
        if !(self.epsilon_px.is_finite() && self.epsilon_px > 0.0) {
            return bad("epsilon_px must be positive");
        }
        if self.truncation_px < 1 {
            return bad("truncation radius must be at least 1 px");
        }
        if !(self.grid_step_px.is_finite() && self.grid_step_px > 0.0) {
            return bad("grid_step_px must be positive");
        }
        if self.initial.is_some_and(|p| !p.is_finite()) {
            return bad("initial guess must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionEstimate {
    pub params: WarpParams,
    /// IWE variance at `params`.
    pub contrast: f64,
    pub iterations: usize,
    pub t_ref: Micros,
}

/// Variance of the IWE of `events` warped with `params` to the configured
/// reference time.
pub fn contrast_of(events: &[Event], params: &WarpParams, cfg: &CmaxConfig, k: &CameraIntrinsics) -> f64 {
    let Some(t_ref) = cfg.t_ref.resolve(events) else {
        return 0.0;
    };
    Objective::new(events, params.model(), k, t_ref, cfg).value(params.as_slice())
}

/// Analytic gradient of the IWE variance with respect to the warp
/// parameters, in the parameters' own units.
pub fn objective_gradient(
    events: &[Event],
    params: &WarpParams,
    cfg: &CmaxConfig,
    k: &CameraIntrinsics,
) -> Vec<f64> {
    let Some(t_ref) = cfg.t_ref.resolve(events) else {
        return vec![0.0; params.model().dim()];
    };
    Objective::new(events, params.model(), k, t_ref, cfg)
        .value_and_gradient(params.as_slice())
        .1
}

/// Motion maximizing the IWE variance, with `t_ref` taken from the config.
pub fn estimate_motion(
    events: &[Event],
    model: MotionModel,
    cfg: &CmaxConfig,
    k: &CameraIntrinsics,
) -> Result<MotionEstimate, CmaxError> {
    let t_ref = cfg.t_ref.resolve(events).ok_or(CmaxError::InsufficientEvents(0))?;
    estimate_motion_at(events, model, cfg, k, t_ref)
}

/// As [`estimate_motion`] with an explicit reference time.
pub fn estimate_motion_at(
    events: &[Event],
    model: MotionModel,
    cfg: &CmaxConfig,
    k: &CameraIntrinsics,
    t_ref: Micros,
) -> Result<MotionEstimate, CmaxError> {
    cfg.validate()?;
    if events.len() < 2 {
        return Err(CmaxError::InsufficientEvents(events.len()));
    }
    let init = match cfg.initial {
        Some(p) if p.model() != model => {
            return Err(CmaxError::InvalidConfig("initial guess has the wrong motion model".into()))
        }
        Some(p) => p,
        None => WarpParams::zero(model),
    };
    let mut obj = Objective::new(events, model, k, t_ref, cfg);
    let mut x0 = init.as_slice().to_vec();
    if cfg.multi_start {
        x0 = grid_start(&mut obj, &x0, cfg.grid_step_px);
    }
    let fd_scale = obj.pixel_scale();
    let result = newton::minimize(
        |x| {
            let (f, g) = obj.value_and_gradient(x);
            (-f, g.into_iter().map(|v| -v).collect())
        },
        &x0,
        &newton::Settings {
            max_iters: cfg.max_iters,
            step_tol: cfg.step_tol,
            fd_scale,
        },
    );
    Ok(MotionEstimate {
        params: WarpParams::from_slice(model, &result.x),
        contrast: -result.f,
        iterations: result.iterations,
        t_ref,
    })
}

/// Best point of the 3^n grid around `center`, spaced so that neighbours
/// differ by `step_px` of displacement at the oldest event.
fn grid_start(obj: &mut Objective, center: &[f64], step_px: f64) -> Vec<f64> {
    let step = step_px / obj.pixel_scale().max(f64::MIN_POSITIVE);
    let n = center.len();
    let mut best = (obj.value(center), center.to_vec());
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        let x: Vec<f64> = center
            .iter()
            .map(|&v| {
                let o = (c % 3) as f64 - 1.0;
                c /= 3;
                v + o * step
            })
            .collect();
        let f = obj.value(&x);
        if f > best.0 {
            best = (f, x);
        }
    }
    best.1
}
