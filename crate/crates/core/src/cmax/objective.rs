use nalgebra::{Matrix2x3, Matrix3, Point2, Vector2, Vector3};

use super::iwe::{Kernel, Tap};
use super::warp::dt_s;
use super::{CmaxConfig, MotionModel};
use crate::camera::{CameraIntrinsics, MIN_DEPTH};
use crate::event::{Event, Micros};
use crate::so3;

/// IWE variance as a function of the warp parameters, with its analytic
/// gradient. Holds scratch buffers so repeated evaluations do not allocate
/// a full frame each time.
pub struct Objective<'a> {
    events: &'a [Event],
    model: MotionModel,
    k: CameraIntrinsics,
    kernel: Kernel,
    dts: Vec<f64>,
    grid: Vec<f64>,
    touched: Vec<usize>,
    /// `seen[i]` iff `i` is in `touched`. Values alone cannot tell: a tap
    /// at the rim of the fade can weigh exactly zero.
    seen: Vec<bool>,
    taps: Vec<Tap>,
    warped: Vec<Option<(Point2<f64>, Matrix2x3<f64>)>>,
    dropped: usize,
}

impl<'a> Objective<'a> {
    pub fn new(
        events: &'a [Event],
        model: MotionModel,
        k: &CameraIntrinsics,
        t_ref: Micros,
        cfg: &CmaxConfig,
    ) -> Self {
        Self {
            events,
            model,
            k: *k,
            kernel: Kernel::new(cfg.epsilon_px, cfg.truncation_px),
            dts: events.iter().map(|e| dt_s(t_ref, e.t)).collect(),
            grid: vec![0.0; k.pixel_count()],
            touched: Vec::new(),
            seen: vec![false; k.pixel_count()],
            taps: Vec::new(),
            warped: Vec::with_capacity(events.len()),
            dropped: 0,
        }
    }

    /// Pixel displacement produced by a unit parameter change at the oldest
    /// event, roughly.
    pub fn pixel_scale(&self) -> f64 {
        let dt = self.dts.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        match self.model {
            MotionModel::Flow2 => dt,
            MotionModel::Rot3 => dt * self.k.fx.max(self.k.fy),
        }
    }

    /// Events dropped by the last evaluation (warped behind the camera).
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn value(&mut self, params: &[f64]) -> f64 {
        let (v, _) = self.evaluate(params, false);
        v
    }

    pub fn value_and_gradient(&mut self, params: &[f64]) -> (f64, Vec<f64>) {
        let (v, g) = self.evaluate(params, true);
        (v, g.as_slice()[..self.model.dim()].to_vec())
    }

    fn warp_all(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.model.dim(), "parameter count for {:?}", self.model);
        self.warped.clear();
        let k = &self.k;
        match self.model {
            MotionModel::Flow2 => {
                let v = Vector2::new(params[0], params[1]);
                for (e, &dt) in self.events.iter().zip(&self.dts) {
                    let mu = Point2::new(f64::from(e.x), f64::from(e.y)) + v * dt;
                    let j = Matrix2x3::new(dt, 0.0, 0.0, 0.0, dt, 0.0);
                    self.warped.push(Some((mu, j)));
                }
            }
            MotionModel::Rot3 => {
                let w = Vector3::new(params[0], params[1], params[2]);
                for (e, &dt) in self.events.iter().zip(&self.dts) {
                    let a = w * dt;
                    let y = so3::rotation_exp(&a) * k.unproject(f64::from(e.x), f64::from(e.y));
                    if y.z <= MIN_DEPTH {
                        self.warped.push(None);
                        continue;
                    }
                    let mu = Point2::new(k.fx * y.x / y.z + k.cx, k.fy * y.y / y.z + k.cy);
                    let dy_dw: Matrix3<f64> = -so3::hat(&y) * so3::left_jacobian(&a) * dt;
                    let z2 = y.z * y.z;
                    let dmu_dy = Matrix2x3::new(
                        k.fx / y.z, 0.0, -k.fx * y.x / z2,
                        0.0, k.fy / y.z, -k.fy * y.y / z2,
                    );
                    self.warped.push(Some((mu, dmu_dy * dy_dw)));
                }
            }
        }
        self.dropped = self.warped.iter().filter(|w| w.is_none()).count();
    }

    fn evaluate(&mut self, params: &[f64], want_grad: bool) -> (f64, Vector3<f64>) {
        self.warp_all(params);
        let (w, h) = (self.k.width, self.k.height);
        let n_px = self.grid.len() as f64;
        for (mu, _) in self.warped.iter().flatten() {
            let (z, _) = self.kernel.taps(mu, w, h, &mut self.taps);
            for t in &self.taps {
                if let Some(i) = t.idx {
                    if !self.seen[i] {
                        self.seen[i] = true;
                        self.touched.push(i);
                    }
                    self.grid[i] += t.w / z;
                }
            }
        }
        let (mut s1, mut s2) = (0.0, 0.0);
        for &i in &self.touched {
            s1 += self.grid[i];
            s2 += self.grid[i] * self.grid[i];
        }
        let mean = s1 / n_px;
        let var = (s2 / n_px - mean * mean).max(0.0);

        let mut grad = Vector3::zeros();
        if want_grad {
            for (mu, j) in self.warped.iter().flatten() {
                let (z, gz) = self.kernel.taps(mu, w, h, &mut self.taps);
                let mut a = Vector2::zeros();
                let mut b = 0.0;
                for t in &self.taps {
                    if let Some(i) = t.idx {
                        let c = self.grid[i] - mean;
                        a += t.grad * c;
                        b += t.w * c;
                    }
                }
                let d_mu = (a / z - gz * (b / (z * z))) * (2.0 / n_px);
                grad += j.transpose() * d_mu;
            }
        }
        for &i in &self.touched {
            self.grid[i] = 0.0;
            self.seen[i] = false;
        }
        self.touched.clear();
        (var, grad)
    }
}
