//! Synthetic fixtures with known motion for testing motion estimation.
//!
//! A random set of line segments defines a sharp reference image at
//! `t_ref = t1`. Each event picks a point on a segment and a uniform time in
//! `[t0, t1]`, then moves the point backwards along the planted motion so
//! that warping to `t_ref` with the true parameters re-aligns it.

use nalgebra::{Point2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::CameraIntrinsics;
use crate::event::{Event, EventStream, Micros, Polarity};
use crate::so3;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n_events: usize,
    pub n_segments: usize,
    pub t0: Micros,
    pub t1: Micros,
    /// Segment endpoints stay this far from the image border.
    pub margin_px: f64,
    pub seed: u64,
}

impl PlantedConfig {
    pub fn new(n_events: usize, t0: Micros, t1: Micros, seed: u64) -> Self {
        Self { n_events, n_segments: 30, t0, t1, margin_px: 40.0, seed }
    }
}

/// Events whose reference image translates at `v` px/s.
pub fn planted_flow(k: &CameraIntrinsics, v: Vector2<f64>, cfg: &PlantedConfig) -> EventStream {
    planted(k, cfg, |x_ref, dt| Some(x_ref - v * dt))
}

/// Events seen by a camera rotating at `omega` rad/s about its center.
pub fn planted_rotation(k: &CameraIntrinsics, omega: Vector3<f64>, cfg: &PlantedConfig) -> EventStream {
    let k = *k;
    planted(&k, cfg, move |x_ref, dt| {
        let r = so3::rotation_exp(&(-omega * dt));
        k.project_camera(&(r * k.unproject(x_ref.x, x_ref.y)))
    })
}

fn planted(
    k: &CameraIntrinsics,
    cfg: &PlantedConfig,
    move_back: impl Fn(Point2<f64>, f64) -> Option<Point2<f64>>,
) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w, h) = (f64::from(k.width), f64::from(k.height));
    let m = cfg.margin_px.min(w / 4.0).min(h / 4.0);
    let random_point = |rng: &mut ChaCha8Rng| {
        Point2::new(rng.random_range(m..w - m), rng.random_range(m..h - m))
    };
    let segments: Vec<_> = (0..cfg.n_segments.max(1))
        .map(|_| (random_point(&mut rng), random_point(&mut rng)))
        .collect();
    let mut events = Vec::with_capacity(cfg.n_events);
    // give up on pathological motions that push everything off-frame
    let mut attempts = 0usize;
    while events.len() < cfg.n_events && attempts < 100 * cfg.n_events.max(1) {
        attempts += 1;
        let (a, b) = segments[rng.random_range(0..segments.len())];
        let s: f64 = rng.random();
        let x_ref = a + (b - a) * s;
        let t = rng.random_range(cfg.t0..=cfg.t1);
        let p = if rng.random::<bool>() { Polarity::Positive } else { Polarity::Negative };
        let dt = (cfg.t1 - t) as f64 * 1e-6;
        let Some(x) = move_back(x_ref, dt) else { continue };
        let (xr, yr) = (x.x.round(), x.y.round());
        if xr < 0.0 || yr < 0.0 || xr >= w || yr >= h {
            continue;
        }
        events.push(Event::new(xr as u16, yr as u16, t, p));
    }
    events.sort_by_key(|e| e.t);
    EventStream::new(k.width, k.height, events).expect("planted events are in bounds")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 640.0, 360.0, 1280, 720).unwrap()
    }

    #[test]
    fn counts_and_window() {
        let cfg = PlantedConfig::new(5000, 1000, 26_000, 3);
        let s = planted_flow(&k(), Vector2::new(200.0, -120.0), &cfg);
        assert_eq!(s.len(), 5000);
        assert!(s.events().iter().all(|e| (1000..=26_000).contains(&e.t)));
        let r = planted_rotation(&k(), Vector3::new(0.0, 0.0, 2.0), &cfg);
        assert_eq!(r.len(), 5000);
    }

    #[test]
    fn seeded() {
        let cfg = PlantedConfig::new(300, 0, 25_000, 11);
        assert_eq!(
            planted_flow(&k(), Vector2::new(10.0, 0.0), &cfg),
            planted_flow(&k(), Vector2::new(10.0, 0.0), &cfg)
        );
    }
}
