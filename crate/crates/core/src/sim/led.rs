use rand::Rng;
use rayon::prelude::*;

use super::{marker_pixels, sample_trajectory, streams, LedMarker, SimConfig, SimError, TrajectorySpec};
use crate::event::{Event, EventStream, Polarity};
use crate::protocol::{encode_id, symbols_to_waveform, LedState};

/// Events from blinking LED markers.
///
/// Each marker repeats its pattern across `[t0, t1]`, shifted by its phase.
/// Every ON (OFF) transition emits `1 + dup_events` positive (negative)
/// events at each pixel of the marker's projected disk at that instant,
/// each with independent uniform jitter in `±jitter_us`.
pub fn simulate_led_events(
    markers: &[LedMarker],
    spec: &TrajectorySpec,
    cfg: &SimConfig,
) -> Result<EventStream, SimError> {
    cfg.validate()?;
    spec.validate()?;
    let per_marker: Vec<Vec<Event>> = markers
        .par_iter()
        .enumerate()
        .map(|(i, m)| marker_events(m, i as u64, spec, cfg))
        .collect::<Result<_, _>>()?;
    let mut events: Vec<Event> = per_marker.into_iter().flatten().collect();
    events.sort_by_key(|e| e.t);
    let k = &cfg.intrinsics;
    Ok(EventStream::new(k.width, k.height, events).expect("LED events are in bounds"))
}

fn marker_events(
    marker: &LedMarker,
    index: u64,
    spec: &TrajectorySpec,
    cfg: &SimConfig,
) -> Result<Vec<Event>, SimError> {
    let waveform = symbols_to_waveform(&encode_id(marker.id, &cfg.protocol)?, &cfg.protocol);
    let period = waveform.period as i64;
    let phase = (marker.phase_us as i64).rem_euclid(period);
    let (t0, t1) = (spec.t0 as i64, spec.t1 as i64);
    let jitter = cfg.jitter_us as i64;
    let mut rng = cfg.rng(streams::LED_BASE + index);
    let mut out = Vec::new();
    // one repetition before t0 + phase so the start of the range is covered
    let mut base = t0 + phase - period;
    while base < t1 {
        for tr in &waveform.transitions {
            let t = base + tr.t as i64;
            if t < t0 || t >= t1 {
                continue;
            }
            let pose = sample_trajectory(spec, t as u64)?;
            let Some(pixels) = marker_pixels(marker, &pose, &cfg.intrinsics) else {
                continue;
            };
            let p = match tr.state {
                LedState::On => Polarity::Positive,
                LedState::Off => Polarity::Negative,
            };
            for &(x, y) in &pixels {
                for _ in 0..=cfg.dup_events {
                    let dj = if jitter > 0 {
                        rng.random_range(-jitter..=jitter)
                    } else {
                        0
                    };
                    let te = (t + dj).clamp(t0, t1) as u64;
                    out.push(Event::new(x, y, te, p));
                }
            }
        }
        base += period;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{CameraIntrinsics, Pose};
    use crate::protocol::ProtocolConfig;
    use crate::sim::{Motion, Sensitivity};
    use nalgebra::Vector3;
    use std::collections::BTreeMap;

    fn cfg() -> SimConfig {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        SimConfig::new(k, Sensitivity::Low)
    }

    fn axis_marker(id: u64) -> LedMarker {
        LedMarker {
            id,
            position: Vector3::new(0.0, 0.0, 2.0),
            radius_m: 0.012,
            phase_us: 0,
        }
    }

    #[test]
    fn static_marker_rising_edges_match_waveform() {
        let cfg = cfg();
        let m = axis_marker(0xA5);
        let w = symbols_to_waveform(&encode_id(m.id, &cfg.protocol).unwrap(), &cfg.protocol);
        let spec = TrajectorySpec::new(Pose::identity(), Motion::Static, 0, w.period).unwrap();
        let s = simulate_led_events(&[m.clone()], &spec, &cfg).unwrap();
        let mut per_px: BTreeMap<(u16, u16), Vec<u64>> = BTreeMap::new();
        for e in s.events().iter().filter(|e| e.p.is_positive()) {
            per_px.entry((e.x, e.y)).or_default().push(e.t);
        }
        let pixels = marker_pixels(&m, &Pose::identity(), &cfg.intrinsics).unwrap();
        assert_eq!(per_px.len(), pixels.len());
        let mut expected = w.rising_edges(1);
        expected.pop();
        for ts in per_px.values() {
            assert_eq!(ts, &expected);
        }
    }

    #[test]
    fn camera_facing_away_gives_nothing() {
        let cfg = cfg();
        let spec = TrajectorySpec::new(
            Pose::look_at(Vector3::zeros(), Vector3::new(0.0, 0.0, -1.0), Vector3::new(0.0, -1.0, 0.0)),
            Motion::Static,
            0,
            20_000,
        )
        .unwrap();
        assert!(simulate_led_events(&[axis_marker(3)], &spec, &cfg).unwrap().is_empty());
    }

    #[test]
    fn duplicates_multiply_counts() {
        let mut cfg = cfg();
        let spec = TrajectorySpec::new(Pose::identity(), Motion::Static, 0, 30_000).unwrap();
        let m = [axis_marker(17)];
        let base = simulate_led_events(&m, &spec, &cfg).unwrap().positive_count();
        cfg.dup_events = 2;
        cfg.jitter_us = 20;
        let dup = simulate_led_events(&m, &spec, &cfg).unwrap().positive_count();
        assert_eq!(dup, 3 * base);
    }

    #[test]
    fn jittered_intervals_stay_within_jitter() {
        let mut cfg = cfg();
        cfg.jitter_us = 10;
        cfg.seed = 5;
        let m = LedMarker { phase_us: 1234, ..axis_marker(77) };
        let spec = TrajectorySpec::new(Pose::identity(), Motion::Static, 0, 20_000).unwrap();
        let s = simulate_led_events(&[m], &spec, &cfg).unwrap();
        let ts: Vec<u64> = s
            .events()
            .iter()
            .filter(|e| e.p.is_positive() && (e.x, e.y) == (320, 240))
            .map(|e| e.t)
            .collect();
        let tb = ProtocolConfig::default().base_period_us();
        for w in ts.windows(2) {
            let d = w[1] - w[0];
            let nearest = [2 * tb, 3 * tb, 4 * tb].into_iter().min_by_key(|c| c.abs_diff(d)).unwrap();
            assert!(nearest.abs_diff(d) <= 2 * cfg.jitter_us, "{d}");
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let mut cfg = cfg();
        cfg.jitter_us = 25;
        cfg.dup_events = 1;
        cfg.seed = 99;
        let spec = TrajectorySpec::new(
            Pose::identity(),
            Motion::Translation { velocity: Vector3::new(0.3, 0.0, 0.0) },
            0,
            50_000,
        )
        .unwrap();
        let ms = [axis_marker(1), LedMarker { position: Vector3::new(0.2, 0.1, 2.5), ..axis_marker(2) }];
        let a = simulate_led_events(&ms, &spec, &cfg).unwrap();
        let b = simulate_led_events(&ms, &spec, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
