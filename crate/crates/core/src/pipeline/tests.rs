use super::*;
use crate::event::{Event, Polarity};
use crate::sim::{inject_noise, simulate_led_events, LedMarker, Motion, Sensitivity, SimConfig, TrajectorySpec};
use nalgebra::Vector2;
use proptest::prelude::*;

fn k() -> CameraIntrinsics {
    CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480).unwrap()
}

fn markers() -> Vec<LedMarker> {
    markers_px(4.0)
}

/// Square of LEDs at 2 m whose disks project to `r_px` pixels.
fn markers_px(r_px: f64) -> Vec<LedMarker> {
    let corners = [(-0.25, -0.25), (0.25, -0.25), (0.25, 0.25), (-0.25, 0.25)];
    corners
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| LedMarker {
            id: [0x5a, 0x81, 0x3c, 0xe7][i],
            position: Vector3::new(x, y, 2.0),
            radius_m: r_px * 2.0 / 600.0,
            phase_us: 1700 * i as u64,
        })
        .collect()
}

fn marker_map() -> MarkerMap {
    markers().iter().map(|m| (m.id, m.position)).collect()
}

fn sim(motion: Motion, t1: Micros) -> (EventStream, TrajectorySpec) {
    sim_with(&markers(), Pose::identity(), motion, t1)
}

fn sim_with(markers: &[LedMarker], start: Pose, motion: Motion, t1: Micros) -> (EventStream, TrajectorySpec) {
    let spec = TrajectorySpec::new(start, motion, 0, t1).unwrap();
    let mut cfg = SimConfig::new(k(), Sensitivity::Low);
    cfg.jitter_us = 10;
    cfg.dup_events = 1;
    cfg.seed = 21;
    (simulate_led_events(markers, &spec, &cfg).unwrap(), spec)
}

/// 0.8 m/s sideways at 2 m: 240 px/s, 6 px per 25 ms window.
fn sideways() -> Motion {
    Motion::Translation { velocity: Vector3::new(0.8, 0.0, 0.0) }
}

fn decoded_count(d: &DecodedPixels) -> usize {
    d.values().map(Vec::len).sum()
}

#[test]
fn window_must_cover_a_pattern() {
    assert!(PipelineConfig::new(25_000, false, MotionModel::Flow2).is_ok());
    let err = PipelineConfig::new(3_000, false, MotionModel::Flow2).unwrap_err();
    assert!(matches!(err, PipelineError::InvalidConfig(_)));
    let cfg = PipelineConfig { min_points_pnp: 3, ..Default::default() };
    assert!(cfg.validate().is_err());
}

#[test]
fn frame_grid() {
    assert_eq!(frame_times(0, 100_000, 25_000, 40.0), vec![25_000, 50_000, 75_000, 100_000]);
    assert!(frame_times(0, 10_000, 25_000, 40.0).is_empty());
}

#[test]
fn static_scene_localizes_and_compensation_is_harmless() {
    let (events, _) = sim(Motion::Static, 60_000);
    let frames = [30_000, 55_000];
    let off = run_pipeline(&events, &marker_map(), &k(), &PipelineConfig::default(), &frames).unwrap();
    let on_cfg = PipelineConfig { compensate: true, ..Default::default() };
    let on = run_pipeline(&events, &marker_map(), &k(), &on_cfg, &frames).unwrap();
    for (a, b) in off.iter().zip(&on) {
        let ids = |f: &FrameResult| f.detections.iter().map(|d| d.id).collect::<Vec<_>>();
        assert_eq!(ids(a), ids(b));
        assert_eq!(a.detections.len(), 4);
        let WarpParams::Flow(v) = b.motion.unwrap() else { panic!() };
        // under a pixel of displacement across the window
        assert!(v.norm() * 0.025 < 1.0, "{v:?}");
        let (pa, pb) = (a.pose().unwrap(), b.pose().unwrap());
        assert!(pa.translation.norm() < 0.01, "{:?}", pa.translation);
        assert!((pa.translation - pb.translation).norm() < 0.01);
    }
}

#[test]
fn compensation_recovers_decodes_of_moving_leds() {
    let (events, _) = sim(sideways(), 60_000);
    let t = 50_000;
    let raw = decode_count(events.window(t - 25_000, t), None, &ProtocolConfig::default());
    let cfg = PipelineConfig { compensate: true, ..Default::default() };
    let on = process_frame(&events, &marker_map(), &k(), &cfg, t);
    let off = process_frame(&events, &marker_map(), &k(), &PipelineConfig::default(), t);
    assert_eq!(decoded_count(&off.decoded), raw);
    assert!(decoded_count(&on.decoded) > raw, "{} vs {raw}", decoded_count(&on.decoded));
}

#[test]
fn exact_warp_matches_static_decoding() {
    // Rounding warped positions only disturbs the outermost ring of a blob,
    // so the comparison needs blobs large enough for that ring to be small:
    // at 12 px the gap is under 3%, at 4 px it is about 10%.
    let ms = markers_px(12.0);
    let (events, spec) = sim_with(&ms, Pose::identity(), sideways(), 60_000);
    let t = 50_000;
    let p = &ProtocolConfig::default();
    let window = events.window(t - 25_000, t);
    let planted = WarpParams::Flow(Vector2::new(-240.0, 0.0));
    let warped = warp_events(window, &planted, t, &k()).positions;
    let exact = decode_count(window, Some(&warped), p);
    let pose_at_t = crate::sim::sample_trajectory(&spec, t).unwrap();
    let (still, _) = sim_with(&ms, pose_at_t, Motion::Static, 60_000);
    let reference = decode_count(still.window(t - 25_000, t), None, p);
    let diff = exact.abs_diff(reference) as f64;
    assert!(diff <= 0.05 * reference as f64, "{exact} vs {reference}");
    assert!(exact > decode_count(window, None, p));
}

fn decode_count(window: &[Event], positions: Option<&[Option<Point2<f64>>]>, p: &ProtocolConfig) -> usize {
    decoded_count(&decode_pixels(window, positions, 640, 480, p))
}

#[test]
fn noise_alone_decodes_nothing() {
    let k = CameraIntrinsics::new(100.0, 100.0, 64.0, 48.0, 128, 96).unwrap();
    let mut cfg = SimConfig::new(k, Sensitivity::Low);
    cfg.noise_rate_hz = 10.0;
    for seed in 0..3 {
        cfg.seed = seed;
        let s = inject_noise(EventStream::empty(128, 96), 0, 250_000, &cfg).unwrap();
        let d = decode_pixels(s.events(), None, 128, 96, &ProtocolConfig::default());
        assert!(d.is_empty(), "seed {seed}: {} false decodes", decoded_count(&d));
    }
}

#[test]
fn pipeline_is_deterministic() {
    let (events, _) = sim(sideways(), 60_000);
    let cfg = PipelineConfig { compensate: true, ..Default::default() };
    let frames = [30_000, 55_000];
    let a = run_pipeline(&events, &marker_map(), &k(), &cfg, &frames).unwrap();
    let b = run_pipeline(&events, &marker_map(), &k(), &cfg, &frames).unwrap();
    assert_eq!(a, b);
}

#[test]
fn too_few_markers_is_a_frame_failure() {
    let (events, _) = sim(Motion::Static, 30_000);
    let map: MarkerMap = markers().iter().take(3).map(|m| (m.id, m.position)).collect();
    let r = run_pipeline(&events, &map, &k(), &PipelineConfig::default(), &[30_000]).unwrap();
    assert_eq!(r[0].localization, Err(PnpError::Insufficient { needed: 4, found: 3 }));
    assert_eq!(r[0].detections.len(), 4);
}

#[test]
fn mismatched_sensor_rejected() {
    let s = EventStream::new(10, 10, vec![Event::new(1, 1, 0, Polarity::Positive)]).unwrap();
    assert!(run_pipeline(&s, &marker_map(), &k(), &PipelineConfig::default(), &[0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clusters_partition_decoded_pixels(
        cells in proptest::collection::vec(((0u16..12, 0u16..12), 0u64..3), 0..80)
    ) {
        let mut d = DecodedPixels::new();
        for &(px, id) in &cells {
            let v = d.entry(px).or_default();
            if !v.iter().any(|x| x.id == id) {
                v.push(crate::protocol::DecodedId { id, t_start: 0, t_end: 1 });
            }
        }
        let det = cluster_detections(&d, 0);
        let mut seen = std::collections::BTreeSet::new();
        for x in &det {
            prop_assert_eq!(x.pixel_count, x.pixels.len());
            prop_assert!(x.bbox.contains(x.center.x.round() as u16, x.center.y.round() as u16));
            for &p in &x.pixels {
                prop_assert!(seen.insert((p, x.id)), "pixel in two detections");
            }
        }
        let expected: std::collections::BTreeSet<_> =
            d.iter().flat_map(|(&p, ids)| ids.iter().map(move |i| (p, i.id))).collect();
        prop_assert_eq!(seen, expected);
    }
}
