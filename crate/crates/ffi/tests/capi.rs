use std::ffi::CStr;
use std::ptr;

use evlc_core::sim::planted::{planted_flow, PlantedConfig};
use evlc_core::sim::{simulate_led_events, LedMarker, Motion, Sensitivity, SimConfig, TrajectorySpec};
use evlc_core::{CameraIntrinsics, EventStream, Pose};
use evlc_ffi::*;
use nalgebra::{Vector2, Vector3};

const K: EvlcIntrinsics = EvlcIntrinsics { fx: 600.0, fy: 600.0, cx: 320.0, cy: 240.0, width: 640, height: 480 };

fn core_k() -> CameraIntrinsics {
    CameraIntrinsics::new(K.fx, K.fy, K.cx, K.cy, K.width, K.height).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(evlc_last_error()) }.to_string_lossy().into_owned()
}

fn to_c(s: &EventStream) -> *mut EvlcStream {
    let ev: Vec<EvlcEvent> =
        s.events().iter().map(|e| EvlcEvent { t_us: e.t, x: e.x, y: e.y, polarity: e.p.sign() }).collect();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { evlc_stream_new(s.width(), s.height(), ev.as_ptr(), ev.len(), &mut h) }, EvlcStatus::Ok);
    h
}

fn led_markers() -> Vec<LedMarker> {
    [(-0.3, -0.2, 2.0), (0.3, -0.2, 2.2), (0.3, 0.2, 2.0), (-0.3, 0.2, 2.1)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y, z))| LedMarker {
            id: [0x11, 0x22, 0x44, 0x88][i],
            position: Vector3::new(x, y, z),
            radius_m: 4.0 * z / 600.0,
            phase_us: 900 * i as u64,
        })
        .collect()
}

#[test]
fn version_and_window() {
    let v = unsafe { CStr::from_ptr(evlc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    assert_eq!(evlc_min_window_us(), 5600);
}

#[test]
fn null_and_invalid_arguments() {
    let mut h = ptr::null_mut();
    let st = unsafe { evlc_stream_new(10, 10, ptr::null(), 3, &mut h) };
    assert_eq!(st, EvlcStatus::NullPointer);
    assert!(h.is_null());

    let bad = [EvlcEvent { t_us: 0, x: 1, y: 1, polarity: 0 }];
    assert_eq!(unsafe { evlc_stream_new(10, 10, bad.as_ptr(), 1, &mut h) }, EvlcStatus::InvalidArgument);
    assert!(last_error().contains("polarity"), "{}", last_error());

    let unsorted = [
        EvlcEvent { t_us: 5, x: 1, y: 1, polarity: 1 },
        EvlcEvent { t_us: 4, x: 1, y: 1, polarity: 1 },
    ];
    assert_eq!(unsafe { evlc_stream_new(10, 10, unsorted.as_ptr(), 2, &mut h) }, EvlcStatus::InvalidArgument);

    assert_eq!(unsafe { evlc_stream_new(10, 10, ptr::null(), 0, &mut h) }, EvlcStatus::Ok);
    assert_eq!(unsafe { evlc_stream_len(h) }, 0);
    let mut d = ptr::null_mut();
    let st = unsafe { evlc_decode(h, &K, 10_000, 25_000, false, EvlcModel::Flow2, &mut d) };
    assert_eq!(st, EvlcStatus::InvalidArgument, "size mismatch");
    let st = unsafe { evlc_decode(h, ptr::null(), 10_000, 25_000, false, EvlcModel::Flow2, &mut d) };
    assert_eq!(st, EvlcStatus::NullPointer);
    unsafe {
        evlc_stream_free(h);
        evlc_stream_free(ptr::null_mut());
        evlc_detections_free(ptr::null_mut());
        evlc_markers_free(ptr::null_mut());
    }
}

#[test]
fn decode_then_localize() {
    let mut cfg = SimConfig::new(core_k(), Sensitivity::Low);
    cfg.seed = 4;
    let spec = TrajectorySpec::new(Pose::identity(), Motion::Static, 0, 30_000).unwrap();
    let ms = led_markers();
    let s = simulate_led_events(&ms, &spec, &cfg).unwrap();
    let h = to_c(&s);
    assert_eq!(unsafe { evlc_stream_len(h) }, s.len());

    let mut d = ptr::null_mut();
    let st = unsafe { evlc_decode(h, &K, 30_000, 25_000, false, EvlcModel::Flow2, &mut d) };
    assert_eq!(st, EvlcStatus::Ok, "{}", last_error());
    let n = unsafe { evlc_detections_len(d) };
    assert_eq!(n, 4);
    let mut ids = Vec::new();
    for i in 0..n {
        let mut det = EvlcDetection { id: 0, t_us: 0, cx: 0.0, cy: 0.0, x_min: 0, y_min: 0, x_max: 0, y_max: 0, pixel_count: 0 };
        assert_eq!(unsafe { evlc_detections_get(d, i, &mut det) }, EvlcStatus::Ok);
        assert!(det.x_min as f64 <= det.cx && det.cx <= det.x_max as f64);
        assert_eq!(det.t_us, 30_000);
        ids.push(det.id);
    }
    ids.sort_unstable();
    assert_eq!(ids, vec![0x11, 0x22, 0x44, 0x88]);
    let mut det = std::mem::MaybeUninit::<EvlcDetection>::uninit();
    assert_eq!(unsafe { evlc_detections_get(d, n, det.as_mut_ptr()) }, EvlcStatus::InvalidArgument);

    let m = evlc_markers_new();
    let mut pose = EvlcPose { rotation: [0.0; 9], translation: [0.0; 3], rms_px: 0.0 };
    unsafe {
        assert_eq!(evlc_markers_insert(m, 0x11, -0.3, -0.2, 2.0), EvlcStatus::Ok);
        assert_eq!(evlc_solve_pnp(d, m, &K, &mut pose), EvlcStatus::InsufficientData);
        for mk in &ms[1..] {
            evlc_markers_insert(m, mk.id, mk.position.x, mk.position.y, mk.position.z);
        }
        assert_eq!(evlc_solve_pnp(d, m, &K, &mut pose), EvlcStatus::Ok, "{}", last_error());
    }
    let err: f64 = pose.translation.iter().map(|v| v.abs()).sum();
    assert!(err < 0.02, "{:?}", pose.translation);
    assert!((pose.rotation[0] - 1.0).abs() < 1e-3 && (pose.rotation[8] - 1.0).abs() < 1e-3);
    unsafe {
        evlc_markers_free(m);
        evlc_detections_free(d);
        evlc_stream_free(h);
    }
}

#[test]
fn motion_estimate_matches_planted_flow() {
    let v = Vector2::new(200.0, -120.0);
    let s = planted_flow(&core_k(), v, &PlantedConfig::new(5000, 0, 25_000, 3));
    let h = to_c(&s);
    let mut p = [0.0; 3];
    let (mut dim, mut c) = (0usize, 0.0);
    let st = unsafe { evlc_estimate_motion(h, &K, 0, 25_000, EvlcModel::Flow2, p.as_mut_ptr(), &mut dim, &mut c) };
    assert_eq!(st, EvlcStatus::Ok, "{}", last_error());
    assert_eq!(dim, 2);
    assert!(c > 0.0);
    let rel = (Vector2::new(p[0], p[1]) - v).norm() / v.norm();
    assert!(rel < 0.05, "{p:?}");

    let st = unsafe { evlc_estimate_motion(h, &K, 90_000, 95_000, EvlcModel::Rot3, p.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, EvlcStatus::InsufficientData);
    let st = unsafe { evlc_estimate_motion(h, &K, 0, 25_000, EvlcModel::Flow2, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, EvlcStatus::NullPointer);
    unsafe { evlc_stream_free(h) };
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/evlc.h")).unwrap();
    for name in [
        "evlc_stream_new",
        "evlc_decode",
        "evlc_estimate_motion",
        "evlc_solve_pnp",
        "evlc_last_error",
        "typedef struct EvlcStream EvlcStream",
        "EVLC_STATUS_NULL_POINTER = 1",
        "EVLC_MODEL_ROT3",
    ] {
        assert!(h.contains(name), "missing {name}");
    }
}

/// The header compiles as C and the declared signatures accept typical
/// caller code. Skipped when no C compiler is installed.
#[test]
fn header_compiles_as_c() {
    let Ok(dir) = tempfile_dir() else { return };
    let src = dir.join("use_evlc.c");
    std::fs::write(
        &src,
        r#"#include "evlc.h"
int run(const EvlcEvent *ev, size_t n) {
    EvlcStream *s = NULL;
    EvlcIntrinsics k = {600.0, 600.0, 320.0, 240.0, 640, 480};
    if (evlc_stream_new(640, 480, ev, n, &s) != EVLC_STATUS_OK) return 1;
    EvlcDetections *d = NULL;
    EvlcStatus st = evlc_decode(s, &k, 30000, 25000, true, EVLC_MODEL_FLOW2, &d);
    double p[3]; size_t dim = 0;
    st = evlc_estimate_motion(s, &k, 0, 25000, EVLC_MODEL_ROT3, p, &dim, NULL);
    EvlcMarkerMap *m = evlc_markers_new();
    evlc_markers_insert(m, 7, 0.0, 0.0, 2.0);
    EvlcPose pose;
    st = evlc_solve_pnp(d, m, &k, &pose);
    const char *msg = evlc_last_error();
    (void)msg;
    evlc_markers_free(m);
    evlc_detections_free(d);
    evlc_stream_free(s);
    return (int)st;
}
"#,
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "C compiler rejected the header"),
        Err(_) => eprintln!("no C compiler; skipped"),
    }
    let _ = std::fs::remove_dir_all(dir);
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let d = std::env::temp_dir().join(format!("evlc-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d)?;
    Ok(d)
}
