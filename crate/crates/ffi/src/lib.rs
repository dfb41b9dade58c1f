//! C ABI for evlc-core.
//!
//! Every fallible function returns an [`EvlcStatus`]; on failure a message
//! is available from [`evlc_last_error`] on the same thread. Objects are
//! opaque handles created by `*_new` (or an operation) and released with
//! the matching `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use evlc_core::cmax::{estimate_motion_at, CmaxConfig, CmaxError, MotionModel};
use evlc_core::pipeline::{process_frame, solve_pnp, Detection, MarkerMap, PipelineConfig, PnpError};
use evlc_core::protocol::ProtocolConfig;
use evlc_core::{CameraIntrinsics, Event, EventStream, Polarity};
use nalgebra::Vector3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvlcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InsufficientData = 3,
    Degenerate = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvlcModel {
    /// Constant image-plane flow (vx, vy) in px/s.
    Flow2 = 0,
    /// Constant angular velocity (wx, wy, wz) in rad/s.
    Rot3 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvlcEvent {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    /// +1 or -1.
    pub polarity: i8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvlcIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u16,
    pub height: u16,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvlcDetection {
    pub id: u64,
    pub t_us: u64,
    pub cx: f64,
    pub cy: f64,
    /// Inclusive pixel bounds.
    pub x_min: u16,
    pub y_min: u16,
    pub x_max: u16,
    pub y_max: u16,
    pub pixel_count: u32,
}

/// Camera-to-world pose: `rotation` is row-major, `translation` is the
/// camera center.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvlcPose {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub rms_px: f64,
}

/// Time-sorted event stream.
pub struct EvlcStream(EventStream);
/// Marker ID to world position.
pub struct EvlcMarkerMap(MarkerMap);
/// Detections of one frame.
pub struct EvlcDetections(Vec<Detection>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: EvlcStatus, msg: impl Into<String>) -> EvlcStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into `Internal`.
fn guard(f: impl FnOnce() -> EvlcStatus) -> EvlcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(EvlcStatus::Internal, "internal panic"),
    }
}

fn intrinsics(k: &EvlcIntrinsics) -> Result<CameraIntrinsics, EvlcStatus> {
    CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width, k.height)
        .map_err(|e| fail(EvlcStatus::InvalidArgument, e.to_string()))
}

fn model(m: EvlcModel) -> MotionModel {
    match m {
        EvlcModel::Flow2 => MotionModel::Flow2,
        EvlcModel::Rot3 => MotionModel::Rot3,
    }
}

macro_rules! deref {
    ($p:expr) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(EvlcStatus::NullPointer, concat!("`", stringify!($p), "` is null")),
        }
    };
}

macro_rules! out {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(EvlcStatus::NullPointer, concat!("`", stringify!($p), "` is null")),
        }
    };
}

/// Message of the last failure on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn evlc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn evlc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a stream from `n` events, which must be sorted by time and lie
/// inside the sensor.
///
/// # Safety
/// `events` must point to `n` readable `EvlcEvent`s (or may be null when
/// `n` is 0); `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evlc_stream_new(
    width: u16,
    height: u16,
    events: *const EvlcEvent,
    n: usize,
    out: *mut *mut EvlcStream,
) -> EvlcStatus {
    guard(|| {
        let out = out!(out);
        *out = ptr::null_mut();
        if events.is_null() && n > 0 {
            return fail(EvlcStatus::NullPointer, "`events` is null");
        }
        let raw = if n == 0 { &[][..] } else { std::slice::from_raw_parts(events, n) };
        let mut ev = Vec::with_capacity(n);
        for (i, e) in raw.iter().enumerate() {
            let Ok(p) = Polarity::from_sign(i64::from(e.polarity)) else {
                return fail(EvlcStatus::InvalidArgument, format!("event {i}: polarity must be +1 or -1"));
            };
            ev.push(Event::new(e.x, e.y, e.t_us, p));
        }
        match EventStream::new(width, height, ev) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(EvlcStream(s)));
                EvlcStatus::Ok
            }
            Err(e) => fail(EvlcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be null or a handle from `evlc_stream_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn evlc_stream_free(s: *mut EvlcStream) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of events, 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live stream handle.
#[no_mangle]
pub unsafe extern "C" fn evlc_stream_len(s: *const EvlcStream) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

#[no_mangle]
pub extern "C" fn evlc_markers_new() -> *mut EvlcMarkerMap {
    Box::into_raw(Box::new(EvlcMarkerMap(MarkerMap::default())))
}

/// Adds or replaces a marker.
///
/// # Safety
/// `m` must be a live marker-map handle.
#[no_mangle]
pub unsafe extern "C" fn evlc_markers_insert(m: *mut EvlcMarkerMap, id: u64, x: f64, y: f64, z: f64) -> EvlcStatus {
    let m = out!(m);
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return fail(EvlcStatus::InvalidArgument, "marker position must be finite");
    }
    m.0.markers.insert(id, Vector3::new(x, y, z));
    EvlcStatus::Ok
}

/// # Safety
/// `m` must be null or a handle from `evlc_markers_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn evlc_markers_free(m: *mut EvlcMarkerMap) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Decodes marker IDs from the events in `[t_frame - window_us, t_frame]`
/// and clusters them into detections. With `compensate` the window is first
/// motion-compensated using `model`.
///
/// # Safety
/// `s` and `k` must be valid; `out` must be a valid pointer. The returned
/// handle is released with `evlc_detections_free`.
#[no_mangle]
pub unsafe extern "C" fn evlc_decode(
    s: *const EvlcStream,
    k: *const EvlcIntrinsics,
    t_frame: u64,
    window_us: u64,
    compensate: bool,
    model_kind: EvlcModel,
    out: *mut *mut EvlcDetections,
) -> EvlcStatus {
    guard(|| {
        let out = out!(out);
        *out = ptr::null_mut();
        let (s, k) = (deref!(s), deref!(k));
        let k = match intrinsics(k) {
            Ok(k) => k,
            Err(e) => return e,
        };
        if (s.0.width(), s.0.height()) != (k.width, k.height) {
            return fail(EvlcStatus::InvalidArgument, "stream size does not match the intrinsics");
        }
        let cfg = match PipelineConfig::new(window_us, compensate, model(model_kind)) {
            Ok(c) => c,
            Err(e) => return fail(EvlcStatus::InvalidArgument, e.to_string()),
        };
        let frame = process_frame(&s.0, &MarkerMap::default(), &k, &cfg, t_frame);
        *out = Box::into_raw(Box::new(EvlcDetections(frame.detections)));
        EvlcStatus::Ok
    })
}

/// # Safety
/// `d` must be null or a live detections handle.
#[no_mangle]
pub unsafe extern "C" fn evlc_detections_len(d: *const EvlcDetections) -> usize {
    d.as_ref().map_or(0, |d| d.0.len())
}

/// Copies detection `i` into `out`.
///
/// # Safety
/// `d` must be a live detections handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evlc_detections_get(d: *const EvlcDetections, i: usize, out: *mut EvlcDetection) -> EvlcStatus {
    let (d, out) = (deref!(d), out!(out));
    let Some(x) = d.0.get(i) else {
        return fail(EvlcStatus::InvalidArgument, format!("index {i} out of range ({})", d.0.len()));
    };
    *out = EvlcDetection {
        id: x.id,
        t_us: x.t,
        cx: x.center.x,
        cy: x.center.y,
        x_min: x.bbox.x_min,
        y_min: x.bbox.y_min,
        x_max: x.bbox.x_max,
        y_max: x.bbox.y_max,
        pixel_count: u32::try_from(x.pixel_count).unwrap_or(u32::MAX),
    };
    EvlcStatus::Ok
}

/// # Safety
/// `d` must be null or a handle from `evlc_decode` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn evlc_detections_free(d: *mut EvlcDetections) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Contrast-maximization motion estimate for the events in `[t0, t1]`,
/// referenced to `t1`. Writes `dim` parameters (2 for flow, 3 for rotation)
/// into `params`, which must hold at least 3 values.
///
/// # Safety
/// `s` and `k` must be valid; `params` must point to 3 writable doubles;
/// `dim` and `contrast` may be null.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn evlc_estimate_motion(
    s: *const EvlcStream,
    k: *const EvlcIntrinsics,
    t0: u64,
    t1: u64,
    model_kind: EvlcModel,
    params: *mut f64,
    dim: *mut usize,
    contrast: *mut f64,
) -> EvlcStatus {
    guard(|| {
        let (s, k) = (deref!(s), deref!(k));
        if params.is_null() {
            return fail(EvlcStatus::NullPointer, "`params` is null");
        }
        if t0 > t1 {
            return fail(EvlcStatus::InvalidArgument, "t0 must not exceed t1");
        }
        let k = match intrinsics(k) {
            Ok(k) => k,
            Err(e) => return e,
        };
        match estimate_motion_at(s.0.window(t0, t1), model(model_kind), &CmaxConfig::default(), &k, t1) {
            Ok(est) => {
                let p = est.params.as_slice();
                ptr::copy_nonoverlapping(p.as_ptr(), params, p.len());
                if let Some(d) = dim.as_mut() {
                    *d = p.len();
                }
                if let Some(c) = contrast.as_mut() {
                    *c = est.contrast;
                }
                EvlcStatus::Ok
            }
            Err(e @ CmaxError::InsufficientEvents(_)) => fail(EvlcStatus::InsufficientData, e.to_string()),
            Err(e) => fail(EvlcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Camera pose from detections of known markers (at least 4 distinct IDs).
///
/// # Safety
/// All pointers must be valid handles or structs.
#[no_mangle]
pub unsafe extern "C" fn evlc_solve_pnp(
    d: *const EvlcDetections,
    m: *const EvlcMarkerMap,
    k: *const EvlcIntrinsics,
    out: *mut EvlcPose,
) -> EvlcStatus {
    guard(|| {
        let (d, m, k, out) = (deref!(d), deref!(m), deref!(k), out!(out));
        let k = match intrinsics(k) {
            Ok(k) => k,
            Err(e) => return e,
        };
        match solve_pnp(&d.0, &m.0, &k, 4) {
            Ok(sol) => {
                let r = sol.pose.rotation;
                let t = sol.pose.translation;
                *out = EvlcPose {
                    rotation: std::array::from_fn(|i| r[(i / 3, i % 3)]),
                    translation: [t.x, t.y, t.z],
                    rms_px: sol.rms_px,
                };
                EvlcStatus::Ok
            }
            Err(e @ PnpError::Insufficient { .. }) => fail(EvlcStatus::InsufficientData, e.to_string()),
            Err(e @ PnpError::Degenerate(_)) => fail(EvlcStatus::Degenerate, e.to_string()),
        }
    })
}

/// Longest blink pattern in microseconds for the default protocol; decode
/// windows must be at least this long.
#[no_mangle]
pub extern "C" fn evlc_min_window_us() -> u64 {
    ProtocolConfig::default().max_frame_period_us()
}
