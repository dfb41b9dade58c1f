//! Readers and writers for every on-disk format.
//!
//! * events, text: header `# evlc-events v1 width=W height=H`, then one
//!   `t_us,x,y,p` row per event with `p` in {1, -1}
//! * events, binary: 16-byte header (`EVLC`, u32 version, u32 width, u32
//!   height), then 16-byte little-endian records (u64 t_us, u16 x, u16 y,
//!   i16 p, 2 zero bytes)
//! * poses: `t_us,tx,ty,tz,qx,qy,qz,qw` (camera-to-world, Hamilton
//!   quaternion with w last)
//! * annotations: `t_us,id,x_min,y_min,x_max,y_max` (inclusive bounds)
//! * detections: `t_us,id,cx,cy,x_min,y_min,x_max,y_max,pixel_count`
//! * calibration and marker map: TOML with a `version` field
//!
//! Reals are written in Rust's shortest round-trip form, so text files
//! reproduce values bit-exactly.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Point2, Vector3};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::BenchError;
use crate::camera::{CameraIntrinsics, Pose};
use crate::event::{Event, EventStream, Micros, Polarity};
use crate::pipeline::{Detection, MarkerMap};
use crate::sim::{Annotation, BBox};

pub const FORMAT_VERSION: u32 = 1;
const EVENTS_HEADER: &str = "# evlc-events v1";
const BINARY_MAGIC: &[u8; 4] = b"EVLC";
pub const POSES_HEADER: &str = "t_us,tx,ty,tz,qx,qy,qz,qw";
pub const ANNOTATIONS_HEADER: &str = "t_us,id,x_min,y_min,x_max,y_max";
pub const DETECTIONS_HEADER: &str = "t_us,id,cx,cy,x_min,y_min,x_max,y_max,pixel_count";

pub fn open(path: &Path) -> Result<BufReader<File>, BenchError> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(BenchError::Missing(path.to_path_buf())),
        Err(e) => Err(BenchError::io(path, e)),
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    File::create(path).map(BufWriter::new).map_err(|e| BenchError::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String, BenchError> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s).map_err(|e| BenchError::io(path, e))?;
    Ok(s)
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> BenchError {
    BenchError::Format { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Iterates non-empty data lines with their 1-based numbers, after checking
/// that the first line equals `header`.
fn csv_rows<R: BufRead>(
    r: R,
    path: &Path,
    header: &str,
) -> Result<Vec<(usize, String)>, BenchError> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| BenchError::io(path, e))?;
        let n = i + 1;
        if n == 1 {
            if line.trim() != header {
                return Err(format_err(path, 1, format!("expected header `{header}`")));
            }
            continue;
        }
        if !line.trim().is_empty() {
            rows.push((n, line));
        }
    }
    if rows.is_empty() && header.is_empty() {
        return Err(format_err(path, 1, "empty file"));
    }
    Ok(rows)
}

fn fields<'a>(line: &'a str, n: usize, path: &Path, line_no: usize) -> Result<Vec<&'a str>, BenchError> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != n {
        return Err(format_err(path, line_no, format!("expected {n} fields, found {}", f.len())));
    }
    Ok(f)
}

fn parse<T: FromStr>(s: &str, what: &str, path: &Path, line: usize) -> Result<T, BenchError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| format_err(path, line, format!("{what}: {e} (`{s}`)")))
}

fn parse_finite(s: &str, what: &str, path: &Path, line: usize) -> Result<f64, BenchError> {
    let v: f64 = parse(s, what, path, line)?;
    if !v.is_finite() {
        return Err(format_err(path, line, format!("{what} is not finite")));
    }
    Ok(v)
}

// ---- events ----

pub fn write_events_text<W: Write>(mut w: W, s: &EventStream) -> io::Result<()> {
    writeln!(w, "{EVENTS_HEADER} width={} height={}", s.width(), s.height())?;
    for e in s.events() {
        writeln!(w, "{},{},{},{}", e.t, e.x, e.y, e.p.sign())?;
    }
    w.flush()
}

pub fn read_events_text<R: BufRead>(r: R, path: &Path) -> Result<EventStream, BenchError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(path, 1, "empty file"))?
        .map_err(|e| BenchError::io(path, e))?;
    let (width, height) = parse_events_header(&header).ok_or_else(|| {
        format_err(path, 1, format!("expected `{EVENTS_HEADER} width=<w> height=<h>`"))
    })?;
    let mut events = Vec::new();
    let mut last_t = 0;
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line.map_err(|e| BenchError::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f = fields(&line, 4, path, n)?;
        let t: Micros = parse(f[0], "t_us", path, n)?;
        let x: u16 = parse(f[1], "x", path, n)?;
        let y: u16 = parse(f[2], "y", path, n)?;
        let p: i64 = parse(f[3], "p", path, n)?;
        let p = Polarity::from_sign(p).map_err(|e| format_err(path, n, e.to_string()))?;
        if x >= width || y >= height {
            return Err(format_err(path, n, format!("pixel ({x}, {y}) outside {width}x{height}")));
        }
        if t < last_t {
            return Err(format_err(path, n, format!("timestamp {t} earlier than previous {last_t}")));
        }
        last_t = t;
        events.push(Event::new(x, y, t, p));
    }
    Ok(EventStream::new(width, height, events).expect("validated while reading"))
}

fn parse_events_header(line: &str) -> Option<(u16, u16)> {
    let rest = line.trim().strip_prefix(EVENTS_HEADER)?;
    let mut w = None;
    let mut h = None;
    for kv in rest.split_whitespace() {
        let (k, v) = kv.split_once('=')?;
        match k {
            "width" => w = v.parse().ok(),
            "height" => h = v.parse().ok(),
            _ => return None,
        }
    }
    match (w?, h?) {
        (0, _) | (_, 0) => None,
        wh => Some(wh),
    }
}

pub fn write_events_binary<W: Write>(mut w: W, s: &EventStream) -> io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&u32::from(s.width()).to_le_bytes())?;
    w.write_all(&u32::from(s.height()).to_le_bytes())?;
    for e in s.events() {
        let mut rec = [0u8; 16];
        rec[0..8].copy_from_slice(&e.t.to_le_bytes());
        rec[8..10].copy_from_slice(&e.x.to_le_bytes());
        rec[10..12].copy_from_slice(&e.y.to_le_bytes());
        rec[12..14].copy_from_slice(&i16::from(e.p.sign()).to_le_bytes());
        w.write_all(&rec)?;
    }
    w.flush()
}

/// `line` in errors is the 1-based record number (the header is record 0).
pub fn read_events_binary<R: Read>(mut r: R, path: &Path) -> Result<EventStream, BenchError> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| format_err(path, 0, "truncated header"))?;
    if &head[0..4] != BINARY_MAGIC {
        return Err(format_err(path, 0, "not an evlc binary event file"));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
    if word(4) != FORMAT_VERSION {
        return Err(format_err(path, 0, format!("unsupported version {}", word(4))));
    }
    let (width, height) = match (u16::try_from(word(8)), u16::try_from(word(12))) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => (w, h),
        _ => return Err(format_err(path, 0, "invalid sensor size")),
    };
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| BenchError::io(path, e))?;
    if bytes.len() % 16 != 0 {
        return Err(format_err(path, bytes.len() / 16 + 1, "truncated record"));
    }
    let mut events = Vec::with_capacity(bytes.len() / 16);
    let mut last_t = 0;
    for (i, rec) in bytes.chunks_exact(16).enumerate() {
        let n = i + 1;
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes(rec[8..10].try_into().unwrap());
        let y = u16::from_le_bytes(rec[10..12].try_into().unwrap());
        let p = i16::from_le_bytes(rec[12..14].try_into().unwrap());
        let p = Polarity::from_sign(i64::from(p)).map_err(|e| format_err(path, n, e.to_string()))?;
        if x >= width || y >= height {
            return Err(format_err(path, n, format!("pixel ({x}, {y}) outside {width}x{height}")));
        }
        if t < last_t {
            return Err(format_err(path, n, format!("timestamp {t} earlier than previous {last_t}")));
        }
        last_t = t;
        events.push(Event::new(x, y, t, p));
    }
    Ok(EventStream::new(width, height, events).expect("validated while reading"))
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Binary for `.bin` paths, text otherwise.
pub fn write_events(path: &Path, s: &EventStream) -> Result<(), BenchError> {
    let w = create(path)?;
    if is_binary(path) {
        write_events_binary(w, s)
    } else {
        write_events_text(w, s)
    }
    .map_err(|e| BenchError::io(path, e))
}

pub fn read_events(path: &Path) -> Result<EventStream, BenchError> {
    let r = open(path)?;
    if is_binary(path) {
        read_events_binary(r, path)
    } else {
        read_events_text(r, path)
    }
}

// ---- poses ----

pub fn write_poses<W: Write>(mut w: W, poses: &[(Micros, Pose)]) -> io::Result<()> {
    writeln!(w, "{POSES_HEADER}")?;
    for (t, p) in poses {
        let q = p.quaternion();
        let c = &p.translation;
        writeln!(w, "{t},{},{},{},{},{},{},{}", c.x, c.y, c.z, q[0], q[1], q[2], q[3])?;
    }
    w.flush()
}

pub fn read_poses<R: BufRead>(r: R, path: &Path) -> Result<Vec<(Micros, Pose)>, BenchError> {
    let mut out: Vec<(Micros, Pose)> = Vec::new();
    for (n, line) in csv_rows(r, path, POSES_HEADER)? {
        let f = fields(&line, 8, path, n)?;
        let t: Micros = parse(f[0], "t_us", path, n)?;
        let mut v = [0.0; 7];
        for (i, name) in ["tx", "ty", "tz", "qx", "qy", "qz", "qw"].iter().enumerate() {
            v[i] = parse_finite(f[i + 1], name, path, n)?;
        }
        let q = [v[3], v[4], v[5], v[6]];
        let qn = q.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (qn - 1.0).abs() > 1e-6 {
            return Err(format_err(path, n, format!("quaternion norm {qn} is not 1")));
        }
        if out.last().is_some_and(|(last, _)| t <= *last) {
            return Err(format_err(path, n, "timestamps must increase"));
        }
        out.push((t, Pose::from_quaternion(q.map(|a| a / qn), Vector3::new(v[0], v[1], v[2]))));
    }
    Ok(out)
}

// ---- annotations ----

pub fn write_annotations<W: Write>(mut w: W, anns: &[Annotation]) -> io::Result<()> {
    writeln!(w, "{ANNOTATIONS_HEADER}")?;
    for a in anns {
        let b = &a.bbox;
        writeln!(w, "{},{},{},{},{},{}", a.t, a.id, b.x_min, b.y_min, b.x_max, b.y_max)?;
    }
    w.flush()
}

pub fn read_annotations<R: BufRead>(r: R, path: &Path) -> Result<Vec<Annotation>, BenchError> {
    let mut out: Vec<Annotation> = Vec::new();
    for (n, line) in csv_rows(r, path, ANNOTATIONS_HEADER)? {
        let f = fields(&line, 6, path, n)?;
        let t: Micros = parse(f[0], "t_us", path, n)?;
        let bbox = BBox {
            x_min: parse(f[2], "x_min", path, n)?,
            y_min: parse(f[3], "y_min", path, n)?,
            x_max: parse(f[4], "x_max", path, n)?,
            y_max: parse(f[5], "y_max", path, n)?,
        };
        if bbox.x_min > bbox.x_max || bbox.y_min > bbox.y_max {
            return Err(format_err(path, n, "box minimum exceeds maximum"));
        }
        if out.last().is_some_and(|a| t < a.t) {
            return Err(format_err(path, n, "timestamps must not decrease"));
        }
        out.push(Annotation { t, id: parse(f[1], "id", path, n)?, bbox });
    }
    Ok(out)
}

// ---- detections ----

pub fn write_detections<W: Write>(mut w: W, dets: &[Detection]) -> io::Result<()> {
    writeln!(w, "{DETECTIONS_HEADER}")?;
    for d in dets {
        let b = &d.bbox;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            d.t, d.id, d.center.x, d.center.y, b.x_min, b.y_min, b.x_max, b.y_max, d.pixel_count
        )?;
    }
    w.flush()
}

/// Detections read back carry no pixel list.
pub fn read_detections<R: BufRead>(r: R, path: &Path) -> Result<Vec<Detection>, BenchError> {
    let mut out: Vec<Detection> = Vec::new();
    for (n, line) in csv_rows(r, path, DETECTIONS_HEADER)? {
        let f = fields(&line, 9, path, n)?;
        let t: Micros = parse(f[0], "t_us", path, n)?;
        if out.last().is_some_and(|d| t < d.t) {
            return Err(format_err(path, n, "timestamps must not decrease"));
        }
        let pixel_count: usize = parse(f[8], "pixel_count", path, n)?;
        if pixel_count == 0 {
            return Err(format_err(path, n, "pixel_count must be at least 1"));
        }
        out.push(Detection {
            t,
            id: parse(f[1], "id", path, n)?,
            center: Point2::new(parse_finite(f[2], "cx", path, n)?, parse_finite(f[3], "cy", path, n)?),
            bbox: BBox {
                x_min: parse(f[4], "x_min", path, n)?,
                y_min: parse(f[5], "y_min", path, n)?,
                x_max: parse(f[6], "x_max", path, n)?,
                y_max: parse(f[7], "y_max", path, n)?,
            },
            pixel_count,
            pixels: Vec::new(),
        });
    }
    Ok(out)
}

// ---- TOML documents ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    version: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u16,
    height: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkerEntry {
    id: u64,
    position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkerFile {
    version: u32,
    #[serde(default)]
    marker: Vec<MarkerEntry>,
}

pub(crate) fn from_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, BenchError> {
    toml::from_str(text).map_err(|e| BenchError::schema(path, e.to_string().trim_end().to_string()))
}

fn check_version(v: u32, path: &Path) -> Result<(), BenchError> {
    if v != FORMAT_VERSION {
        return Err(BenchError::schema(path, format!("unsupported version {v}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

pub fn calibration_to_toml(k: &CameraIntrinsics) -> String {
    let f = CalibrationFile { version: FORMAT_VERSION, fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy, width: k.width, height: k.height };
    toml::to_string(&f).expect("plain struct serializes")
}

pub fn calibration_from_toml(text: &str, path: &Path) -> Result<CameraIntrinsics, BenchError> {
    let f: CalibrationFile = from_toml(text, path)?;
    check_version(f.version, path)?;
    CameraIntrinsics::new(f.fx, f.fy, f.cx, f.cy, f.width, f.height).map_err(|e| BenchError::schema(path, e.to_string()))
}

pub fn markers_to_toml(m: &MarkerMap) -> String {
    let f = MarkerFile {
        version: FORMAT_VERSION,
        marker: m.markers.iter().map(|(&id, p)| MarkerEntry { id, position: [p.x, p.y, p.z] }).collect(),
    };
    toml::to_string(&f).expect("plain struct serializes")
}

pub fn markers_from_toml(text: &str, path: &Path) -> Result<MarkerMap, BenchError> {
    let f: MarkerFile = from_toml(text, path)?;
    check_version(f.version, path)?;
    let mut map = MarkerMap::default();
    for m in f.marker {
        if !m.position.iter().all(|v| v.is_finite()) {
            return Err(BenchError::schema(path, format!("marker {} has a non-finite position", m.id)));
        }
        if map.markers.insert(m.id, Vector3::from(m.position)).is_some() {
            return Err(BenchError::schema(path, format!("duplicate marker id {}", m.id)));
        }
    }
    Ok(map)
}

pub fn read_calibration(path: &Path) -> Result<CameraIntrinsics, BenchError> {
    calibration_from_toml(&read_to_string(path)?, path)
}

pub fn read_markers(path: &Path) -> Result<MarkerMap, BenchError> {
    markers_from_toml(&read_to_string(path)?, path)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

/// Writes with `f` into a buffered file.
pub fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), BenchError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| BenchError::io(path, e))
}

/// Reads with `f` from a buffered file.
pub fn read_with<T>(
    path: &Path,
    f: impl FnOnce(BufReader<File>, &Path) -> Result<T, BenchError>,
) -> Result<T, BenchError> {
    f(open(path)?, path)
}
