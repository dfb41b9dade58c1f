use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::event::{Event, Micros};
use crate::protocol::{decode_intervals, DecodedId, ProtocolConfig};
use crate::sim::BBox;
use crate::timemap::TimeMap;

/// Decoded IDs per pixel, keyed by `(x, y)`.
pub type DecodedPixels = BTreeMap<(u16, u16), Vec<DecodedId>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: u64,
    pub center: Point2<f64>,
    pub bbox: BBox,
    pub pixel_count: usize,
    /// Every pixel of the component, sorted.
    pub pixels: Vec<(u16, u16)>,
    pub t: Micros,
}

/// Runs the positive events of a window through a fresh time map and
/// decodes the accepted rising edges of every pixel.
///
/// `positions` optionally replaces each event's pixel with a warped,
/// real-valued location, rounded to the nearest pixel; events mapped outside
/// the sensor (or to `None`) are skipped. Events must be time-sorted.
pub fn decode_pixels(
    events: &[Event],
    positions: Option<&[Option<Point2<f64>>]>,
    width: u16,
    height: u16,
    cfg: &ProtocolConfig,
) -> DecodedPixels {
    if let Some(p) = positions {
        assert_eq!(p.len(), events.len(), "one position per event");
    }
    let tb = cfg.base_period_us();
    let mut map = TimeMap::new(width, height);
    let mut edges: BTreeMap<(u16, u16), Vec<Micros>> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        if !e.p.is_positive() {
            continue;
        }
        let (x, y) = match positions {
            None => (e.x, e.y),
            Some(p) => match p[i] {
                Some(q) => {
                    let (x, y) = (q.x.round(), q.y.round());
                    if !(x >= 0.0 && y >= 0.0 && x < f64::from(width) && y < f64::from(height)) {
                        continue;
                    }
                    (x as u16, y as u16)
                }
                None => continue,
            },
        };
        if map.update(x, y, e.t, tb, cfg.tau_us).expect("pixel is in bounds") {
            edges.entry((x, y)).or_default().push(e.t);
        }
    }
    edges
        .into_iter()
        .filter_map(|(px, ts)| {
            let ids = decode_intervals(&ts, cfg);
            (!ids.is_empty()).then_some((px, ids))
        })
        .collect()
}

/// Groups decoded pixels into 8-connected components per ID. A pixel that
/// decoded several IDs joins one component for each.
pub fn cluster_detections(decoded: &DecodedPixels, t_frame: Micros) -> Vec<Detection> {
    let mut by_id: BTreeMap<u64, BTreeSet<(u16, u16)>> = BTreeMap::new();
    for (&px, ids) in decoded {
        for d in ids {
            by_id.entry(d.id).or_default().insert(px);
        }
    }
    let mut out = Vec::new();
    for (id, mut remaining) in by_id {
        while let Some(&seed) = remaining.iter().next() {
            remaining.remove(&seed);
            let mut component = vec![seed];
            let mut stack = vec![seed];
            while let Some((x, y)) = stack.pop() {
                for dy in -1i32..=1 {
                    for dx in -1i32..=1 {
                        let (nx, ny) = (i32::from(x) + dx, i32::from(y) + dy);
                        if nx < 0 || ny < 0 || nx > i32::from(u16::MAX) || ny > i32::from(u16::MAX) {
                            continue;
                        }
                        let n = (nx as u16, ny as u16);
                        if remaining.remove(&n) {
                            component.push(n);
                            stack.push(n);
                        }
                    }
                }
            }
            component.sort_unstable();
            let count = component.len() as f64;
            let (sx, sy) = component
                .iter()
                .fold((0.0, 0.0), |(a, b), &(x, y)| (a + f64::from(x), b + f64::from(y)));
            out.push(Detection {
                id,
                center: Point2::new(sx / count, sy / count),
                bbox: BBox::around(&component).expect("non-empty component"),
                pixel_count: component.len(),
                pixels: component,
                t: t_frame,
            });
        }
    }
    out
}
