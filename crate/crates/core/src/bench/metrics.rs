//! Detection rate and translation error.

use std::collections::HashMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::camera::Pose;
use crate::event::Micros;
use crate::sim::Annotation;

/// Decoded pixels `(x, y, id)` of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameDecodes {
    pub t: Micros,
    pub pixels: Vec<(u16, u16, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRate {
    pub rate: f64,
    pub boxes: usize,
    pub hits: usize,
    /// Annotations with no frame within the matching tolerance.
    pub unmatched: usize,
}

/// Fraction of annotated boxes that contain at least one decoded pixel with
/// the box's marker ID.
///
/// Each annotation is matched to the frame with the nearest timestamp;
/// annotations farther than `tolerance_us` from every frame are not
/// evaluated (normally half the annotation period, so each frame is matched
/// with the annotation tick it coincides with).
pub fn detection_rate(
    frames: &[FrameDecodes],
    annotations: &[Annotation],
    tolerance_us: Micros,
) -> Result<DetectionRate, BenchError> {
    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.sort_by_key(|&i| frames[i].t);
    let times: Vec<Micros> = order.iter().map(|&i| frames[i].t).collect();
    // per frame: id -> pixels
    let index: Vec<HashMap<u64, Vec<(u16, u16)>>> = frames
        .iter()
        .map(|f| {
            let mut m: HashMap<u64, Vec<(u16, u16)>> = HashMap::new();
            for &(x, y, id) in &f.pixels {
                m.entry(id).or_default().push((x, y));
            }
            m
        })
        .collect();

    let (mut boxes, mut hits, mut unmatched) = (0, 0, 0);
    for a in annotations {
        let Some(j) = nearest(&times, a.t).filter(|&j| times[j].abs_diff(a.t) <= tolerance_us) else {
            unmatched += 1;
            continue;
        };
        boxes += 1;
        let hit = index[order[j]]
            .get(&a.id)
            .is_some_and(|px| px.iter().any(|&(x, y)| a.bbox.contains(x, y)));
        hits += usize::from(hit);
    }
    if boxes == 0 {
        return Err(BenchError::Metric("no annotations".into()));
    }
    Ok(DetectionRate { rate: hits as f64 / boxes as f64, boxes, hits, unmatched })
}

/// Index of the value closest to `t` in sorted `times`; ties go to the
/// earlier one.
fn nearest(times: &[Micros], t: Micros) -> Option<usize> {
    if times.is_empty() {
        return None;
    }
    let i = times.partition_point(|&x| x < t);
    if i == 0 {
        return Some(0);
    }
    if i == times.len() {
        return Some(i - 1);
    }
    Some(if t - times[i - 1] <= times[i] - t { i - 1 } else { i })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseErrors {
    pub mean: f64,
    pub median: f64,
    /// `(t, L1 error)` per estimate, in input order.
    pub per_frame: Vec<(Micros, f64)>,
}

/// L1 distance between estimated and ground-truth camera positions, with
/// ground truth linearly interpolated to each estimate's timestamp.
pub fn pose_error(estimates: &[(Micros, Vector3<f64>)], gt: &[(Micros, Pose)]) -> Result<PoseErrors, BenchError> {
    if estimates.is_empty() {
        return Err(BenchError::Metric("no localized frames".into()));
    }
    let mut per_frame = Vec::with_capacity(estimates.len());
    for (t, est) in estimates {
        let truth = interpolate_position(gt, *t)
            .ok_or_else(|| BenchError::Metric(format!("no ground truth around t = {t} us")))?;
        per_frame.push((*t, (est - truth).abs().sum()));
    }
    let mut sorted: Vec<f64> = per_frame.iter().map(|e| e.1).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    Ok(PoseErrors { mean, median, per_frame })
}

/// Camera position at `t` from time-sorted samples, `None` outside their
/// span.
pub fn interpolate_position(gt: &[(Micros, Pose)], t: Micros) -> Option<Vector3<f64>> {
    let i = gt.partition_point(|(s, _)| *s < t);
    let (tb, b) = gt.get(i)?;
    if *tb == t {
        return Some(b.translation);
    }
    let (ta, a) = gt.get(i.checked_sub(1)?)?;
    let s = (t - ta) as f64 / (tb - ta) as f64;
    Some(a.translation.lerp(&b.translation, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::BBox;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ann(t: Micros, id: u64, x: u16, y: u16) -> Annotation {
        Annotation { t, id, bbox: BBox { x_min: x, y_min: y, x_max: x + 4, y_max: y + 4 } }
    }

    #[test]
    fn ratio_of_hit_boxes() {
        let anns: Vec<_> = (0..10).map(|i| ann(1000, i, 10 * i as u16, 0)).collect();
        let all = FrameDecodes { t: 1000, pixels: (0..10).map(|i| (10 * i as u16 + 2, 2, i)).collect() };
        assert_eq!(detection_rate(&[all.clone()], &anns, 0).unwrap().rate, 1.0);
        let mut nine = all;
        nine.pixels.pop();
        let dr = detection_rate(&[nine], &anns, 0).unwrap();
        assert_eq!((dr.hits, dr.boxes), (9, 10));
        assert!((dr.rate - 0.9).abs() < 1e-15);
    }

    #[test]
    fn wrong_id_inside_box_is_a_miss() {
        let f = FrameDecodes { t: 0, pixels: vec![(2, 2, 8), (50, 50, 7)] };
        assert_eq!(detection_rate(&[f], &[ann(0, 7, 0, 0)], 0).unwrap().rate, 0.0);
    }

    #[test]
    fn nearest_frame_within_tolerance() {
        let frames = [
            FrameDecodes { t: 25_000, pixels: vec![(1, 1, 3)] },
            FrameDecodes { t: 50_000, pixels: vec![] },
        ];
        let anns = [ann(25_000, 3, 0, 0), ann(29_000, 3, 0, 0), ann(49_000, 3, 0, 0), ann(33_333, 3, 0, 0)];
        let dr = detection_rate(&frames, &anns, 4166).unwrap();
        assert_eq!((dr.boxes, dr.hits, dr.unmatched), (3, 2, 1));
    }

    #[test]
    fn no_annotations_is_an_error() {
        let e = detection_rate(&[FrameDecodes::default()], &[], 10).unwrap_err();
        assert!(e.to_string().contains("no annotations"));
        assert!(detection_rate(&[], &[ann(0, 1, 0, 0)], 10).is_err());
    }

    /// Double loop over boxes and decoded pixels.
    fn brute_force(frames: &[FrameDecodes], anns: &[Annotation], tol: Micros) -> (usize, usize) {
        let (mut boxes, mut hits) = (0, 0);
        for a in anns {
            let mut best: Option<&FrameDecodes> = None;
            for f in frames {
                let d = f.t.abs_diff(a.t);
                if d <= tol && best.is_none_or(|b| d < b.t.abs_diff(a.t) || (d == b.t.abs_diff(a.t) && f.t < b.t)) {
                    best = Some(f);
                }
            }
            let Some(f) = best else { continue };
            boxes += 1;
            let mut hit = false;
            for &(x, y, id) in &f.pixels {
                if id == a.id && a.bbox.contains(x, y) {
                    hit = true;
                }
            }
            hits += usize::from(hit);
        }
        (boxes, hits)
    }

    #[test]
    fn matches_brute_force_on_random_fixtures() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frames: Vec<FrameDecodes> = (1..=10)
                .map(|k| FrameDecodes {
                    t: k * 25_000,
                    pixels: (0..2000)
                        .map(|_| (rng.random_range(0..200), rng.random_range(0..100), rng.random_range(0..8)))
                        .collect(),
                })
                .collect();
            let anns: Vec<Annotation> = (0..1000)
                .map(|_| ann(rng.random_range(0..280_000), rng.random_range(0..8), rng.random_range(0..196), rng.random_range(0..96)))
                .collect();
            let dr = detection_rate(&frames, &anns, 4166).unwrap();
            assert_eq!((dr.boxes, dr.hits), brute_force(&frames, &anns, 4166));
        }
    }

    #[test]
    fn l1_errors() {
        let gt = vec![(0, Pose::identity()), (10_000, Pose::from_translation(Vector3::new(1.0, 0.0, 0.0)))];
        let exact = pose_error(&[(5000, Vector3::new(0.5, 0.0, 0.0))], &gt).unwrap();
        assert!(exact.mean.abs() < 1e-15);
        let off = pose_error(&[(0, Vector3::new(0.1, -0.2, 0.0))], &gt).unwrap();
        assert!((off.mean - 0.3).abs() < 1e-12);
        assert!(pose_error(&[], &gt).is_err());
        assert!(pose_error(&[(10_001, Vector3::zeros())], &gt).is_err());
    }

    #[test]
    fn mean_and_median() {
        let gt = vec![(0, Pose::identity()), (100, Pose::identity())];
        let est: Vec<_> = [0.1, 0.2, 0.9].iter().enumerate().map(|(i, &e)| (i as u64, Vector3::new(e, 0.0, 0.0))).collect();
        let r = pose_error(&est, &gt).unwrap();
        assert!((r.mean - 0.4).abs() < 1e-12);
        assert!((r.median - 0.2).abs() < 1e-15);
    }
}
