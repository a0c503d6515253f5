//! Heat-source detection, keyframe gating, two-view localization, track
//! fusion and water-jet segmentation.

mod image_ops;
mod jet;
mod tracks;

use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use image_ops::{components, Mask};
pub use jet::{detect_jet, jet_landing_enu, JetObservation, CORRIDOR_HALF_WIDTH_PX, MIN_JET_PIXELS};
pub use tracks::{LocalizedFire, TrackConfig, TrackStore};

use crate::frames::{EnuPoint, Pose};
use crate::world::{DepthImage, Intrinsics, ThermalImage};

pub const DEFAULT_THRESHOLD_C: f64 = 80.0;
pub const DEFAULT_MIN_AREA: usize = 4;
pub const DEFAULT_KEYFRAME_DISTANCE: f64 = 5.0;
pub const MAX_SKEW_GAP: f64 = 2.0;
pub const MIN_RAY_ANGLE_DEG: f64 = 0.2;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PerceptionError {
    #[error("keyframe rays are near-parallel or the baseline is too short")]
    DegenerateBaseline,
    #[error("no depth at pixel ({0:.1}, {1:.1})")]
    MissingDepth(f64, f64),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatDetection {
    /// `(u_min, v_min, u_max, v_max)`, inclusive.
    pub bbox: (usize, usize, usize, usize),
    pub peak_temp: f64,
    pub centroid: (f64, f64),
    pub area: usize,
}

struct Blob {
    bbox: (usize, usize, usize, usize),
    pixels: Vec<(usize, usize)>,
}

fn boxes_intersect(a: &(usize, usize, usize, usize), b: &(usize, usize, usize, usize)) -> bool {
    a.0 <= b.2 && b.0 <= a.2 && a.1 <= b.3 && b.1 <= a.3
}

fn hull(a: &(usize, usize, usize, usize), b: &(usize, usize, usize, usize)) -> (usize, usize, usize, usize) {
    (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3))
}

fn bbox_of(pixels: &[(usize, usize)]) -> (usize, usize, usize, usize) {
    pixels.iter().fold((usize::MAX, usize::MAX, 0, 0), |b, &(u, v)| (b.0.min(u), b.1.min(v), b.2.max(u), b.3.max(v)))
}

/// Merge intersecting boxes until no two intersect.
pub fn merge_boxes(mut boxes: Vec<(usize, usize, usize, usize)>) -> Vec<(usize, usize, usize, usize)> {
    loop {
        let mut merged = false;
        'outer: for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes_intersect(&boxes[i], &boxes[j]) {
                    boxes[i] = hull(&boxes[i], &boxes[j]);
                    boxes.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            boxes.sort_by_key(|b| (b.1, b.0));
            return boxes;
        }
    }
}

/// Threshold, label, merge overlapping boxes and summarize hot regions.
pub fn detect_heat(img: &ThermalImage, threshold: f64) -> Vec<HeatDetection> {
    detect_heat_with(img, threshold, DEFAULT_MIN_AREA)
}

pub fn detect_heat_with(img: &ThermalImage, threshold: f64, min_area: usize) -> Vec<HeatDetection> {
    let thr = threshold as f32;
    let mask = Mask { width: img.width, height: img.height, bits: img.temps.iter().map(|&t| t >= thr).collect() };
    let mut blobs: Vec<Blob> = components(&mask)
        .into_iter()
        .map(|pixels| Blob { bbox: bbox_of(&pixels), pixels })
        .collect();

    loop {
        let mut merged = false;
        'outer: for i in 0..blobs.len() {
            for j in i + 1..blobs.len() {
                if boxes_intersect(&blobs[i].bbox, &blobs[j].bbox) {
                    let other = blobs.swap_remove(j);
                    blobs[i].bbox = hull(&blobs[i].bbox, &other.bbox);
                    blobs[i].pixels.extend(other.pixels);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut out: Vec<HeatDetection> = blobs
        .into_iter()
        .filter(|b| b.pixels.len() >= min_area)
        .map(|b| {
            let (mut sw, mut su, mut sv, mut peak) = (0.0, 0.0, 0.0, f64::NEG_INFINITY);
            for &(u, v) in &b.pixels {
                let t = img.at(u, v) as f64;
                sw += t;
                su += t * u as f64;
                sv += t * v as f64;
                peak = peak.max(t);
            }
            HeatDetection { bbox: b.bbox, peak_temp: peak, centroid: (su / sw, sv / sw), area: b.pixels.len() }
        })
        .collect();
    out.sort_by_key(|d| (d.bbox.1, d.bbox.0));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Keyframe {
    pub id: u64,
    pub image: Arc<ThermalImage>,
    pub gnss_pose: Pose,
    pub detections: Vec<HeatDetection>,
}

impl Keyframe {
    pub fn stamp(&self) -> f64 {
        self.image.stamp
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.image.intrinsics
    }

    pub fn ray(&self, det: &HeatDetection) -> Vector3<f64> {
        self.intrinsics().back_project(&self.gnss_pose, det.centroid.0, det.centroid.1)
    }
}

/// Keep a frame if there is no previous keyframe or it is at least `d_key` away.
pub fn keyframe_gate(last_kept: Option<&Pose>, current: &Pose, d_key: f64) -> bool {
    match last_kept {
        None => true,
        Some(p) => p.position.distance(&current.position) >= d_key,
    }
}

/// A single-shot fire position estimate from one localization step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FireCandidate {
    pub position: EnuPoint,
    /// Ray gap (triangulation) or depth-derived uncertainty, meters.
    pub covariance_m: f64,
    pub stamp: f64,
}

/// Closest points of two rays; returns `(midpoint, gap, angle_deg)`.
pub fn ray_midpoint(
    pa: &EnuPoint,
    da: &Vector3<f64>,
    pb: &EnuPoint,
    db: &Vector3<f64>,
) -> Option<(EnuPoint, f64, f64)> {
    let w0 = (*pa - *pb).vec();
    let (a, b, c) = (da.dot(da), da.dot(db), db.dot(db));
    let (d, e) = (da.dot(&w0), db.dot(&w0));
    let denom = a * c - b * b;
    if denom <= 1e-15 {
        return None;
    }
    let s = (b * e - c * d) / denom;
    let t = (a * e - b * d) / denom;
    let qa = *pa + da * s;
    let qb = *pb + db * t;
    let angle = da.angle(db).to_degrees();
    Some((EnuPoint::from((qa.vec() + qb.vec()) / 2.0), qa.distance(&qb), angle))
}

/// Triangulate detections seen in two keyframes.
///
/// Pairs are associated greedily by smallest ray gap (ties broken by the
/// inter-ray angle); pairs whose gap exceeds 2 m or whose rays meet behind
/// either camera are rejected.
pub fn triangulate_pair(a: &Keyframe, b: &Keyframe) -> Result<Vec<FireCandidate>, PerceptionError> {
    if a.gnss_pose.position.distance(&b.gnss_pose.position) < 1.0 {
        return Err(PerceptionError::DegenerateBaseline);
    }
    let stamp = a.stamp().max(b.stamp());
    let mut pairs = Vec::new();
    let mut degenerate = false;
    for (i, da) in a.detections.iter().enumerate() {
        let ra = a.ray(da);
        for (j, db) in b.detections.iter().enumerate() {
            let rb = b.ray(db);
            if ra.angle(&rb).to_degrees() < MIN_RAY_ANGLE_DEG {
                degenerate = true;
                continue;
            }
            let Some((mid, gap, angle)) = ray_midpoint(&a.gnss_pose.position, &ra, &b.gnss_pose.position, &rb) else {
                degenerate = true;
                continue;
            };
            let ahead = |p: &EnuPoint, r: &Vector3<f64>| (mid - *p).vec().dot(r) > 0.0;
            if gap <= MAX_SKEW_GAP && ahead(&a.gnss_pose.position, &ra) && ahead(&b.gnss_pose.position, &rb) {
                pairs.push((gap, angle, i, j, mid));
            }
        }
    }
    if pairs.is_empty() && degenerate {
        return Err(PerceptionError::DegenerateBaseline);
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then((x.2, x.3).cmp(&(y.2, y.3))));
    let (mut used_a, mut used_b) = (vec![false; a.detections.len()], vec![false; b.detections.len()]);
    let mut out = Vec::new();
    for (gap, _, i, j, mid) in pairs {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        out.push(FireCandidate { position: mid, covariance_m: gap, stamp });
    }
    Ok(out)
}

/// Metric fire positions from a scaled depth image, fixing the scale with the
/// GNSS-measured baseline.
pub fn localize_by_rescaled_depth(
    kf: &Keyframe,
    depth: &DepthImage,
    reported_baseline: f64,
    gnss_baseline: f64,
    depth_sigma: f64,
) -> Result<Vec<FireCandidate>, PerceptionError> {
    if !(reported_baseline > 0.0) {
        return Err(PerceptionError::InvalidInput("reported baseline must be positive"));
    }
    let s = gnss_baseline / reported_baseline;
    kf.detections
        .iter()
        .map(|det| {
            let (u, v) = det.centroid;
            let d = depth.depth_at(u, v).ok_or(PerceptionError::MissingDepth(u, v))?;
            let range = s * d;
            Ok(FireCandidate {
                position: kf.gnss_pose.position + kf.ray(det) * range,
                covariance_m: range * depth_sigma,
                stamp: kf.stamp(),
            })
        })
        .collect()
}

/// Fraction of the image's central `frac x frac` crop.
pub fn in_central_region(intr: &Intrinsics, u: f64, v: f64, frac: f64) -> bool {
    let (hw, hh) = (intr.width as f64 * frac / 2.0, intr.height as f64 * frac / 2.0);
    (u - intr.cx).abs() <= hw && (v - intr.cy).abs() <= hh
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank(w: usize, h: usize) -> ThermalImage {
        ThermalImage::uniform(Intrinsics::from_hfov(w, h, 45.0), 20.0, 0.0, Pose::new(EnuPoint::ORIGIN, 0.0, 0.0))
    }

    fn paint(img: &mut ThermalImage, u0: usize, v0: usize, u1: usize, v1: usize, t: f32) {
        for v in v0..=v1 {
            for u in u0..=u1 {
                img.set(u, v, t);
            }
        }
    }

    #[test]
    fn uniform_image_has_no_detections() {
        assert!(detect_heat(&blank(640, 512), 80.0).is_empty());
    }

    #[test]
    fn symmetric_block() {
        let mut img = blank(640, 512);
        paint(&mut img, 99, 99, 101, 101, 600.0);
        let dets = detect_heat(&img, 80.0);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].bbox, (99, 99, 101, 101));
        assert!((dets[0].centroid.0 - 100.0).abs() < 1e-9 && (dets[0].centroid.1 - 100.0).abs() < 1e-9);
        assert_eq!(dets[0].area, 9);
        assert_eq!(dets[0].peak_temp, 600.0);
    }

    #[test]
    fn overlapping_boxes_merge_to_hull() {
        let mut img = blank(100, 100);
        // an L shape and a bar whose boxes overlap without touching pixels
        paint(&mut img, 10, 10, 30, 12, 300.0);
        paint(&mut img, 10, 13, 12, 30, 300.0);
        paint(&mut img, 20, 20, 40, 22, 300.0);
        let dets = detect_heat(&img, 80.0);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].bbox, (10, 10, 40, 30));
    }

    #[test]
    fn small_blobs_dropped() {
        let mut img = blank(50, 50);
        paint(&mut img, 5, 5, 6, 5, 300.0);
        assert!(detect_heat(&img, 80.0).is_empty());
    }

    #[test]
    fn translation_equivariance() {
        let mut a = blank(200, 200);
        let mut b = blank(200, 200);
        paint(&mut a, 40, 50, 47, 55, 500.0);
        paint(&mut b, 53, 61, 60, 66, 500.0);
        let (da, db) = (detect_heat(&a, 80.0), detect_heat(&b, 80.0));
        assert_eq!(da.len(), 1);
        let (ba, bb) = (da[0].bbox, db[0].bbox);
        assert_eq!((ba.0 + 13, ba.1 + 11, ba.2 + 13, ba.3 + 11), bb);
    }

    #[test]
    fn keyframe_gate_boundary() {
        let p = |e: f64| Pose::new(EnuPoint::new(e, 0.0, 0.0), 0.0, 0.0);
        assert!(keyframe_gate(None, &p(0.0), 5.0));
        assert!(!keyframe_gate(Some(&p(0.0)), &p(4.99), 5.0));
        assert!(keyframe_gate(Some(&p(0.0)), &p(5.0), 5.0));
    }

    fn keyframe_looking_at(pos: EnuPoint, target: EnuPoint, id: u64) -> Keyframe {
        let pose = Pose::look_at(pos, target);
        let intr = Intrinsics::default();
        let (u, v) = intr.project(&pose, &target).unwrap();
        let det = HeatDetection { bbox: (0, 0, 1, 1), peak_temp: 500.0, centroid: (u, v), area: 4 };
        Keyframe {
            id,
            image: Arc::new(ThermalImage::uniform(intr, 20.0, id as f64, pose)),
            gnss_pose: pose,
            detections: vec![det],
        }
    }

    #[test]
    fn exact_intersection() {
        let target = EnuPoint::new(2.5, 40.0, 0.0);
        let a = keyframe_looking_at(EnuPoint::ORIGIN, target, 0);
        let b = keyframe_looking_at(EnuPoint::new(5.0, 0.0, 0.0), target, 1);
        let c = triangulate_pair(&a, &b).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].position.distance(&target) < 1e-6);
        assert!(c[0].covariance_m < 1e-6);
    }

    #[test]
    fn parallel_rays_are_degenerate() {
        let a = keyframe_looking_at(EnuPoint::ORIGIN, EnuPoint::new(0.0, 4000.0, 0.0), 0);
        let b = keyframe_looking_at(EnuPoint::new(5.0, 0.0, 0.0), EnuPoint::new(5.0, 4000.0, 0.0), 1);
        assert_eq!(triangulate_pair(&a, &b), Err(PerceptionError::DegenerateBaseline));
        let near = keyframe_looking_at(EnuPoint::new(0.5, 0.0, 0.0), EnuPoint::new(2.5, 40.0, 0.0), 1);
        assert_eq!(triangulate_pair(&a, &near), Err(PerceptionError::DegenerateBaseline));
    }

    #[test]
    fn central_region_is_half_crop() {
        let intr = Intrinsics::default();
        assert!(in_central_region(&intr, 320.0, 256.0, 0.5));
        assert!(in_central_region(&intr, 480.0, 384.0, 0.5));
        assert!(!in_central_region(&intr, 481.0, 256.0, 0.5));
    }
}
