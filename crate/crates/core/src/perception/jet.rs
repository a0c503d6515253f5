use serde::{Deserialize, Serialize};

use super::image_ops::{components, Mask};
use crate::frames::EnuPoint;
use crate::world::{for_each_stroke_pixel, DepthImage, ThermalImage};

pub const CORRIDOR_HALF_WIDTH_PX: f64 = 10.0;
pub const MIN_JET_PIXELS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetObservation {
    /// Segmented pixels in raster order.
    pub mask: Vec<(usize, usize)>,
    pub landing_px: (usize, usize),
    pub landing_enu: Option<EnuPoint>,
    /// Fraction of the predicted polyline covered by the mask.
    pub confidence: f64,
}

fn corridor(img: &ThermalImage, polyline: &[(f64, f64)], half_width: f64) -> Mask {
    let mut m = Mask::new(img.width, img.height);
    for w in polyline.windows(2) {
        for_each_stroke_pixel(&img.intrinsics, w[0], w[1], half_width, |u, v| m.set(u, v, true));
    }
    m
}

/// Arc-length parameter of the point on `polyline` nearest `(u, v)`.
fn arc_param(polyline: &[(f64, f64)], u: f64, v: f64) -> f64 {
    let mut acc = 0.0;
    let mut best = (f64::INFINITY, 0.0);
    for w in polyline.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (du, dv) = (b.0 - a.0, b.1 - a.1);
        let len = du.hypot(dv);
        let t = if len > 0.0 { (((u - a.0) * du + (v - a.1) * dv) / (len * len)).clamp(0.0, 1.0) } else { 0.0 };
        let d = (u - a.0 - t * du).hypot(v - a.1 - t * dv);
        if d < best.0 {
            best = (d, acc + t * len);
        }
        acc += len;
    }
    best.1
}

/// Segment the water jet inside the corridor around its predicted image path.
pub fn detect_jet(img: &ThermalImage, predicted: &[(f64, f64)], water_band: (f64, f64)) -> Option<JetObservation> {
    if predicted.len() < 2 {
        return None;
    }
    let corridor = corridor(img, predicted, CORRIDOR_HALF_WIDTH_PX);
    let (lo, hi) = (water_band.0 as f32, water_band.1 as f32);
    let mut raw = Mask::new(img.width, img.height);
    for (idx, &t) in img.temps.iter().enumerate() {
        raw.bits[idx] = corridor.bits[idx] && t >= lo && t <= hi;
    }
    let cleaned = raw.erode(1).dilate(2).and(&corridor);
    let mut largest = components(&cleaned).into_iter().max_by_key(|c| c.len())?;
    if largest.len() < MIN_JET_PIXELS {
        return None;
    }
    largest.sort_by_key(|&(u, v)| (v, u));

    let landing_px = largest
        .iter()
        .map(|&(u, v)| (arc_param(predicted, u as f64, v as f64), (u, v)))
        .fold((f64::NEG_INFINITY, (0, 0)), |best, x| if x.0 > best.0 { x } else { best })
        .1;

    let mut on_path = Mask::new(img.width, img.height);
    for w in predicted.windows(2) {
        for_each_stroke_pixel(&img.intrinsics, w[0], w[1], 0.5, |u, v| on_path.set(u, v, true));
    }
    let path_len = on_path.count();
    let mut in_mask = Mask::new(img.width, img.height);
    for &(u, v) in &largest {
        in_mask.set(u, v, true);
    }
    let covered = on_path.and(&in_mask).count();
    let confidence = if path_len > 0 { covered as f64 / path_len as f64 } else { 0.0 };

    Some(JetObservation { mask: largest, landing_px, landing_enu: None, confidence })
}

/// Metric landing point seen through `depth`, rescaled by `scale`.
pub fn jet_landing_enu(obs: &JetObservation, depth: &DepthImage, scale: f64) -> Option<EnuPoint> {
    let (u, v) = (obs.landing_px.0 as f64, obs.landing_px.1 as f64);
    let d = depth.depth_at(u, v)?;
    let ray = depth.intrinsics.back_project(&depth.camera_pose, u, v);
    Some(depth.camera_pose.position + ray * (d * scale))
}
