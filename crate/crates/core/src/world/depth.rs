use rand::Rng;
use rand_distr::StandardNormal;

use super::thermal::Intrinsics;
use crate::frames::{OccupancyGrid, Pose};

const MAX_DEPTH: f64 = 2000.0;

/// Per-pixel range along the viewing ray with an unknown global scale.
/// Pixels that see no surface hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f32>,
    pub intrinsics: Intrinsics,
    pub camera_pose: Pose,
}

impl DepthImage {
    /// Depth at the pixel nearest `(u, v)`.
    pub fn depth_at(&self, u: f64, v: f64) -> Option<f64> {
        if !self.intrinsics.in_image(u, v) {
            return None;
        }
        let (iu, iv) = (u.round() as usize, v.round() as usize);
        let d = self.depth[iv * self.width + iu];
        d.is_finite().then_some(d as f64)
    }
}

/// Ray-cast depth times `distortion`, with multiplicative Gaussian noise of
/// relative sigma `noise_sigma`.
pub fn scaled_depth<R: Rng>(
    grid: &OccupancyGrid,
    camera: &Pose,
    intr: &Intrinsics,
    distortion: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> DepthImage {
    let mut depth = Vec::with_capacity(intr.width * intr.height);
    for v in 0..intr.height {
        for u in 0..intr.width {
            let ray = intr.back_project(camera, u as f64, v as f64);
            let d = match grid.raycast(&camera.position, &ray, MAX_DEPTH) {
                Some(hit) => {
                    let noise = if noise_sigma > 0.0 {
                        let w: f64 = rng.sample(StandardNormal);
                        1.0 + noise_sigma * w
                    } else {
                        1.0
                    };
                    (hit.range * distortion * noise) as f32
                }
                None => f32::NAN,
            };
            depth.push(d);
        }
    }
    DepthImage { width: intr.width, height: intr.height, depth, intrinsics: *intr, camera_pose: *camera }
}

/// Inter-camera distance as reported alongside a depth image with the given distortion.
pub fn reported_baseline(a: &Pose, b: &Pose, distortion: f64) -> f64 {
    a.position.distance(&b.position) * distortion
}

/// Scale distortion drawn log-uniformly from `[lo, hi]`.
pub fn draw_distortion<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.random_range(lo.ln()..hi.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::EnuPoint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ground() -> OccupancyGrid {
        let mut g = OccupancyGrid::empty(EnuPoint::new(-100.0, -100.0, -2.0), 1.0, [200, 200, 30]).unwrap();
        for i in 0..200 {
            for j in 0..200 {
                g.set(i, j, 0, true);
                g.set(i, j, 1, true);
            }
        }
        g
    }

    fn small() -> Intrinsics {
        Intrinsics::from_hfov(64, 48, 45.0)
    }

    #[test]
    fn unit_distortion_is_metric() {
        let cam = Pose::look_at(EnuPoint::new(0.0, 0.0, 20.0), EnuPoint::new(0.0, 40.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = scaled_depth(&ground(), &cam, &small(), 1.0, 0.0, &mut rng);
        let center = d.depth_at(32.0, 24.0).unwrap();
        assert!((center - 20f64.hypot(40.0)).abs() < 1e-4);
    }

    #[test]
    fn distortion_scales_depth_and_baseline_together() {
        let cam = Pose::look_at(EnuPoint::new(0.0, 0.0, 20.0), EnuPoint::new(0.0, 40.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = scaled_depth(&ground(), &cam, &small(), 1.0, 0.0, &mut rng);
        let b = scaled_depth(&ground(), &cam, &small(), 2.0, 0.0, &mut rng);
        for (x, y) in a.depth.iter().zip(&b.depth) {
            assert!(x.is_nan() && y.is_nan() || (y - 2.0 * x).abs() < 1e-3);
        }
        let other = Pose::look_at(EnuPoint::new(5.0, 0.0, 20.0), EnuPoint::new(0.0, 40.0, 0.0));
        assert!((reported_baseline(&cam, &other, 2.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sky_pixels_are_undefined() {
        let cam = Pose::new(EnuPoint::new(0.0, 0.0, 20.0), 0.0, 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = scaled_depth(&ground(), &cam, &small(), 1.0, 0.0, &mut rng);
        assert!(d.depth_at(32.0, 24.0).is_none());
    }

    #[test]
    fn distortion_draws_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let s = draw_distortion(&mut rng, 0.5, 2.0);
            assert!((0.5..=2.0).contains(&s));
        }
    }
}
