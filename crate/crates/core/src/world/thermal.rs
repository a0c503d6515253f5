use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::FireSource;
use crate::frames::{EnuPoint, OccupancyGrid, Pose};

/// Pinhole intrinsics. Integer pixel coordinates address pixel centers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn from_hfov(width: usize, height: usize, hfov_deg: f64) -> Self {
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self { width, height, fx: f, fy: f, cx: width as f64 / 2.0, cy: height as f64 / 2.0 }
    }

    /// 640x512 thermal sensor with a 45° horizontal field of view.
    pub fn default_thermal() -> Self {
        Self::from_hfov(640, 512, 45.0)
    }

    /// Pixel coordinates of `p`, or `None` behind the camera.
    pub fn project(&self, camera: &Pose, p: &EnuPoint) -> Option<(f64, f64)> {
        let rel = (*p - camera.position).vec();
        let z = rel.dot(&camera.forward());
        if z <= 1e-9 {
            return None;
        }
        Some((
            self.cx + self.fx * rel.dot(&camera.right()) / z,
            self.cy + self.fy * rel.dot(&camera.down()) / z,
        ))
    }

    /// Unit ENU ray through pixel `(u, v)`.
    pub fn back_project(&self, camera: &Pose, u: f64, v: f64) -> Vector3<f64> {
        let x = (u - self.cx) / self.fx;
        let y = (v - self.cy) / self.fy;
        (camera.forward() + camera.right() * x + camera.down() * y).normalize()
    }

    pub fn in_image(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && v >= -0.5 && u < self.width as f64 - 0.5 && v < self.height as f64 - 0.5
    }
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self::default_thermal()
    }
}

/// Radiometric image in °C, row major.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermalImage {
    pub width: usize,
    pub height: usize,
    pub temps: Vec<f32>,
    pub intrinsics: Intrinsics,
    pub stamp: f64,
    pub camera_pose: Pose,
}

impl ThermalImage {
    pub fn uniform(intrinsics: Intrinsics, temp: f32, stamp: f64, camera_pose: Pose) -> Self {
        Self {
            width: intrinsics.width,
            height: intrinsics.height,
            temps: vec![temp; intrinsics.width * intrinsics.height],
            intrinsics,
            stamp,
            camera_pose,
        }
    }

    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.temps[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, t: f32) {
        self.temps[v * self.width + u] = t;
    }

    /// Hottest pixel as `(u, v, temp)`.
    pub fn hottest(&self) -> (usize, usize, f32) {
        let (idx, t) = self
            .temps
            .iter()
            .enumerate()
            .fold((0, f32::NEG_INFINITY), |best, (i, &t)| if t > best.1 { (i, t) } else { best });
        (idx % self.width, idx / self.width, t)
    }

    /// Binary 16-bit PGM with temperatures in centi-degrees Celsius.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        out.reserve(self.temps.len() * 2);
        for &t in &self.temps {
            let c = (t as f64 * 100.0).round().clamp(0.0, 65535.0) as u16;
            out.extend_from_slice(&c.to_be_bytes());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermalConfig {
    pub ambient_c: f64,
    pub water_temp_c: f64,
    pub noise_sigma_c: f64,
    /// Half-width of the rendered jet stroke in pixels.
    pub jet_half_width_px: f64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        Self { ambient_c: 20.0, water_temp_c: 12.0, noise_sigma_c: 0.5, jet_half_width_px: 2.0 }
    }
}

/// Angular standard deviation of a fire's splat, radians.
pub fn splat_sigma(radius: f64, range: f64) -> f64 {
    0.5 * (radius / range).atan()
}

/// Point on a fire used for line-of-sight tests (flames sit above the ground).
pub fn fire_sight_point(fire: &FireSource) -> EnuPoint {
    fire.position + EnuPoint::new(0.0, 0.0, 0.5)
}

pub fn fire_visible(grid: &OccupancyGrid, from: &EnuPoint, fire: &FireSource) -> bool {
    let aim = fire_sight_point(fire);
    grid.segment_hit(from, &aim).is_none()
}

/// Render the scene seen from `camera`.
///
/// Fires contribute Gaussian angular splats of `(temperature - ambient) *
/// intensity` when their sight point is in line of sight; the active jet is
/// painted at water temperature on top. Noise is added when `rng` is given
/// and the configured sigma is positive.
#[allow(clippy::too_many_arguments)]
pub fn render_scene<R: Rng>(
    grid: &OccupancyGrid,
    fires: &[FireSource],
    jet: Option<&[EnuPoint]>,
    camera: &Pose,
    intr: &Intrinsics,
    cfg: &ThermalConfig,
    stamp: f64,
    rng: Option<&mut R>,
) -> ThermalImage {
    let mut img = ThermalImage::uniform(*intr, cfg.ambient_c as f32, stamp, *camera);

    for fire in fires {
        let peak = (fire.temperature - cfg.ambient_c) * fire.intensity;
        if peak == 0.0 || !fire_visible(grid, &camera.position, fire) {
            continue;
        }
        let to_fire = (fire.position - camera.position).vec();
        let range = to_fire.norm();
        let dir = to_fire / range;
        let sigma = splat_sigma(fire.radius, range);
        splat(&mut img, camera, intr, &dir, sigma, peak);
    }

    if let Some(polyline) = jet {
        paint_polyline(&mut img, grid, camera, intr, polyline, cfg);
    }

    if let Some(rng) = rng {
        if cfg.noise_sigma_c > 0.0 {
            let s = cfg.noise_sigma_c as f32;
            for t in &mut img.temps {
                let w: f32 = rng.sample(StandardNormal);
                *t += s * w;
            }
        }
    }
    img
}

fn splat(img: &mut ThermalImage, camera: &Pose, intr: &Intrinsics, dir: &Vector3<f64>, sigma: f64, peak: f64) {
    let z = dir.dot(&camera.forward());
    let cut = 4.0 * sigma;
    if z <= 1e-6 {
        return;
    }
    let uc = intr.cx + intr.fx * dir.dot(&camera.right()) / z;
    let vc = intr.cy + intr.fy * dir.dot(&camera.down()) / z;
    // pixel window covering the 4-sigma cone (with slack for off-axis stretch)
    let half = (cut.tan() * intr.fx.max(intr.fy) / (z * z).max(0.04) + 2.0).min(4000.0);
    let u0 = ((uc - half).floor().max(0.0)) as usize;
    let v0 = ((vc - half).floor().max(0.0)) as usize;
    let u1 = ((uc + half).ceil().min(intr.width as f64 - 1.0)).max(-1.0);
    let v1 = ((vc + half).ceil().min(intr.height as f64 - 1.0)).max(-1.0);
    if u1 < 0.0 || v1 < 0.0 {
        return;
    }
    let (u1, v1) = (u1 as usize, v1 as usize);
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for v in v0..=v1 {
        for u in u0..=u1 {
            let ray = intr.back_project(camera, u as f64, v as f64);
            let ang = ray.dot(dir).clamp(-1.0, 1.0).acos();
            if ang > cut {
                continue;
            }
            let add = peak * (-ang * ang * inv2s2).exp();
            let idx = v * img.width + u;
            img.temps[idx] += add as f32;
        }
    }
}

/// Visible portion of the jet polyline projected into the image.
pub fn project_polyline(
    grid: &OccupancyGrid,
    camera: &Pose,
    intr: &Intrinsics,
    polyline: &[EnuPoint],
) -> Vec<Option<(f64, f64)>> {
    polyline
        .iter()
        .map(|p| {
            let visible = grid.segment_hit(&camera.position, p).is_none_or(|h| h.range >= camera.position.distance(p) - 0.05);
            if visible {
                intr.project(camera, p)
            } else {
                None
            }
        })
        .collect()
}

fn paint_polyline(
    img: &mut ThermalImage,
    grid: &OccupancyGrid,
    camera: &Pose,
    intr: &Intrinsics,
    polyline: &[EnuPoint],
    cfg: &ThermalConfig,
) {
    let pts = project_polyline(grid, camera, intr, polyline);
    let water = cfg.water_temp_c as f32;
    for w in pts.windows(2) {
        if let (Some(a), Some(b)) = (w[0], w[1]) {
            for_each_stroke_pixel(intr, a, b, cfg.jet_half_width_px, |u, v| img.set(u, v, water));
        }
    }
}

/// Visit every pixel whose center lies within `half_width` of segment `a-b`.
pub fn for_each_stroke_pixel(intr: &Intrinsics, a: (f64, f64), b: (f64, f64), half_width: f64, mut f: impl FnMut(usize, usize)) {
    let lim = 1e5;
    if a.0.abs() > lim || a.1.abs() > lim || b.0.abs() > lim || b.1.abs() > lim {
        return;
    }
    let u0 = (a.0.min(b.0) - half_width).floor().max(0.0);
    let u1 = (a.0.max(b.0) + half_width).ceil().min(intr.width as f64 - 1.0);
    let v0 = (a.1.min(b.1) - half_width).floor().max(0.0);
    let v1 = (a.1.max(b.1) + half_width).ceil().min(intr.height as f64 - 1.0);
    if u1 < u0 || v1 < v0 {
        return;
    }
    let (du, dv) = (b.0 - a.0, b.1 - a.1);
    let len2 = du * du + dv * dv;
    for v in v0 as usize..=v1 as usize {
        for u in u0 as usize..=u1 as usize {
            let (pu, pv) = (u as f64 - a.0, v as f64 - a.1);
            let t = if len2 > 0.0 { ((pu * du + pv * dv) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let (eu, ev) = (pu - t * du, pv - t * dv);
            if eu * eu + ev * ev <= half_width * half_width {
                f(u, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn open_grid() -> OccupancyGrid {
        OccupancyGrid::empty(EnuPoint::new(-100.0, -100.0, -2.0), 1.0, [200, 200, 40]).unwrap()
    }

    fn fire_at(p: EnuPoint) -> FireSource {
        FireSource::new(p, 2.0, 600.0)
    }

    #[test]
    fn empty_scene_is_uniform_ambient() {
        let cam = Pose::new(EnuPoint::new(0.0, 0.0, 20.0), 0.0, -20.0);
        let img = render_scene::<ChaCha8Rng>(&open_grid(), &[], None, &cam, &Intrinsics::default(), &ThermalConfig::default(), 0.0, None);
        assert!(img.temps.iter().all(|&t| t == 20.0));
    }

    #[test]
    fn on_axis_fire_peaks_at_principal_point() {
        let fire = fire_at(EnuPoint::new(0.0, 40.0, 0.0));
        let cam = Pose::look_at(EnuPoint::new(0.0, 0.0, 20.0), fire.position);
        let intr = Intrinsics::default();
        let img = render_scene::<ChaCha8Rng>(&open_grid(), &[fire], None, &cam, &intr, &ThermalConfig::default(), 0.0, None);
        let (u, v, t) = img.hottest();
        assert!((u as f64 - intr.cx).abs() <= 1.0 && (v as f64 - intr.cy).abs() <= 1.0, "{u} {v}");
        assert!((t as f64 - 600.0).abs() < 1.0);
    }

    #[test]
    fn projection_round_trip() {
        let cam = Pose::new(EnuPoint::new(3.0, -2.0, 25.0), 33.0, -27.0);
        let intr = Intrinsics::default();
        let p = EnuPoint::new(20.0, 30.0, 1.0);
        let (u, v) = intr.project(&cam, &p).unwrap();
        let ray = intr.back_project(&cam, u, v);
        let expect = (p - cam.position).vec().normalize();
        assert!((ray - expect).norm() < 1e-12);
    }

    #[test]
    fn splat_is_linear_in_excess_temperature() {
        let cam = Pose::look_at(EnuPoint::new(0.0, 0.0, 20.0), EnuPoint::new(0.0, 40.0, 0.0));
        let intr = Intrinsics::default();
        let cfg = ThermalConfig::default();
        let render = |temp: f64| {
            let f = FireSource::new(EnuPoint::new(2.0, 40.0, 0.0), 2.0, temp);
            render_scene::<ChaCha8Rng>(&open_grid(), &[f], None, &cam, &intr, &cfg, 0.0, None)
        };
        let (a, b) = (render(200.0), render(380.0));
        for (ta, tb) in a.temps.iter().zip(&b.temps) {
            let (ea, eb) = (*ta as f64 - 20.0, *tb as f64 - 20.0);
            assert!((eb - 2.0 * ea).abs() < 1e-3 * (1.0 + eb.abs()));
        }
    }

    #[test]
    fn pgm_header_and_size() {
        let img = ThermalImage::uniform(Intrinsics::from_hfov(4, 2, 45.0), 21.5, 0.0, Pose::new(EnuPoint::ORIGIN, 0.0, 0.0));
        let pgm = img.to_pgm();
        let header = b"P5\n4 2\n65535\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(pgm.len(), header.len() + 16);
        assert_eq!(u16::from_be_bytes([pgm[header.len()], pgm[header.len() + 1]]), 2150);
    }
}
