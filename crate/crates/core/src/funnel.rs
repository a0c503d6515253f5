//! Obstacle-free flight funnel and observation-pose planning.
//!
//! The funnel is the union of a vertical cylinder around the start position
//! and an upward-opening inverse cone with the same apex column, clipped to a
//! floor and ceiling altitude and a maximum horizontal extent.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::frames::{bearing_deg, look_angles, EnuPoint, OccupancyGrid, Pose};

pub const DEFAULT_MIN_RADIUS: f64 = 2.0;
/// Ceiling above the funnel center when none is configured.
pub const DEFAULT_CEILING_HEIGHT: f64 = 120.0;
pub const DEFAULT_AZIMUTH_SAMPLES: usize = 360;
pub const DEFAULT_STANDOFF: f64 = 30.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FunnelError {
    #[error("funnel radius {radius:.2} m is below the minimum of {min_radius:.2} m")]
    FunnelTooSmall { radius: f64, min_radius: f64 },
    #[error("funnel floor {floor:.2} m is not below its ceiling {ceiling:.2} m")]
    EmptyAltitudeBand { floor: f64, ceiling: f64 },
    #[error("funnel center lies inside an obstacle")]
    CenterObstructed,
    #[error("no feasible observation pose along the view ray")]
    NoFeasiblePose,
    #[error("invalid planning input: {0}")]
    InvalidInput(&'static str),
}

/// Safe-flight volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlightFunnel {
    pub center: EnuPoint,
    pub cyl_radius: f64,
    pub cone_slope: f64,
    pub floor_alt: f64,
    pub ceiling_alt: f64,
    pub horizon: f64,
    pub safety_margin: f64,
}

/// Tunables for [`compute_funnel_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FunnelConfig {
    pub margin: f64,
    pub horizon: f64,
    /// Absolute ceiling altitude; `None` places it [`DEFAULT_CEILING_HEIGHT`] above the center.
    pub ceiling_alt: Option<f64>,
    pub min_radius: f64,
    pub azimuth_samples: usize,
}

impl Default for FunnelConfig {
    fn default() -> Self {
        Self {
            margin: 5.0,
            horizon: 100.0,
            ceiling_alt: None,
            min_radius: DEFAULT_MIN_RADIUS,
            azimuth_samples: DEFAULT_AZIMUTH_SAMPLES,
        }
    }
}

/// Compute the funnel around `center` with default ceiling and sampling.
pub fn compute_funnel(
    grid: &OccupancyGrid,
    center: EnuPoint,
    margin: f64,
    horizon: f64,
) -> Result<FlightFunnel, FunnelError> {
    compute_funnel_with(grid, center, &FunnelConfig { margin, horizon, ..FunnelConfig::default() })
}

/// Compute the funnel.
///
/// * Cylinder radius: distance to the nearest obstacle crossing the center
///   altitude (azimuth-sampled raycasts, tightened by an exact column scan),
///   minus the margin and capped at `horizon - margin`.
/// * Floor: the center altitude, raised to clear every column under the
///   cylinder by the margin.
/// * Cone slope: the smallest slope whose surface stays `margin` away from the
///   top edge of every column between the cylinder and the horizon.
pub fn compute_funnel_with(
    grid: &OccupancyGrid,
    center: EnuPoint,
    cfg: &FunnelConfig,
) -> Result<FlightFunnel, FunnelError> {
    let margin = cfg.margin;
    if !(margin >= 0.0) {
        return Err(FunnelError::InvalidInput("margin must be non-negative"));
    }
    if !(cfg.horizon > margin) {
        return Err(FunnelError::InvalidInput("horizon must exceed the margin"));
    }
    if grid.is_occupied_at(&center) {
        return Err(FunnelError::CenterObstructed);
    }

    let samples = cfg.azimuth_samples.max(1);
    let mut nearest = cfg.horizon;
    for s in 0..samples {
        let az = (s as f64 * 360.0 / samples as f64).to_radians();
        let dir = Vector3::new(az.sin(), az.cos(), 0.0);
        if let Some(hit) = grid.raycast(&center, &dir, cfg.horizon) {
            nearest = nearest.min(hit.range);
        }
    }

    let columns = scan_columns(grid, &center, cfg.horizon + margin);
    for col in &columns {
        if col.spans_center_alt {
            nearest = nearest.min(col.distance);
        }
    }

    let cyl_radius = nearest - margin;
    if cyl_radius < cfg.min_radius {
        return Err(FunnelError::FunnelTooSmall { radius: cyl_radius, min_radius: cfg.min_radius });
    }

    let mut floor_alt = center.u;
    let mut cone_slope: f64 = 0.0;
    for col in &columns {
        if col.distance < nearest {
            floor_alt = floor_alt.max(col.top + margin);
        } else {
            cone_slope = cone_slope.max(clearance_slope(col.distance, col.top - center.u, margin));
        }
    }

    let ceiling_alt = cfg.ceiling_alt.unwrap_or(center.u + DEFAULT_CEILING_HEIGHT);
    if !(floor_alt < ceiling_alt) {
        return Err(FunnelError::EmptyAltitudeBand { floor: floor_alt, ceiling: ceiling_alt });
    }

    Ok(FlightFunnel {
        center,
        cyl_radius,
        cone_slope,
        floor_alt,
        ceiling_alt,
        horizon: cfg.horizon,
        safety_margin: margin,
    })
}

/// Smallest slope `s` such that the line `u = s*d` stays at least `margin`
/// from the corner `(distance, rel_top)` and passes `margin` above it.
pub fn clearance_slope(distance: f64, rel_top: f64, margin: f64) -> f64 {
    if margin == 0.0 {
        return rel_top / distance;
    }
    let (d2, m2) = (distance * distance, margin * margin);
    (distance * rel_top + margin * (d2 + rel_top * rel_top - m2).sqrt()) / (d2 - m2)
}

struct Column {
    distance: f64,
    top: f64,
    spans_center_alt: bool,
}

fn scan_columns(grid: &OccupancyGrid, center: &EnuPoint, reach: f64) -> Vec<Column> {
    let [nx, ny, nz] = grid.dims();
    let cs = grid.cell_size();
    let origin = grid.origin();
    let center_layer = ((center.u - origin.u) / cs).floor();
    let center_layer = (center_layer >= 0.0 && center_layer < nz as f64).then_some(center_layer as usize);

    let mut out = Vec::new();
    for j in 0..ny {
        let n0 = origin.n + j as f64 * cs;
        let dn = axis_gap(center.n, n0, n0 + cs);
        if dn > reach {
            continue;
        }
        for i in 0..nx {
            let e0 = origin.e + i as f64 * cs;
            let de = axis_gap(center.e, e0, e0 + cs);
            let distance = de.hypot(dn);
            if distance > reach {
                continue;
            }
            // empty columns still sit on the solid region below the grid floor
            let top = grid.column_top(i, j).unwrap_or(origin.u);
            let spans_center_alt = center_layer.is_some_and(|k| grid.get(i, j, k));
            out.push(Column { distance, top, spans_center_alt });
        }
    }
    out
}

fn axis_gap(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

impl FlightFunnel {
    pub fn horizontal_distance(&self, p: &EnuPoint) -> f64 {
        p.horizontal_distance(&self.center)
    }

    /// Center column point at the floor altitude; always inside the funnel.
    pub fn anchor(&self) -> EnuPoint {
        self.center.with_u(self.floor_alt.max(self.center.u).min(self.ceiling_alt))
    }

    pub fn contains(&self, p: &EnuPoint) -> bool {
        if !(p.u >= self.floor_alt && p.u <= self.ceiling_alt) {
            return false;
        }
        let d = self.horizontal_distance(p);
        if d > self.horizon {
            return false;
        }
        d <= self.cyl_radius || (p.u - self.center.u) >= self.cone_slope * d
    }

    /// Nearest funnel point to `p` (identity for points already inside).
    ///
    /// The funnel is rotationally symmetric, so the nearest point lies in the
    /// vertical half-plane through `p`; there the cylinder and cone parts are
    /// convex polygons and the projection is exact.
    pub fn clamp_into(&self, p: &EnuPoint) -> EnuPoint {
        if self.contains(p) {
            return *p;
        }
        let rel = (p.e - self.center.e, p.n - self.center.n);
        let d0 = rel.0.hypot(rel.1);
        let axis = if d0 > 1e-12 { (rel.0 / d0, rel.1 / d0) } else { (1.0, 0.0) };
        let q = (d0, p.u);

        let cylinder = [
            (0.0, self.floor_alt),
            (self.cyl_radius, self.floor_alt),
            (self.cyl_radius, self.ceiling_alt),
            (0.0, self.ceiling_alt),
        ];
        let mut best = project_convex(&cylinder, q);
        let cone = self.cone_polygon();
        if cone.len() >= 3 {
            let c = project_convex(&cone, q);
            if dist2(c, q) < dist2(best, q) {
                best = c;
            }
        }

        let to_point = |(d, u): (f64, f64)| {
            if (d - d0).abs() <= 1e-12 * d0.max(1.0) {
                return p.with_u(u);
            }
            EnuPoint::new(self.center.e + axis.0 * d, self.center.n + axis.1 * d, u)
        };
        let mut out = to_point(best);
        let anchor = self.anchor();
        let mut frac = 1e-12;
        while !self.contains(&out) && frac < 1.0 {
            out = to_point(best) + (anchor - to_point(best)) * frac;
            frac *= 4.0;
        }
        if self.contains(&out) {
            out
        } else {
            anchor
        }
    }

    /// Cone part in the (horizontal distance, altitude) half-plane.
    fn cone_polygon(&self) -> Vec<(f64, f64)> {
        let boxed = [
            (0.0, self.floor_alt),
            (self.horizon, self.floor_alt),
            (self.horizon, self.ceiling_alt),
            (0.0, self.ceiling_alt),
        ];
        let g = |(d, u): (f64, f64)| u - self.center.u - self.cone_slope * d;
        let mut out = Vec::with_capacity(5);
        for idx in 0..boxed.len() {
            let a = boxed[idx];
            let b = boxed[(idx + 1) % boxed.len()];
            let (ga, gb) = (g(a), g(b));
            if ga >= 0.0 {
                out.push(a);
            }
            if (ga >= 0.0) != (gb >= 0.0) {
                let t = ga / (ga - gb);
                out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
            }
        }
        out
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Nearest point of a convex counter-clockwise polygon to `q`.
fn project_convex(poly: &[(f64, f64)], q: (f64, f64)) -> (f64, f64) {
    let inside = (0..poly.len()).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0) >= 0.0
    });
    if inside {
        return q;
    }
    let mut best = poly[0];
    let mut best_d = f64::INFINITY;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let ab = (b.0 - a.0, b.1 - a.1);
        let len2 = ab.0 * ab.0 + ab.1 * ab.1;
        let t = if len2 > 0.0 {
            (((q.0 - a.0) * ab.0 + (q.1 - a.1) * ab.1) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = (a.0 + t * ab.0, a.1 + t * ab.1);
        let d = dist2(c, q);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Two laterally offset poses observing a heat source.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationPlan {
    pub left: Pose,
    pub right: Pose,
    pub baseline: f64,
    pub standoff: f64,
    pub target: EnuPoint,
}

/// Plan a left/right pose pair looking at `target`.
///
/// The pair is centered on the first funnel point along `view_dir` at least
/// `standoff` from the target, searched in 1 m steps.
pub fn plan_triangulation_poses(
    funnel: &FlightFunnel,
    target: EnuPoint,
    view_dir: Vector3<f64>,
    standoff: f64,
    baseline: f64,
) -> Result<ObservationPlan, FunnelError> {
    if !(baseline > 0.0) {
        return Err(FunnelError::InvalidInput("baseline must be positive"));
    }
    if !(standoff > 0.0) {
        return Err(FunnelError::InvalidInput("standoff must be positive"));
    }
    let dir = view_dir
        .try_normalize(1e-12)
        .ok_or(FunnelError::InvalidInput("view direction must be non-zero"))?;
    let lateral = dir
        .cross(&Vector3::z())
        .try_normalize(1e-9)
        .ok_or(FunnelError::InvalidInput("view direction must not be vertical"))?;

    let max_extra = 10.0 * standoff;
    let mut extra = 0.0;
    let mut center = target + dir * standoff;
    while !funnel.contains(&center) {
        extra += 1.0;
        if extra > max_extra {
            return Err(FunnelError::NoFeasiblePose);
        }
        center = target + dir * (standoff + extra);
    }

    let half = lateral * (baseline / 2.0);
    let mut left = funnel.clamp_into(&(center + half));
    let mut right = funnel.clamp_into(&(center + (-half)));
    if left.distance(&right) > baseline + 1e-9 {
        // projection onto a non-convex set can spread the pair; pull both in
        let (l0, r0) = (left, right);
        let mut t = 1.0;
        while t > 0.0 {
            t = (t * 0.9_f64 - 1e-3).max(0.0);
            let l = center + (l0 - center) * t;
            let r = center + (r0 - center) * t;
            if funnel.contains(&l) && funnel.contains(&r) && l.distance(&r) <= baseline + 1e-9 {
                left = l;
                right = r;
                break;
            }
        }
    }

    Ok(ObservationPlan {
        left: Pose::look_at(left, target),
        right: Pose::look_at(right, target),
        baseline: left.distance(&right),
        standoff: target.distance(&center),
        target,
    })
}

/// Two exploration poses at `search_alt` on the east-west diameter, half the
/// cylinder radius from the center, yawed toward the area of interest.
pub fn plan_exploration_poses(
    funnel: &FlightFunnel,
    search_alt: f64,
    area_of_interest: EnuPoint,
) -> Result<(Pose, Pose), FunnelError> {
    if !(search_alt >= funnel.floor_alt && search_alt <= funnel.ceiling_alt) {
        return Err(FunnelError::InvalidInput("search altitude outside the funnel band"));
    }
    let yaw = bearing_deg(&funnel.center, &area_of_interest);
    let offset = funnel.cyl_radius / 2.0;
    let make = |de: f64| {
        let pos = EnuPoint::new(funnel.center.e + de, funnel.center.n, search_alt);
        let (_, pitch) = look_angles(&pos, &area_of_interest);
        Pose::new(pos, yaw, pitch)
    };
    Ok((make(-offset), make(offset)))
}
