//! Water-jet ballistics: point-mass jet with optional quadratic drag.

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::frames::{bearing_deg, direction_from_angles, EnuPoint, Heightmap, OccupancyGrid};

pub const MIN_PITCH_DEG: f64 = -15.0;
pub const MAX_PITCH_DEG: f64 = 89.0;
/// Simulated time after which a jet is declared never to land.
pub const MAX_FLIGHT_TIME: f64 = 60.0;
pub const MIN_TARGET_DISTANCE: f64 = 0.5;

const SOLVER_DT: f64 = 0.005;
const ANGLE_TOL_RAD: f64 = 1e-7;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BallisticsError {
    #[error("pressure must be positive, got {0} Pa")]
    NonPositivePressure(f64),
    #[error("target is out of reach")]
    Unreachable,
    #[error("jet still airborne after {0} s")]
    NeverLands(f64),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JetParameters {
    pub exit_speed: f64,
    pub gravity: f64,
    /// Lumped quadratic drag coefficient, 1/m.
    pub drag_coeff: f64,
    pub nozzle_offset: EnuPoint,
    pub discharge_coeff: f64,
    pub water_density: f64,
}

impl Default for JetParameters {
    fn default() -> Self {
        Self {
            exit_speed: 20.0,
            gravity: 9.81,
            drag_coeff: 0.0,
            nozzle_offset: EnuPoint::ORIGIN,
            discharge_coeff: 0.97,
            water_density: 1000.0,
        }
    }
}

impl JetParameters {
    pub fn vacuum(exit_speed: f64) -> Self {
        Self { exit_speed, ..Self::default() }
    }

    pub fn with_drag(self, drag_coeff: f64) -> Self {
        Self { drag_coeff, ..self }
    }

    fn validate(&self) -> Result<(), BallisticsError> {
        if !(self.exit_speed > 0.0) {
            return Err(BallisticsError::InvalidInput("exit speed must be positive"));
        }
        if !(self.gravity > 0.0) {
            return Err(BallisticsError::InvalidInput("gravity must be positive"));
        }
        if !(self.drag_coeff >= 0.0) {
            return Err(BallisticsError::InvalidInput("drag coefficient must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arc {
    Low,
    High,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetSolution {
    #[serde(rename = "yaw_deg")]
    pub yaw: f64,
    #[serde(rename = "pitch_deg")]
    pub pitch: f64,
    pub arc: Arc,
    #[serde(rename = "tof_s")]
    pub time_of_flight: f64,
    #[serde(rename = "landing_enu")]
    pub landing: EnuPoint,
}

/// Height query used to terminate trajectories.
pub trait Ground {
    fn height(&self, e: f64, n: f64) -> f64;
}

/// Horizontal plane at a fixed altitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatGround(pub f64);

impl Ground for FlatGround {
    fn height(&self, _e: f64, _n: f64) -> f64 {
        self.0
    }
}

impl Ground for OccupancyGrid {
    fn height(&self, e: f64, n: f64) -> f64 {
        self.surface_height(e, n)
    }
}

impl Ground for Heightmap {
    fn height(&self, e: f64, n: f64) -> f64 {
        self.height_at_clamped(e, n)
    }
}

/// Bernoulli orifice exit speed.
pub fn pressure_to_exit_speed(pressure: f64, params: &JetParameters) -> Result<f64, BallisticsError> {
    if !(pressure > 0.0) {
        return Err(BallisticsError::NonPositivePressure(pressure));
    }
    Ok(params.discharge_coeff * (2.0 * pressure / params.water_density).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Integration points from the nozzle up to and including the landing point.
    pub points: Vec<EnuPoint>,
    pub landing: EnuPoint,
    pub time_of_flight: f64,
    pub apex_u: f64,
}

type State = (Vector3<f64>, Vector3<f64>);

fn accel(v: &Vector3<f64>, g: f64, k: f64) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -g) - v * (k * v.norm())
}

fn rk4(s: &State, h: f64, g: f64, k: f64) -> State {
    let (p, v) = s;
    let a1 = accel(v, g, k);
    let v2 = v + a1 * (h / 2.0);
    let a2 = accel(&v2, g, k);
    let v3 = v + a2 * (h / 2.0);
    let a3 = accel(&v3, g, k);
    let v4 = v + a3 * h;
    let a4 = accel(&v4, g, k);
    (
        p + (v + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0),
        v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0),
    )
}

fn initial_state(origin: &EnuPoint, yaw: f64, pitch: f64, speed: f64) -> State {
    (origin.vec(), direction_from_angles(yaw, pitch) * speed)
}

/// Integrate the jet until it crosses the ground.
///
/// The landing point is interpolated linearly within the final step. A jet
/// starting below the ground surface lands on its first descent through it.
pub fn simulate_trajectory<G: Ground + ?Sized>(
    origin: EnuPoint,
    yaw: f64,
    pitch: f64,
    params: &JetParameters,
    dt: f64,
    ground: &G,
) -> Result<Trajectory, BallisticsError> {
    params.validate()?;
    if !(dt > 0.0 && dt <= 0.05) {
        return Err(BallisticsError::InvalidInput("dt must lie in (0, 0.05]"));
    }
    if !(pitch > -90.0) {
        return Err(BallisticsError::InvalidInput("pitch must exceed -90 degrees"));
    }
    let (g, k) = (params.gravity, params.drag_coeff);
    let mut state = initial_state(&origin, yaw, pitch, params.exit_speed);
    let clearance = |s: &State| s.0.z - ground.height(s.0.x, s.0.y);

    let mut points = vec![origin];
    let mut apex = origin.u;
    let mut f_prev = clearance(&state);
    let mut airborne = f_prev >= 0.0;
    let steps = (MAX_FLIGHT_TIME / dt).ceil() as usize;
    for i in 0..steps {
        let next = rk4(&state, dt, g, k);
        let f_next = clearance(&next);
        if airborne && (f_next < 0.0 || (f_next == 0.0 && f_prev > 0.0)) {
            let frac = if f_prev > f_next { f_prev / (f_prev - f_next) } else { 0.0 };
            let landing = EnuPoint::from(state.0 + (next.0 - state.0) * frac);
            points.push(landing);
            return Ok(Trajectory {
                points,
                landing,
                time_of_flight: (i as f64 + frac) * dt,
                apex_u: apex.max(landing.u),
            });
        }
        airborne |= f_next > 0.0;
        apex = apex.max(next.0.z);
        state = next;
        f_prev = f_next;
        points.push(EnuPoint::from(state.0));
    }
    Err(BallisticsError::NeverLands(MAX_FLIGHT_TIME))
}

/// Planar jet state `(s, z, vs, vz)` along the firing azimuth.
type Planar = Vector4<f64>;

fn planar_deriv(x: &Planar, g: f64, k: f64) -> Planar {
    let speed = x[2].hypot(x[3]);
    Vector4::new(x[2], x[3], -k * speed * x[2], -g - k * speed * x[3])
}

fn planar_rk4(x: &Planar, h: f64, g: f64, k: f64) -> Planar {
    let k1 = planar_deriv(x, g, k);
    let k2 = planar_deriv(&(x + k1 * (h / 2.0)), g, k);
    let k3 = planar_deriv(&(x + k2 * (h / 2.0)), g, k);
    let k4 = planar_deriv(&(x + k3 * h), g, k);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn planar_start(pitch_rad: f64, speed: f64) -> Planar {
    Vector4::new(0.0, 0.0, speed * pitch_rad.cos(), speed * pitch_rad.sin())
}

/// Step from `x` by the partial step that makes `s` equal `target_s`.
fn refine_to_range(x: &Planar, target_s: f64, g: f64, k: f64) -> (Planar, f64) {
    let mut h = (target_s - x[0]) / x[2];
    let mut y = planar_rk4(x, h, g, k);
    for _ in 0..4 {
        h += (target_s - y[0]) / y[2];
        y = planar_rk4(x, h, g, k);
    }
    (y, h)
}

/// Height and time at which the jet reaches horizontal distance `d`, or
/// `None` if it falls `drop_limit` below the nozzle or times out first.
fn height_at_range(pitch_rad: f64, d: f64, params: &JetParameters, drop_limit: f64) -> Option<(f64, f64)> {
    let (g, k) = (params.gravity, params.drag_coeff);
    let mut x = planar_start(pitch_rad, params.exit_speed);
    let mut t = 0.0;
    while t < MAX_FLIGHT_TIME {
        let y = planar_rk4(&x, SOLVER_DT, g, k);
        if y[0] >= d {
            let (hit, h) = refine_to_range(&x, d, g, k);
            return Some((hit[1], t + h));
        }
        if y[1] < -drop_limit && y[3] < 0.0 {
            return None;
        }
        x = y;
        t += SOLVER_DT;
    }
    None
}

/// Horizontal distance at which the descending jet passes height `dh`.
fn range_at_height(pitch_rad: f64, dh: f64, params: &JetParameters) -> Option<f64> {
    let (g, k) = (params.gravity, params.drag_coeff);
    let mut x = planar_start(pitch_rad, params.exit_speed);
    let mut t = 0.0;
    while t < MAX_FLIGHT_TIME {
        let y = planar_rk4(&x, SOLVER_DT, g, k);
        if y[3] < 0.0 && x[1] >= dh && y[1] < dh {
            // refine the crossing time by secant iterations on height
            let (mut lo, mut hi) = (0.0, SOLVER_DT);
            let (mut zlo, mut zhi) = (x[1] - dh, y[1] - dh);
            let mut best = y;
            for _ in 0..30 {
                let h = if zlo != zhi { lo - zlo * (hi - lo) / (zhi - zlo) } else { 0.5 * (lo + hi) };
                best = planar_rk4(&x, h, g, k);
                let z = best[1] - dh;
                if z.abs() < 1e-12 {
                    break;
                }
                if z > 0.0 {
                    lo = h;
                    zlo = z;
                } else {
                    hi = h;
                    zhi = z;
                }
            }
            return Some(best[0]);
        }
        x = y;
        t += SOLVER_DT;
    }
    None
}

fn golden_max(lo: f64, hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn bisect(mut lo: f64, mut hi: f64, f_lo_positive: bool, f: impl Fn(f64) -> f64) -> f64 {
    while hi - lo > ANGLE_TOL_RAD {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == f_lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn split(origin: &EnuPoint, target: &EnuPoint) -> (f64, f64) {
    (origin.horizontal_distance(target), target.u - origin.u)
}

/// Vacuum pitch (radians) for horizontal distance `d` and height difference `dh`.
fn vacuum_pitch(d: f64, dh: f64, v: f64, g: f64, arc: Arc) -> Option<f64> {
    let v2 = v * v;
    let mut disc = v2 * v2 - g * (g * d * d + 2.0 * dh * v2);
    if disc < 0.0 {
        // tolerate rounding at exactly maximum range
        if disc < -1e-9 * v2 * v2 {
            return None;
        }
        disc = 0.0;
    }
    let root = disc.sqrt();
    let num = match arc {
        Arc::Low => v2 - root,
        Arc::High => v2 + root,
    };
    Some((num / (g * d)).atan())
}

/// Drag pitch (radians) by bracketing on the height reached at distance `d`.
fn drag_pitch(d: f64, dh: f64, params: &JetParameters, arc: Arc) -> Option<f64> {
    let (lo, hi) = (MIN_PITCH_DEG.to_radians(), MAX_PITCH_DEG.to_radians());
    let drop_limit = dh.abs() + 1000.0;
    let excess = |th: f64| match height_at_range(th, d, params, drop_limit) {
        Some((z, _)) => z - dh,
        None => -drop_limit - 1.0,
    };
    let (th_star, best) = golden_max(lo, hi, 1e-6, excess);
    if best < 0.0 {
        return None;
    }
    match arc {
        Arc::Low => {
            if excess(lo) >= 0.0 {
                // the low arc would need a pitch below the actuator limit
                return None;
            }
            Some(bisect(lo, th_star, false, excess))
        }
        Arc::High => {
            if excess(hi) >= 0.0 {
                return None;
            }
            Some(bisect(th_star, hi, true, excess))
        }
    }
}

/// Aim the jet from `origin` at `target`.
pub fn solve_angles(
    origin: EnuPoint,
    target: EnuPoint,
    params: &JetParameters,
    arc: Arc,
) -> Result<JetSolution, BallisticsError> {
    params.validate()?;
    let (d, dh) = split(&origin, &target);
    if !(d > MIN_TARGET_DISTANCE) {
        return Err(BallisticsError::InvalidInput("horizontal distance must exceed 0.5 m"));
    }
    let pitch_rad = if params.drag_coeff == 0.0 {
        vacuum_pitch(d, dh, params.exit_speed, params.gravity, arc)
    } else {
        drag_pitch(d, dh, params, arc)
    }
    .ok_or(BallisticsError::Unreachable)?;
    let pitch = pitch_rad.to_degrees();
    if !(MIN_PITCH_DEG..=MAX_PITCH_DEG).contains(&pitch) {
        return Err(BallisticsError::Unreachable);
    }
    let yaw = bearing_deg(&origin, &target);
    let (landing, time_of_flight) = fly_to_range(origin, yaw, pitch, params, d)?;
    Ok(JetSolution { yaw, pitch, arc, time_of_flight, landing })
}

/// Forward-simulate in 3D until the horizontal distance from `origin` reaches `d`.
pub fn fly_to_range(
    origin: EnuPoint,
    yaw: f64,
    pitch: f64,
    params: &JetParameters,
    d: f64,
) -> Result<(EnuPoint, f64), BallisticsError> {
    let (g, k) = (params.gravity, params.drag_coeff);
    let mut state = initial_state(&origin, yaw, pitch, params.exit_speed);
    let o = origin.vec();
    let horiz = |s: &State| (s.0.x - o.x).hypot(s.0.y - o.y);
    let horiz_speed = |s: &State| s.1.x.hypot(s.1.y);
    let mut t = 0.0;
    while t < MAX_FLIGHT_TIME {
        let next = rk4(&state, SOLVER_DT, g, k);
        if horiz(&next) >= d {
            let mut h = (d - horiz(&state)) / horiz_speed(&state);
            let mut hit = rk4(&state, h, g, k);
            for _ in 0..4 {
                h += (d - horiz(&hit)) / horiz_speed(&hit);
                hit = rk4(&state, h, g, k);
            }
            return Ok((EnuPoint::from(hit.0), t + h));
        }
        state = next;
        t += SOLVER_DT;
    }
    Err(BallisticsError::NeverLands(MAX_FLIGHT_TIME))
}

/// Largest horizontal distance at which the descending jet passes height `dh`
/// above the nozzle, over the allowed pitch range.
pub fn max_range(dh: f64, params: &JetParameters) -> f64 {
    let (v, g) = (params.exit_speed, params.gravity);
    if params.drag_coeff == 0.0 {
        let disc = v * v - 2.0 * g * dh;
        if disc < 0.0 {
            return 0.0;
        }
        // unconstrained optimum; all optimal pitches lie inside the actuator range for dh > -v^2/g
        return (v / g) * disc.sqrt();
    }
    let (lo, hi) = (MIN_PITCH_DEG.to_radians(), MAX_PITCH_DEG.to_radians());
    let (_, r) = golden_max(lo, hi, 1e-5, |th| range_at_height(th, dh, params).unwrap_or(0.0));
    r
}

/// Reachability and distance margin `max_range(dh) - d` (positive when reachable).
pub fn is_reachable(origin: EnuPoint, target: EnuPoint, params: &JetParameters) -> (bool, f64) {
    let (d, dh) = split(&origin, &target);
    let ok = solve_angles(origin, target, params, Arc::Low).is_ok()
        || solve_angles(origin, target, params, Arc::High).is_ok();
    (ok, max_range(dh, params) - d)
}

/// Landing error in meters caused by actuator angle errors when aiming at a
/// target at `range` on level ground with the low arc.
pub fn deviation_from_angle_error(
    range: f64,
    yaw_err: f64,
    pitch_err: f64,
    params: &JetParameters,
) -> Result<f64, BallisticsError> {
    if !(range > 0.0) {
        return Err(BallisticsError::InvalidInput("range must be positive"));
    }
    let lateral = range * yaw_err.to_radians().tan();
    let down_range = if pitch_err == 0.0 {
        0.0
    } else {
        let target = EnuPoint::new(0.0, range, 0.0);
        let sol = solve_angles(EnuPoint::ORIGIN, target, params, Arc::Low)?;
        let land = |pitch: f64| -> Result<f64, BallisticsError> {
            let dh = 0.0;
            match range_at_height(pitch.to_radians(), dh, params) {
                Some(r) if params.drag_coeff > 0.0 => Ok(r),
                _ if params.drag_coeff == 0.0 => {
                    let (v, g) = (params.exit_speed, params.gravity);
                    Ok(v * v * (2.0 * pitch.to_radians()).sin() / g)
                }
                _ => Err(BallisticsError::NeverLands(MAX_FLIGHT_TIME)),
            }
        };
        (land(sol.pitch + pitch_err)? - land(sol.pitch)?).abs()
    };
    Ok(lateral.hypot(down_range))
}
