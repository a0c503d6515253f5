//! Simulated fire monitor actuators and the water monitor controller (WMC).

use serde::{Deserialize, Serialize};

use crate::ballistics::{solve_angles, Arc, JetParameters};
use crate::frames::{geo_to_enu, shortest_arc_deg, wrap_deg_360, GeoPoint, Pose};

pub const TILT_MIN_DEG: f64 = -15.0;
pub const TILT_MAX_DEG: f64 = 90.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NozzleMode {
    Spray,
    Solid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Manual,
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WmcStatus {
    Ok,
    Degraded,
    Unreachable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorConfig {
    pub pan_rate_max: f64,
    pub tilt_rate_max: f64,
    pub speed_pct: f64,
    pub encoder_quantum: f64,
    pub command_rate_hz: f64,
    pub telemetry_rate_hz: f64,
    /// Proportional gain, command units per degree.
    pub k_p: f64,
    pub stop_tolerance_deg: f64,
    pub dead_band_deg: f64,
    pub watchdog_timeout_s: f64,
    /// Tilt rate factor while water flows.
    pub tilt_derate: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            pan_rate_max: 12.0,
            tilt_rate_max: 8.0,
            speed_pct: 20.0,
            encoder_quantum: 0.05,
            command_rate_hz: 5.0,
            telemetry_rate_hz: 10.0,
            k_p: 0.5,
            stop_tolerance_deg: 0.1,
            dead_band_deg: 0.5,
            watchdog_timeout_s: 2.0,
            tilt_derate: 0.7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Temps {
    pub housing_c: f64,
    pub exterior_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorState {
    /// True pan angle, compass degrees.
    pub pan: f64,
    /// True tilt angle, degrees above horizontal.
    pub tilt: f64,
    pub pan_rate_max: f64,
    pub tilt_rate_max: f64,
    pub speed_pct: f64,
    pub encoder_quantum: f64,
    pub command_period: f64,
    pub tilt_derate: f64,
    pub nozzle_mode: NozzleMode,
    pub pressure: f64,
    pub temps: Temps,
    pub gnss: Option<(GeoPoint, Pose)>,
    pub water_flowing: bool,
    latched: (f64, f64),
    since_accept: f64,
}

fn quantize(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

impl MonitorState {
    pub fn new(cfg: &MonitorConfig, pan: f64, tilt: f64, pressure: f64) -> Self {
        let command_period = 1.0 / cfg.command_rate_hz;
        Self {
            pan: wrap_deg_360(pan),
            tilt: tilt.clamp(TILT_MIN_DEG, TILT_MAX_DEG),
            pan_rate_max: cfg.pan_rate_max,
            tilt_rate_max: cfg.tilt_rate_max,
            speed_pct: cfg.speed_pct.clamp(f64::MIN_POSITIVE, 100.0),
            encoder_quantum: cfg.encoder_quantum,
            command_period,
            tilt_derate: cfg.tilt_derate,
            nozzle_mode: NozzleMode::Solid,
            pressure,
            temps: Temps { housing_c: 25.0, exterior_c: 20.0 },
            gnss: None,
            water_flowing: false,
            latched: (0.0, 0.0),
            since_accept: command_period,
        }
    }

    pub fn pan_encoder(&self) -> f64 {
        wrap_deg_360(quantize(self.pan, self.encoder_quantum))
    }

    pub fn tilt_encoder(&self) -> f64 {
        quantize(self.tilt, self.encoder_quantum)
    }

    /// Command currently driving the axes.
    pub fn latched_command(&self) -> (f64, f64) {
        self.latched
    }

    pub fn pan_slew_limit(&self) -> f64 {
        self.speed_pct / 100.0 * self.pan_rate_max
    }

    pub fn tilt_slew_limit(&self) -> f64 {
        let derate = if self.water_flowing { self.tilt_derate } else { 1.0 };
        self.speed_pct / 100.0 * self.tilt_rate_max * derate
    }

    /// Advance the axes by `dt`. New commands are latched only once per command period.
    pub fn actuate(&mut self, pan_cmd: f64, tilt_cmd: f64, dt: f64) {
        self.since_accept += dt;
        if self.since_accept + 1e-9 >= self.command_period {
            self.latched = (pan_cmd.clamp(-1.0, 1.0), tilt_cmd.clamp(-1.0, 1.0));
            self.since_accept = 0.0;
        }
        self.pan = wrap_deg_360(self.pan + self.latched.0 * self.pan_slew_limit() * dt);
        self.tilt = (self.tilt + self.latched.1 * self.tilt_slew_limit() * dt).clamp(TILT_MIN_DEG, TILT_MAX_DEG);
    }

    /// Stop immediately, bypassing the command latch.
    pub fn halt(&mut self) {
        self.latched = (0.0, 0.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AimSetpoint {
    pub yaw: f64,
    pub pitch: f64,
    pub source_target: GeoPoint,
    pub issued_at: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetpointChange {
    Created,
    Replaced,
    Unchanged,
    Unreachable,
}

/// Solve angles for `target` from `monitor_gnss` and apply the dead-band.
pub fn update_setpoint(
    current: Option<&AimSetpoint>,
    monitor_gnss: &GeoPoint,
    target: &GeoPoint,
    origin: &GeoPoint,
    params: &JetParameters,
    dead_band_deg: f64,
    now: f64,
) -> (Option<AimSetpoint>, SetpointChange) {
    let solved = (|| {
        let nozzle = geo_to_enu(monitor_gnss, origin).ok()? + params.nozzle_offset;
        let aim = geo_to_enu(target, origin).ok()?;
        solve_angles(nozzle, aim, params, Arc::Low)
            .or_else(|_| solve_angles(nozzle, aim, params, Arc::High))
            .ok()
    })();
    let Some(sol) = solved else {
        return (current.copied(), SetpointChange::Unreachable);
    };
    let fresh = AimSetpoint { yaw: sol.yaw, pitch: sol.pitch, source_target: *target, issued_at: now };
    match current {
        None => (Some(fresh), SetpointChange::Created),
        Some(cur) => {
            let dy = shortest_arc_deg(cur.yaw, sol.yaw).abs();
            let dp = (sol.pitch - cur.pitch).abs();
            if dy >= dead_band_deg || dp >= dead_band_deg {
                (Some(fresh), SetpointChange::Replaced)
            } else {
                (Some(*cur), SetpointChange::Unchanged)
            }
        }
    }
}

/// Proportional command from encoder error, zero inside the stop tolerance.
pub fn axis_command(err_deg: f64, k_p: f64, stop_tolerance: f64) -> f64 {
    if err_deg.abs() < stop_tolerance {
        0.0
    } else {
        (k_p * err_deg).clamp(-1.0, 1.0)
    }
}

/// One automatic control tick; returns the commands sent to the actuators.
pub fn control_step(state: &mut MonitorState, setpoint: &AimSetpoint, cfg: &MonitorConfig, dt: f64) -> (f64, f64) {
    let pan_err = shortest_arc_deg(state.pan_encoder(), setpoint.yaw);
    let tilt_err = setpoint.pitch - state.tilt_encoder();
    let pan_cmd = axis_command(pan_err, cfg.k_p, cfg.stop_tolerance_deg);
    let tilt_cmd = axis_command(tilt_err, cfg.k_p, cfg.stop_tolerance_deg);
    state.actuate(pan_cmd, tilt_cmd, dt);
    (pan_cmd, tilt_cmd)
}

/// Watchdog verdict for the age of the newest GCS message.
pub fn watchdog(last_msg_age: f64, timeout: f64) -> bool {
    last_msg_age > timeout
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WmcTelemetry {
    pub pan_deg: f64,
    pub tilt_deg: f64,
    pub pressure_pa: f64,
    pub mode: ControlMode,
    pub status: WmcStatus,
    pub gnss: Option<GeoPoint>,
}

/// The controller task: owns the monitor state, consumes targets and manual
/// commands, emits telemetry at a fixed rate.
#[derive(Clone, Debug)]
pub struct Wmc {
    pub cfg: MonitorConfig,
    pub state: MonitorState,
    pub params: JetParameters,
    pub origin: GeoPoint,
    pub mode: ControlMode,
    pub status: WmcStatus,
    pub setpoint: Option<AimSetpoint>,
    pub setpoint_writes: u64,
    pub holding: bool,
    last_msg_at: f64,
    manual: (f64, f64),
    ticks: u64,
    dt: f64,
}

impl Wmc {
    pub fn new(cfg: MonitorConfig, state: MonitorState, params: JetParameters, origin: GeoPoint, dt: f64) -> Self {
        Self {
            cfg,
            state,
            params,
            origin,
            mode: ControlMode::Auto,
            status: WmcStatus::Ok,
            setpoint: None,
            setpoint_writes: 0,
            holding: false,
            last_msg_at: 0.0,
            manual: (0.0, 0.0),
            ticks: 0,
            dt,
        }
    }

    /// Any valid GCS message counts as liveness.
    pub fn on_message(&mut self, now: f64) {
        self.last_msg_at = now;
        if self.holding {
            self.holding = false;
            if self.status == WmcStatus::Degraded {
                self.status = WmcStatus::Ok;
            }
        }
    }

    pub fn on_target(&mut self, target: &GeoPoint, now: f64) -> SetpointChange {
        self.on_message(now);
        let Some((monitor_geo, _)) = self.state.gnss else {
            self.status = WmcStatus::Degraded;
            return SetpointChange::Unchanged;
        };
        let (sp, change) = update_setpoint(
            self.setpoint.as_ref(),
            &monitor_geo,
            target,
            &self.origin,
            &self.params,
            self.cfg.dead_band_deg,
            now,
        );
        self.setpoint = sp;
        match change {
            SetpointChange::Created | SetpointChange::Replaced => {
                self.setpoint_writes += 1;
                self.status = WmcStatus::Ok;
            }
            SetpointChange::Unreachable => self.status = WmcStatus::Unreachable,
            SetpointChange::Unchanged => {
                if self.status == WmcStatus::Unreachable {
                    self.status = WmcStatus::Ok;
                }
            }
        }
        change
    }

    /// Mode switches are always accepted; entering manual drops the setpoint.
    pub fn set_mode(&mut self, mode: ControlMode, now: f64) {
        self.on_message(now);
        if mode == ControlMode::Manual {
            self.setpoint = None;
        }
        self.manual = (0.0, 0.0);
        self.state.halt();
        self.mode = mode;
    }

    pub fn manual_command(&mut self, pan_cmd: f64, tilt_cmd: f64, nozzle: Option<NozzleMode>, now: f64) {
        self.on_message(now);
        if self.mode != ControlMode::Manual {
            self.set_mode(ControlMode::Manual, now);
        }
        self.manual = (pan_cmd.clamp(-1.0, 1.0), tilt_cmd.clamp(-1.0, 1.0));
        // releasing the joystick stops at once, not at the next command slot
        if self.manual == (0.0, 0.0) {
            self.state.halt();
        }
        if let Some(m) = nozzle {
            self.state.nozzle_mode = m;
        }
    }

    /// Advance one tick at sim time `now` (after the step); returns telemetry on 10 Hz ticks.
    pub fn tick(&mut self, now: f64) -> Option<WmcTelemetry> {
        let dt = self.dt;
        match self.mode {
            ControlMode::Manual => {
                let (p, t) = self.manual;
                self.state.actuate(p, t, dt);
            }
            ControlMode::Auto => {
                if watchdog(now - self.last_msg_at, self.cfg.watchdog_timeout_s) {
                    if !self.holding {
                        log::warn!("wmc watchdog: no GCS message for {:.2} s, holding", now - self.last_msg_at);
                    }
                    self.holding = true;
                    self.status = WmcStatus::Degraded;
                    self.state.halt();
                    self.state.actuate(0.0, 0.0, dt);
                } else if let Some(sp) = self.setpoint {
                    control_step(&mut self.state, &sp, &self.cfg, dt);
                } else {
                    self.state.actuate(0.0, 0.0, dt);
                }
            }
        }
        self.ticks += 1;
        let every = ((1.0 / self.cfg.telemetry_rate_hz) / dt).round().max(1.0) as u64;
        (self.ticks % every == 0).then(|| self.telemetry())
    }

    pub fn telemetry(&self) -> WmcTelemetry {
        WmcTelemetry {
            pan_deg: self.state.pan_encoder(),
            tilt_deg: self.state.tilt_encoder(),
            pressure_pa: self.state.pressure,
            mode: self.mode,
            status: self.status,
            gnss: self.state.gnss.map(|g| g.0),
        }
    }

    /// Encoder tracking error per axis against the current setpoint.
    pub fn tracking_error(&self) -> Option<(f64, f64)> {
        self.setpoint.map(|sp| {
            (
                shortest_arc_deg(self.state.pan_encoder(), sp.yaw).abs(),
                (sp.pitch - self.state.tilt_encoder()).abs(),
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{enu_to_geo, EnuPoint};

    fn state(speed: f64) -> MonitorState {
        MonitorState::new(&MonitorConfig { speed_pct: speed, ..Default::default() }, 0.0, 0.0, 3e5)
    }

    #[test]
    fn full_command_at_twenty_percent_for_one_second() {
        let mut s = state(20.0);
        for _ in 0..20 {
            s.actuate(1.0, 0.0, 0.05);
        }
        assert!((s.pan - 2.4).abs() < 1e-9);
    }

    #[test]
    fn tilt_clamps_at_top() {
        let mut s = state(20.0);
        s.tilt = 90.0;
        s.actuate(0.0, 1.0, 0.05);
        assert_eq!(s.tilt, 90.0);
    }

    #[test]
    fn zero_command_keeps_encoder() {
        let mut s = state(20.0);
        let e = s.pan_encoder();
        for _ in 0..10 {
            s.actuate(0.0, 0.0, 0.05);
        }
        assert_eq!(s.pan_encoder(), e);
    }

    #[test]
    fn commands_latch_at_command_rate() {
        let mut s = state(20.0);
        s.actuate(1.0, 0.0, 0.05);
        for _ in 0..3 {
            s.actuate(-1.0, 0.0, 0.05);
            assert_eq!(s.latched_command().0, 1.0);
        }
        s.actuate(-1.0, 0.0, 0.05);
        assert_eq!(s.latched_command().0, -1.0);
    }

    #[test]
    fn water_derates_tilt() {
        let mut s = state(20.0);
        s.water_flowing = true;
        s.actuate(0.0, 1.0, 1.0);
        assert!((s.tilt - 0.2 * 8.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn proportional_command() {
        assert_eq!(axis_command(10.0, 0.5, 0.1), 1.0);
        assert_eq!(axis_command(0.05, 0.5, 0.1), 0.0);
        assert_eq!(axis_command(-1.0, 0.5, 0.1), -0.5);
    }

    #[test]
    fn watchdog_threshold() {
        assert!(!watchdog(1.9, 2.0));
        assert!(watchdog(2.1, 2.0));
    }

    fn geo(origin: &GeoPoint, e: f64, n: f64, u: f64) -> GeoPoint {
        enu_to_geo(&EnuPoint::new(e, n, u), origin)
    }

    #[test]
    fn dead_band_rules() {
        let origin = GeoPoint::new(48.0, 11.0, 500.0);
        let mon = geo(&origin, 0.0, 0.0, 20.0);
        let params = JetParameters::vacuum(25.0);
        let t0 = geo(&origin, 0.0, 40.0, 0.0);
        let (sp, c) = update_setpoint(None, &mon, &t0, &origin, &params, 0.5, 0.0);
        assert_eq!(c, SetpointChange::Created);
        let sp = sp.unwrap();

        // 0.3 deg of yaw at 40 m is about 0.21 m lateral
        let small = geo(&origin, 40.0 * 0.3f64.to_radians().tan(), 40.0, 0.0);
        let (sp2, c) = update_setpoint(Some(&sp), &mon, &small, &origin, &params, 0.5, 1.0);
        assert_eq!(c, SetpointChange::Unchanged);
        assert_eq!(sp2.unwrap(), sp);

        let big = geo(&origin, 40.0 * 0.6f64.to_radians().tan(), 40.0, 0.0);
        let (sp3, c) = update_setpoint(Some(&sp), &mon, &big, &origin, &params, 0.5, 2.0);
        assert_eq!(c, SetpointChange::Replaced);
        assert!((sp3.unwrap().yaw - 0.6).abs() < 1e-6);

        let far = geo(&origin, 0.0, 400.0, 0.0);
        let (sp4, c) = update_setpoint(Some(&sp), &mon, &far, &origin, &params, 0.5, 3.0);
        assert_eq!(c, SetpointChange::Unreachable);
        assert_eq!(sp4.unwrap(), sp);
    }

    #[test]
    fn step_response_settles_without_limit_cycle() {
        let cfg = MonitorConfig::default();
        let mut s = state(20.0);
        let sp = AimSetpoint { yaw: 30.0, pitch: 20.0, source_target: GeoPoint::new(0.0, 0.0, 0.0), issued_at: 0.0 };
        let mut late_moves = 0;
        for k in 0..1200 {
            let before = (s.pan, s.tilt);
            control_step(&mut s, &sp, &cfg, 0.05);
            if k > 600 && (s.pan != before.0 || s.tilt != before.1) {
                late_moves += 1;
            }
        }
        assert!(shortest_arc_deg(s.pan, 30.0).abs() <= 0.1 + 0.05);
        assert!((s.tilt - 20.0).abs() <= 0.1 + 0.05);
        assert_eq!(late_moves, 0);
    }

    #[test]
    fn telemetry_at_ten_hz() {
        let origin = GeoPoint::new(48.0, 11.0, 500.0);
        let mut w = Wmc::new(MonitorConfig::default(), state(20.0), JetParameters::default(), origin, 0.05);
        let n = (1..=200).filter(|k| w.tick(*k as f64 * 0.05).is_some()).count();
        assert_eq!(n, 100);
    }

    #[test]
    fn manual_mode_clears_setpoint_and_follows_joystick() {
        let origin = GeoPoint::new(48.0, 11.0, 500.0);
        let mut s = state(20.0);
        s.gnss = Some((geo(&origin, 0.0, 0.0, 20.0), Pose::new(EnuPoint::new(0.0, 0.0, 20.0), 0.0, 0.0)));
        let mut w = Wmc::new(MonitorConfig::default(), s, JetParameters::vacuum(25.0), origin, 0.05);
        w.on_target(&geo(&origin, 10.0, 30.0, 0.0), 0.0);
        assert!(w.setpoint.is_some());
        w.manual_command(1.0, 0.0, None, 0.1);
        assert!(w.setpoint.is_none());
        let p0 = w.state.pan;
        // within one command period the joystick drives the axis
        for k in 0..4 {
            w.tick(0.15 + k as f64 * 0.05);
        }
        assert!(w.state.pan > p0);
        w.manual_command(0.0, 0.0, None, 0.4);
        for k in 0..4 {
            w.tick(0.45 + k as f64 * 0.05);
        }
        let p1 = w.state.pan;
        w.tick(0.7);
        assert_eq!(w.state.pan, p1);
    }
}
