//! Deterministic fixed-timestep world: UAV, fires, thermal camera, depth
//! oracle, GNSS noise and water-fire coupling.

mod depth;
mod gnss;
mod thermal;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use depth::{draw_distortion, reported_baseline, scaled_depth, DepthImage};
pub use gnss::{GnssConfig, GnssNoise};
pub use thermal::{
    fire_sight_point, fire_visible, for_each_stroke_pixel, project_polyline, render_scene, splat_sigma, Intrinsics,
    ThermalConfig, ThermalImage,
};

use crate::frames::{look_angles, EnuPoint, OccupancyGrid, Pose};

pub const DEFAULT_DT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FireSource {
    pub position: EnuPoint,
    pub radius: f64,
    pub temperature: f64,
    pub intensity: f64,
    pub wet_accum: f64,
    /// Sim time of extinction and the temperature at that moment.
    pub extinguished: Option<(f64, f64)>,
}

impl FireSource {
    pub fn new(position: EnuPoint, radius: f64, temperature: f64) -> Self {
        Self { position, radius, temperature, intensity: 1.0, wet_accum: 0.0, extinguished: None }
    }

    pub fn is_extinguished(&self) -> bool {
        self.intensity == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub dt: f64,
    /// Speed on triangulation legs.
    pub uav_max_speed: f64,
    /// Speed for climb and transit legs outside the alternation.
    pub uav_transit_speed: f64,
    pub thermal: ThermalConfig,
    pub gnss: GnssConfig,
    /// Attitude noise of the gimbal angle readout, degrees.
    pub gimbal_sigma_deg: f64,
    pub depth_sigma: f64,
    pub distortion_min: f64,
    pub distortion_max: f64,
    /// Wetting time that extinguishes a fire.
    pub tau_ext_s: f64,
    /// Cool-down time constant after extinction.
    pub decay_tau_s: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            uav_max_speed: 1.0,
            uav_transit_speed: 5.0,
            thermal: ThermalConfig::default(),
            gnss: GnssConfig::default(),
            gimbal_sigma_deg: 0.05,
            depth_sigma: 0.01,
            distortion_min: 0.5,
            distortion_max: 2.0,
            tau_ext_s: 20.0,
            decay_tau_s: 30.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub target: EnuPoint,
    pub speed: f64,
    pub hold_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum UavPhase {
    Idle,
    Moving(Waypoint),
    Holding { remaining_steps: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub position: EnuPoint,
    pub velocity: EnuPoint,
    pub gimbal_yaw: f64,
    pub gimbal_pitch: f64,
    pub gimbal_target: Option<EnuPoint>,
    pub phase: UavPhase,
}

impl UavState {
    pub fn camera_pose(&self) -> Pose {
        Pose::new(self.position, self.gimbal_yaw, self.gimbal_pitch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorldEvent {
    Arrived,
    HoldComplete,
    FireExtinguished(usize),
}

/// Independent seeded random streams, one per purpose, so adding draws in one
/// subsystem never perturbs another.
#[derive(Clone, Debug)]
struct Streams {
    thermal: ChaCha8Rng,
    depth: ChaCha8Rng,
    gimbal: ChaCha8Rng,
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug)]
pub struct WorldState {
    pub clock: f64,
    pub steps: u64,
    pub cfg: WorldConfig,
    pub grid: Arc<OccupancyGrid>,
    pub uav: UavState,
    pub fires: Vec<FireSource>,
    pub monitor_base: EnuPoint,
    pub water_flowing: bool,
    /// Active jet polyline, if water is flowing.
    pub jet: Option<Vec<EnuPoint>>,
    pub rng_seed: u64,
    streams: Streams,
    uav_gnss: GnssNoise,
    monitor_gnss: GnssNoise,
}

/// Serializable world snapshot; ground truth is for debugging only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub uav_pose: Pose,
    pub gimbal_pose: Pose,
    pub fires_ground_truth: Vec<FireSource>,
}

impl WorldState {
    pub fn new(
        grid: Arc<OccupancyGrid>,
        fires: Vec<FireSource>,
        uav_start: EnuPoint,
        monitor_base: EnuPoint,
        cfg: WorldConfig,
        seed: u64,
    ) -> Self {
        Self {
            clock: 0.0,
            steps: 0,
            cfg,
            grid,
            uav: UavState {
                position: uav_start,
                velocity: EnuPoint::ORIGIN,
                gimbal_yaw: 0.0,
                gimbal_pitch: 0.0,
                gimbal_target: None,
                phase: UavPhase::Idle,
            },
            fires,
            monitor_base,
            water_flowing: false,
            jet: None,
            rng_seed: seed,
            streams: Streams {
                thermal: stream_rng(seed, 1),
                depth: stream_rng(seed, 2),
                gimbal: stream_rng(seed, 5),
            },
            uav_gnss: GnssNoise::new(cfg.gnss, stream_rng(seed, 3)),
            monitor_gnss: GnssNoise::new(cfg.gnss, stream_rng(seed, 4)),
        }
    }

    pub fn command_waypoint(&mut self, target: EnuPoint, speed: f64, hold_s: f64) {
        let speed = speed.max(1e-6);
        self.uav.phase = UavPhase::Moving(Waypoint { target, speed, hold_s });
    }

    pub fn set_gimbal_target(&mut self, target: Option<EnuPoint>) {
        self.uav.gimbal_target = target;
        self.aim_gimbal();
    }

    pub fn set_gimbal_angles(&mut self, yaw: f64, pitch: f64) {
        self.uav.gimbal_target = None;
        let pose = Pose::new(self.uav.position, yaw, pitch);
        self.uav.gimbal_yaw = pose.yaw;
        self.uav.gimbal_pitch = pose.pitch;
    }

    fn aim_gimbal(&mut self) {
        if let Some(t) = self.uav.gimbal_target {
            if t.distance(&self.uav.position) > 1e-9 {
                let (yaw, pitch) = look_angles(&self.uav.position, &t);
                self.uav.gimbal_yaw = yaw;
                self.uav.gimbal_pitch = pitch;
            }
        }
    }

    pub fn camera_pose(&self) -> Pose {
        self.uav.camera_pose()
    }

    /// Advance by one fixed timestep.
    pub fn step(&mut self) -> Vec<WorldEvent> {
        let dt = self.cfg.dt;
        let mut events = Vec::new();
        let before = self.uav.position;
        match self.uav.phase {
            UavPhase::Idle => {}
            UavPhase::Moving(wp) => {
                let delta = wp.target - self.uav.position;
                let remaining = delta.norm();
                let reach = wp.speed * dt;
                if remaining <= reach + 1e-9 {
                    self.uav.position = wp.target;
                    events.push(WorldEvent::Arrived);
                    let hold_steps = (wp.hold_s / dt).round() as u64;
                    self.uav.phase = if hold_steps == 0 {
                        events.push(WorldEvent::HoldComplete);
                        UavPhase::Idle
                    } else {
                        UavPhase::Holding { remaining_steps: hold_steps }
                    };
                } else {
                    self.uav.position = self.uav.position + delta * (reach / remaining);
                }
            }
            UavPhase::Holding { remaining_steps } => {
                if remaining_steps <= 1 {
                    self.uav.phase = UavPhase::Idle;
                    events.push(WorldEvent::HoldComplete);
                } else {
                    self.uav.phase = UavPhase::Holding { remaining_steps: remaining_steps - 1 };
                }
            }
        }
        self.uav.velocity = (self.uav.position - before) * (1.0 / dt);
        self.aim_gimbal();

        self.steps += 1;
        self.clock = self.steps as f64 * dt;

        let ambient = self.cfg.thermal.ambient_c;
        for fire in &mut self.fires {
            if let Some((t0, temp0)) = fire.extinguished {
                fire.temperature = ambient + (temp0 - ambient) * (-(self.clock - t0) / self.cfg.decay_tau_s).exp();
            }
        }
        events
    }

    /// Accumulate wetting on fires within their radius of the jet landing point.
    pub fn apply_water(&mut self, landing: &EnuPoint, dt: f64) -> Vec<WorldEvent> {
        let mut events = Vec::new();
        if !self.water_flowing {
            return events;
        }
        for (idx, fire) in self.fires.iter_mut().enumerate() {
            if landing.distance(&fire.position) <= fire.radius {
                fire.wet_accum += dt;
                if fire.extinguished.is_none() && fire.wet_accum >= self.cfg.tau_ext_s {
                    fire.intensity = 0.0;
                    fire.extinguished = Some((self.clock, fire.temperature));
                    events.push(WorldEvent::FireExtinguished(idx));
                }
            }
        }
        events
    }

    pub fn render_thermal(&mut self, camera: &Pose, intr: &Intrinsics) -> ThermalImage {
        render_scene(
            &self.grid,
            &self.fires,
            self.jet.as_deref(),
            camera,
            intr,
            &self.cfg.thermal,
            self.clock,
            Some(&mut self.streams.thermal),
        )
    }

    pub fn draw_distortion(&mut self) -> f64 {
        draw_distortion(&mut self.streams.depth, self.cfg.distortion_min, self.cfg.distortion_max)
    }

    pub fn scaled_depth_oracle(&mut self, camera: &Pose, intr: &Intrinsics, distortion: f64) -> DepthImage {
        scaled_depth(&self.grid, camera, intr, distortion, self.cfg.depth_sigma, &mut self.streams.depth)
    }

    /// Noisy UAV GNSS reading of `truth`.
    pub fn sample_gnss(&mut self, truth: &Pose) -> Pose {
        self.uav_gnss.sample(self.clock, truth)
    }

    /// Noisy monitor GNSS reading.
    pub fn sample_monitor_gnss(&mut self, truth: &Pose) -> Pose {
        self.monitor_gnss.sample(self.clock, truth)
    }

    /// Camera pose as the UAV estimates it: GNSS position plus gimbal-reported attitude.
    pub fn estimated_camera_pose(&mut self) -> Pose {
        let cam = self.camera_pose();
        let gnss = self.sample_gnss(&cam);
        let s = self.cfg.gimbal_sigma_deg;
        let (dy, dp): (f64, f64) = if s > 0.0 {
            (self.streams.gimbal.sample(StandardNormal), self.streams.gimbal.sample(StandardNormal))
        } else {
            (0.0, 0.0)
        };
        Pose::new(gnss.position, cam.yaw + s * dy, cam.pitch + s * dp)
    }

    pub fn uniform_draw(&mut self) -> f64 {
        self.streams.gimbal.random()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.clock,
            uav_pose: Pose::new(self.uav.position, self.uav.gimbal_yaw, 0.0),
            gimbal_pose: self.camera_pose(),
            fires_ground_truth: self.fires.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn world() -> WorldState {
        let grid = OccupancyGrid::empty(EnuPoint::new(-100.0, -100.0, -2.0), 1.0, [200, 200, 40]).unwrap();
        WorldState::new(
            Arc::new(grid),
            vec![FireSource::new(EnuPoint::new(0.0, 40.0, 0.0), 2.0, 600.0)],
            EnuPoint::new(0.0, 0.0, 5.0),
            EnuPoint::new(-30.0, 20.0, 20.0),
            WorldConfig::default(),
            42,
        )
    }

    #[test]
    fn ten_meters_at_one_meter_per_second_takes_200_steps() {
        let mut w = world();
        w.command_waypoint(EnuPoint::new(10.0, 0.0, 5.0), 1.0, 0.0);
        for i in 1..=200 {
            let ev = w.step();
            assert_eq!(ev.contains(&WorldEvent::Arrived), i == 200, "step {i}");
        }
        assert_eq!(w.uav.position, EnuPoint::new(10.0, 0.0, 5.0));
    }

    #[test]
    fn five_second_hold_keeps_position_for_100_steps() {
        let mut w = world();
        w.command_waypoint(EnuPoint::new(1.0, 0.0, 5.0), 1.0, 5.0);
        while !w.step().contains(&WorldEvent::Arrived) {}
        let held = w.uav.position;
        for i in 1..=100 {
            let ev = w.step();
            assert_eq!(w.uav.position, held);
            assert_eq!(ev.contains(&WorldEvent::HoldComplete), i == 100);
        }
    }

    #[test]
    fn speed_limit_between_states() {
        let mut w = world();
        w.command_waypoint(EnuPoint::new(30.0, -20.0, 25.0), 1.0, 1.0);
        let mut prev = w.uav.position;
        for _ in 0..1000 {
            w.step();
            assert!(w.uav.position.distance(&prev) <= 1.0 * w.cfg.dt + 1e-9);
            prev = w.uav.position;
        }
    }

    #[test]
    fn clock_advances_by_exact_steps() {
        let mut w = world();
        for _ in 0..1234 {
            w.step();
        }
        assert_eq!(w.clock, 1234.0 * 0.05);
    }

    #[test]
    fn water_outside_radius_does_nothing() {
        let mut w = world();
        w.water_flowing = true;
        w.apply_water(&EnuPoint::new(0.0, 43.0, 0.0), 0.05);
        assert_eq!(w.fires[0].wet_accum, 0.0);
    }

    #[test]
    fn continuous_wetting_extinguishes_and_cools() {
        let mut w = world();
        w.water_flowing = true;
        let mut out = false;
        for _ in 0..400 {
            w.step();
            out |= !w.apply_water(&EnuPoint::new(0.5, 40.0, 0.0), 0.05).is_empty();
        }
        assert!(out && w.fires[0].is_extinguished());
        for _ in 0..600 {
            w.step();
        }
        // 30 s after extinction: excess temperature decays by 1/e
        let excess = w.fires[0].temperature - 20.0;
        assert!((excess - 580.0 * (-1f64).exp()).abs() < 1.0, "{excess}");
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let run = || {
            let mut w = world();
            w.command_waypoint(EnuPoint::new(5.0, 5.0, 10.0), 1.0, 2.0);
            w.set_gimbal_target(Some(EnuPoint::new(0.0, 40.0, 0.0)));
            let mut log = Vec::new();
            for _ in 0..300 {
                w.step();
                log.push(format!("{:?}", w.estimated_camera_pose()));
            }
            let intr = Intrinsics::from_hfov(64, 48, 45.0);
            let cam = w.camera_pose();
            log.push(format!("{:?}", w.render_thermal(&cam, &intr).temps));
            log
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn intermittent_wetting_is_monotone(schedule in proptest::collection::vec(any::<bool>(), 1..400)) {
            let mut w = world();
            w.water_flowing = true;
            let mut last = 0.0;
            for hit in schedule {
                let landing = if hit { EnuPoint::new(0.0, 41.0, 0.0) } else { EnuPoint::new(0.0, 50.0, 0.0) };
                w.step();
                w.apply_water(&landing, 0.05);
                prop_assert!(w.fires[0].wet_accum >= last);
                last = w.fires[0].wet_accum;
            }
        }
    }
}
