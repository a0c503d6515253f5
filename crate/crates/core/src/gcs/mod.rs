//! Ground control station: mission logic, perception pipeline and message routing.

pub mod mission;
pub mod protocol;

use serde::{Deserialize, Serialize};

use crate::ballistics::{is_reachable, simulate_trajectory, JetParameters};
use crate::frames::{enu_to_geo, geo_to_enu, EnuPoint, GeoPoint, Pose};
use crate::funnel::{
    compute_funnel_with, plan_exploration_poses, plan_triangulation_poses, FlightFunnel, FunnelConfig,
    ObservationPlan,
};
use crate::monitor::ControlMode;
use crate::perception::{
    detect_heat, detect_jet, in_central_region, keyframe_gate, localize_by_rescaled_depth, triangulate_pair,
    HeatDetection, Keyframe, TrackConfig, TrackStore,
};
use crate::runlog::{KeyframeSide, LocalizationMethod, LogRecord};
use crate::world::{fire_visible, reported_baseline, Intrinsics, ThermalImage, WorldEvent, WorldState};
use mission::{advance, Guards, MissionEvent, MissionState};
use protocol::{GimbalAngles, Message, TrackMsg};

/// What to do when the selected fire's track disappears mid-engagement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackLostPolicy {
    HoldLast,
    Revert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcsConfig {
    pub hold_s: f64,
    pub baseline_m: f64,
    pub standoff_m: f64,
    pub climb_above_floor_m: f64,
    pub replan_m: f64,
    pub reassign_m: f64,
    pub keepalive_s: f64,
    pub heartbeat_period_s: f64,
    pub heartbeat_timeout_s: f64,
    pub frame_rate_hz: f64,
    pub uav_telemetry_rate_hz: f64,
    pub keyframe_distance_m: f64,
    pub threshold_c: f64,
    pub central_frac: f64,
    pub extinguish_unseen_s: f64,
    pub track_lost: TrackLostPolicy,
    pub tracks: TrackConfig,
    pub funnel_horizon_m: f64,
    /// Ground crew opens the valve as soon as the engagement is authorized.
    pub open_valve_on_engage: bool,
    pub water_band_c: (f64, f64),
}

impl Default for GcsConfig {
    fn default() -> Self {
        Self {
            hold_s: 5.0,
            baseline_m: 6.0,
            standoff_m: 30.0,
            climb_above_floor_m: 20.0,
            replan_m: 2.0,
            reassign_m: 0.25,
            keepalive_s: 1.0,
            heartbeat_period_s: 1.0,
            heartbeat_timeout_s: 2.0,
            frame_rate_hz: 1.0,
            uav_telemetry_rate_hz: 10.0,
            keyframe_distance_m: 5.0,
            threshold_c: 80.0,
            central_frac: 0.5,
            extinguish_unseen_s: 8.0,
            track_lost: TrackLostPolicy::HoldLast,
            tracks: TrackConfig::default(),
            funnel_horizon_m: 100.0,
            open_valve_on_engage: true,
            water_band_c: (5.0, 16.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UavTask {
    None,
    Climb,
    Explore(usize),
    Observe(KeyframeSide),
}

/// Inbound traffic for one tick.
#[derive(Clone, Debug, Default)]
pub struct Inbox {
    pub console: Vec<Message>,
    pub wmc: Vec<Message>,
}

/// Outbound traffic and log records produced by one tick.
#[derive(Clone, Debug, Default)]
pub struct Outbox {
    pub to_console: Vec<Message>,
    pub to_wmc: Vec<Message>,
    pub records: Vec<LogRecord>,
}

pub struct Gcs {
    pub cfg: GcsConfig,
    pub origin: GeoPoint,
    pub intr: Intrinsics,
    pub jet: JetParameters,
    pub state: MissionState,
    pub funnel: Option<FlightFunnel>,
    pub tracks: TrackStore,
    pub selected: Option<u32>,
    pub plan: Option<ObservationPlan>,
    pub aoi: EnuPoint,
    pub nozzle_estimate: Option<EnuPoint>,
    wmc_angles: Option<(f64, f64)>,
    exploration: Vec<Pose>,
    exploration_done: bool,
    climb_alt: f64,
    plan_anchor: EnuPoint,
    task: UavTask,
    last_kf: Option<(Keyframe, Pose)>,
    next_kf_id: u64,
    last_assign: Option<(EnuPoint, f64)>,
    assigned_track: Option<(u32, EnuPoint, f64)>,
    last_seen_selected: f64,
    last_heartbeat: f64,
    last_rx_console: Option<f64>,
    last_rx_wmc: Option<f64>,
    comm_lost: bool,
    ticks: u64,
}

fn track_msgs(tracks: &TrackStore, origin: &GeoPoint) -> Vec<TrackMsg> {
    tracks
        .tracks
        .iter()
        .map(|t| TrackMsg {
            id: t.id,
            geo: enu_to_geo(&t.position, origin),
            covariance_m: t.covariance_proxy,
            observations: t.observations,
            last_seen: t.last_seen,
        })
        .collect()
}

fn bbox_contains(d: &HeatDetection, u: f64, v: f64, pad: f64) -> bool {
    let (u0, v0, u1, v1) = d.bbox;
    u >= u0 as f64 - pad && u <= u1 as f64 + pad && v >= v0 as f64 - pad && v <= v1 as f64 + pad
}

impl Gcs {
    pub fn new(cfg: GcsConfig, origin: GeoPoint, jet: JetParameters, aoi: EnuPoint) -> Self {
        let tracks = TrackStore::new(cfg.tracks);
        Self {
            cfg,
            origin,
            intr: Intrinsics::default(),
            jet,
            state: MissionState::Configuring,
            funnel: None,
            tracks,
            selected: None,
            plan: None,
            aoi,
            nozzle_estimate: None,
            wmc_angles: None,
            exploration: Vec::new(),
            exploration_done: false,
            climb_alt: 0.0,
            plan_anchor: EnuPoint::ORIGIN,
            task: UavTask::None,
            last_kf: None,
            next_kf_id: 0,
            last_assign: None,
            assigned_track: None,
            last_seen_selected: 0.0,
            last_heartbeat: f64::NEG_INFINITY,
            last_rx_console: None,
            last_rx_wmc: None,
            comm_lost: false,
            ticks: 0,
        }
    }

    fn guards(&self, track_id: Option<u32>) -> Guards {
        let track_exists = track_id.is_some_and(|id| self.tracks.get(id).is_some());
        Guards {
            exploration_done: self.exploration_done,
            track_exists,
            target_reachable: self.selected_reachable(),
            target_lost: self.selected.is_some_and(|id| self.tracks.get(id).is_none())
                && self.cfg.track_lost == TrackLostPolicy::Revert,
        }
    }

    /// Reachability of the selected track from the monitor's reported position.
    pub fn selected_reachable(&self) -> bool {
        let (Some(id), Some(nozzle)) = (self.selected, self.nozzle_estimate) else { return false };
        self.tracks.get(id).is_some_and(|t| is_reachable(nozzle, t.position, &self.jet).0)
    }

    /// Apply `event`; logs the transition or the rejection.
    fn fire_event(&mut self, event: MissionEvent, now: f64, out: &mut Outbox) -> bool {
        let track = match event {
            MissionEvent::TargetSelected { track_id } => Some(track_id),
            _ => None,
        };
        match advance(self.state, event, self.guards(track)) {
            Ok(next) => {
                if next != self.state {
                    log::info!("mission {:?} -> {:?} on {:?}", self.state, next, event);
                }
                out.records.push(LogRecord::Transition { t: now, from: self.state, to: next, event });
                self.state = next;
                true
            }
            Err(e) => {
                log::warn!("{e}");
                out.records.push(LogRecord::Rejected { t: now, state: self.state, event });
                false
            }
        }
    }

    fn command(&self, world: &mut WorldState, target: EnuPoint, speed: f64, hold: f64) {
        // every emitted waypoint is inside the funnel
        let target = match &self.funnel {
            Some(f) if !f.contains(&target) => f.clamp_into(&target),
            _ => target,
        };
        debug_assert!(self.funnel.as_ref().is_none_or(|f| f.contains(&target)));
        world.command_waypoint(target, speed, hold);
    }

    pub fn tick(&mut self, world: &mut WorldState, uav_events: &[WorldEvent], inbox: Inbox) -> Outbox {
        let now = world.clock;
        let mut out = Outbox::default();

        for msg in inbox.wmc {
            self.last_rx_wmc = Some(now);
            if let Message::TelemetryWmc { pan_deg, tilt_deg, gnss, .. } = &msg {
                self.wmc_angles = Some((*pan_deg, *tilt_deg));
                if let Some(g) = gnss {
                    self.nozzle_estimate = geo_to_enu(g, &self.origin).ok().map(|p| p + self.jet.nozzle_offset);
                }
                out.to_console.push(msg.clone());
            }
        }
        for msg in inbox.console {
            self.last_rx_console = Some(now);
            self.handle_console(world, msg, now, &mut out);
        }

        self.check_links(now, &mut out);
        if self.state == MissionState::Fault && world.water_flowing {
            // a lost link closes the valve
            world.water_flowing = false;
        }

        for ev in uav_events {
            match ev {
                WorldEvent::Arrived => self.on_arrival(world, now, &mut out),
                WorldEvent::HoldComplete => self.on_hold_complete(world, now, &mut out),
                WorldEvent::FireExtinguished(_) => {}
            }
        }

        let frame_every = (1.0 / (self.cfg.frame_rate_hz * world.cfg.dt)).round().max(1.0) as u64;
        let active = matches!(
            self.state,
            MissionState::InitialExploration | MissionState::AwaitSelection | MissionState::Alternating | MissionState::Engaged
        );
        self.ticks += 1;
        if active && self.ticks % frame_every == 0 {
            self.process_frame(world, now, &mut out);
        }

        if self.state == MissionState::Engaged {
            self.stream_assignment(now, &mut out);
        }

        let telem_every = (1.0 / (self.cfg.uav_telemetry_rate_hz * world.cfg.dt)).round().max(1.0) as u64;
        if self.ticks % telem_every == 0 {
            let cam = world.camera_pose();
            out.to_console.push(Message::TelemetryUav {
                pose_geo: enu_to_geo(&world.uav.position, &self.origin),
                gimbal: GimbalAngles { yaw_deg: cam.yaw, pitch_deg: cam.pitch },
                state: self.state.name().to_string(),
            });
        }
        if now - self.last_heartbeat >= self.cfg.heartbeat_period_s - 1e-9 {
            self.last_heartbeat = now;
            out.to_console.push(Message::Heartbeat {});
            out.to_wmc.push(Message::Heartbeat {});
        }
        out
    }

    fn check_links(&mut self, now: f64, out: &mut Outbox) {
        if self.comm_lost {
            return;
        }
        let timeout = self.cfg.heartbeat_timeout_s;
        let stale = |last: Option<f64>| last.is_some_and(|t| now - t > timeout);
        if stale(self.last_rx_console) || stale(self.last_rx_wmc) {
            self.comm_lost = true;
            log::warn!("heartbeat timeout at {now:.2} s");
            if self.fire_event(MissionEvent::CommLoss, now, out) {
                self.task = UavTask::None;
            }
        }
    }

    fn handle_console(&mut self, world: &mut WorldState, msg: Message, now: f64, out: &mut Outbox) {
        match msg {
            Message::FunnelSet { center_geo, margin_m, ceiling_m } => {
                let center = match geo_to_enu(&center_geo, &self.origin) {
                    Ok(c) => c,
                    Err(e) => {
                        log::warn!("funnel.set rejected: {e}");
                        return;
                    }
                };
                let cfg = FunnelConfig {
                    margin: margin_m,
                    horizon: self.cfg.funnel_horizon_m,
                    ceiling_alt: Some(center.u + ceiling_m),
                    ..FunnelConfig::default()
                };
                match compute_funnel_with(&world.grid, center, &cfg) {
                    Ok(f) => {
                        if self.fire_event(MissionEvent::FunnelSet, now, out) {
                            out.to_console.push(Message::FunnelUpdate {
                                center_geo: enu_to_geo(&f.center, &self.origin),
                                cyl_radius_m: f.cyl_radius,
                                cone_slope: f.cone_slope,
                                floor_alt_m: f.floor_alt,
                                ceiling_alt_m: f.ceiling_alt,
                                horizon_m: f.horizon,
                                margin_m: f.safety_margin,
                            });
                            self.climb_alt = (f.floor_alt + self.cfg.climb_above_floor_m).min(f.ceiling_alt);
                            self.funnel = Some(f);
                        }
                    }
                    Err(e) => log::warn!("funnel.set rejected: {e}"),
                }
            }
            Message::Takeoff {} => {
                if self.fire_event(MissionEvent::TakeoffCmd, now, out) {
                    let p = world.uav.position;
                    self.task = UavTask::Climb;
                    world.set_gimbal_target(Some(self.aoi));
                    self.command(world, p.with_u(self.climb_alt), world.cfg.uav_transit_speed, 0.0);
                }
            }
            Message::TargetSelect { track_id } => {
                let was_idle = !matches!(self.state, MissionState::Alternating);
                if self.fire_event(MissionEvent::TargetSelected { track_id }, now, out) {
                    self.selected = Some(track_id);
                    self.last_seen_selected = now;
                    self.replan(now);
                    if was_idle || self.task == UavTask::None {
                        self.fly_to_side(world, KeyframeSide::Left, world.cfg.uav_transit_speed);
                    }
                }
            }
            Message::Authorize {} => {
                if self.fire_event(MissionEvent::Authorize, now, out) {
                    world.water_flowing = self.cfg.open_valve_on_engage;
                    self.last_assign = None;
                    self.stream_assignment(now, out);
                }
            }
            Message::ModeSet { mode } => {
                if mode == ControlMode::Manual {
                    self.fire_event(MissionEvent::Abort, now, out);
                }
                out.to_wmc.push(Message::ModeSet { mode });
            }
            Message::ManualVelocity { pan_cmd, tilt_cmd } => {
                out.to_wmc.push(Message::ManualVelocity { pan_cmd, tilt_cmd });
            }
            Message::Reset {} => {
                if self.fire_event(MissionEvent::Reset, now, out) {
                    self.reset_mission(world);
                }
            }
            Message::Heartbeat {} => {}
            other => log::warn!("unexpected {} from console", other.kind()),
        }
    }

    fn reset_mission(&mut self, world: &mut WorldState) {
        world.water_flowing = false;
        world.jet = None;
        self.funnel = None;
        self.tracks = TrackStore::new(self.cfg.tracks);
        self.selected = None;
        self.plan = None;
        self.exploration.clear();
        self.exploration_done = false;
        self.task = UavTask::None;
        self.last_kf = None;
        self.last_assign = None;
        self.assigned_track = None;
        self.comm_lost = false;
    }

    fn replan(&mut self, now: f64) {
        let (Some(f), Some(id)) = (&self.funnel, self.selected) else { return };
        let Some(track) = self.tracks.get(id) else { return };
        let target = track.position;
        let eye = f.center.with_u(self.climb_alt);
        let dir = (eye - target).vec();
        match plan_triangulation_poses(f, target, dir, self.cfg.standoff_m, self.cfg.baseline_m) {
            Ok(plan) => {
                log::info!("t={now:.2}: planned triangulation poses, baseline {:.2} m", plan.baseline);
                self.plan = Some(plan);
                self.plan_anchor = target;
            }
            Err(e) => log::warn!("triangulation planning failed: {e}"),
        }
    }

    fn fly_to_side(&mut self, world: &mut WorldState, side: KeyframeSide, speed: f64) {
        let Some(plan) = &self.plan else { return };
        let pose = if side == KeyframeSide::Left { plan.left } else { plan.right };
        if let Some(t) = self.selected.and_then(|id| self.tracks.get(id)) {
            world.set_gimbal_target(Some(t.position));
        }
        self.task = UavTask::Observe(side);
        self.command(world, pose.position, speed, self.cfg.hold_s);
    }

    fn on_arrival(&mut self, world: &mut WorldState, now: f64, out: &mut Outbox) {
        let side = match self.task {
            UavTask::Explore(_) => KeyframeSide::Explore,
            UavTask::Observe(s) => s,
            _ => return,
        };
        self.capture_keyframe(world, now, side, out);
    }

    fn on_hold_complete(&mut self, world: &mut WorldState, now: f64, out: &mut Outbox) {
        match self.task {
            UavTask::Climb => {
                self.task = UavTask::None;
                if self.fire_event(MissionEvent::PoseReached, now, out) {
                    let Some(f) = &self.funnel else { return };
                    match plan_exploration_poses(f, self.climb_alt, self.aoi) {
                        Ok((a, b)) => {
                            self.exploration = vec![a, b];
                            self.task = UavTask::Explore(0);
                            self.command(world, a.position, world.cfg.uav_transit_speed, self.cfg.hold_s);
                        }
                        Err(e) => log::warn!("exploration planning failed: {e}"),
                    }
                }
            }
            UavTask::Explore(i) => {
                self.fire_event(MissionEvent::PoseReached, now, out);
                if i + 1 < self.exploration.len() {
                    self.task = UavTask::Explore(i + 1);
                    let p = self.exploration[i + 1].position;
                    self.command(world, p, world.cfg.uav_transit_speed, self.cfg.hold_s);
                } else {
                    self.task = UavTask::None;
                    self.exploration_done = true;
                    self.fire_event(MissionEvent::DetectionsUpdated, now, out);
                }
            }
            UavTask::Observe(side) => {
                if !matches!(self.state, MissionState::Alternating | MissionState::Engaged) {
                    self.task = UavTask::None;
                    return;
                }
                self.fire_event(MissionEvent::PoseReached, now, out);
                let next = if side == KeyframeSide::Left { KeyframeSide::Right } else { KeyframeSide::Left };
                self.fly_to_side(world, next, world.cfg.uav_max_speed);
            }
            UavTask::None => {}
        }
    }

    fn capture_keyframe(&mut self, world: &mut WorldState, now: f64, side: KeyframeSide, out: &mut Outbox) {
        let truth = world.camera_pose();
        let image = world.render_thermal(&truth, &self.intr);
        let detections = detect_heat(&image, self.cfg.threshold_c);
        let gnss_pose = world.estimated_camera_pose();
        if !keyframe_gate(self.last_kf.as_ref().map(|k| &k.0.gnss_pose), &gnss_pose, self.cfg.keyframe_distance_m) {
            log::debug!("t={now:.2}: frame rejected by keyframe gate");
            return;
        }
        let kf = Keyframe { id: self.next_kf_id, image: std::sync::Arc::new(image), gnss_pose, detections };
        self.next_kf_id += 1;
        out.records.push(LogRecord::Keyframe { t: now, id: kf.id, side, gnss_pose, detections: kf.detections.len() });

        if let Some((prev, prev_truth)) = &self.last_kf {
            if let Ok(cands) = triangulate_pair(prev, &kf) {
                for c in cands {
                    out.records.push(LogRecord::Localization {
                        t: now,
                        method: LocalizationMethod::Pair,
                        keyframes: (prev.id, kf.id),
                        position: c.position,
                    });
                }
            }
            let distortion = world.draw_distortion();
            let depth = world.scaled_depth_oracle(&truth, &self.intr, distortion);
            let rep = reported_baseline(prev_truth, &truth, distortion);
            let gnss_baseline = prev.gnss_pose.position.distance(&kf.gnss_pose.position);
            match localize_by_rescaled_depth(&kf, &depth, rep, gnss_baseline, world.cfg.depth_sigma) {
                Ok(cands) => {
                    for c in &cands {
                        out.records.push(LogRecord::Localization {
                            t: now,
                            method: LocalizationMethod::Depth,
                            keyframes: (prev.id, kf.id),
                            position: c.position,
                        });
                    }
                    self.tracks.fuse(&cands, now);
                }
                Err(e) => log::warn!("depth localization failed: {e}"),
            }
        } else {
            self.tracks.fuse(&[], now);
        }
        self.last_kf = Some((kf, truth));
        out.to_console.push(Message::DetectionUpdate { tracks: track_msgs(&self.tracks, &self.origin) });

        if let Some(id) = self.selected {
            if let Some(pos) = self.tracks.get(id).map(|t| t.position) {
                if pos.distance(&self.plan_anchor) > self.cfg.replan_m {
                    self.replan(now);
                }
                world.set_gimbal_target(Some(pos));
            }
        }
        if self.state != MissionState::InitialExploration || self.exploration_done {
            let before = self.state;
            self.fire_event(MissionEvent::DetectionsUpdated, now, out);
            if self.state == MissionState::AwaitSelection && before != MissionState::AwaitSelection {
                // selected track lost under the revert policy
                self.selected = None;
                self.plan = None;
                self.task = UavTask::None;
                world.water_flowing = false;
                world.jet = None;
            }
        }
    }

    /// Regular thermal frame: detection statistics, jet segmentation and the
    /// extinguish check.
    fn process_frame(&mut self, world: &mut WorldState, now: f64, out: &mut Outbox) {
        let truth = world.camera_pose();
        let image = world.render_thermal(&truth, &self.intr);
        let dets = detect_heat(&image, self.cfg.threshold_c);
        let est = world.estimated_camera_pose();

        let (mut visible, mut detected) = (0u32, 0u32);
        for fire in world.fires.iter().filter(|f| !f.is_extinguished()) {
            let Some((u, v)) = self.intr.project(&truth, &fire.position) else { continue };
            if !self.intr.in_image(u, v) || !fire_visible(&world.grid, &truth.position, fire) {
                continue;
            }
            visible += 1;
            if dets.iter().any(|d| bbox_contains(d, u, v, 2.0)) {
                detected += 1;
            }
        }

        let mut central = None;
        if let Some(track) = self.selected.and_then(|id| self.tracks.get(id)) {
            if let Some((u, v)) = self.intr.project(&est, &track.position) {
                let seen = dets.iter().find(|d| bbox_contains(d, u, v, 10.0));
                if let Some(d) = seen {
                    self.last_seen_selected = now;
                    central = Some(in_central_region(&self.intr, d.centroid.0, d.centroid.1, self.cfg.central_frac));
                } else if matches!(self.state, MissionState::Alternating | MissionState::Engaged) {
                    central = Some(false);
                }
            }
        }
        out.records.push(LogRecord::Frame { t: now, visible, detected, central });

        if self.state == MissionState::Engaged && world.water_flowing {
            self.observe_jet(world, &image, &est, out);
            if now - self.last_seen_selected >= self.cfg.extinguish_unseen_s {
                if self.fire_event(MissionEvent::Extinguished, now, out) {
                    world.water_flowing = false;
                    world.jet = None;
                    self.task = UavTask::None;
                }
            }
        }
    }

    fn observe_jet(&mut self, world: &WorldState, image: &ThermalImage, est: &Pose, out: &mut Outbox) {
        let (Some(nozzle), Some((pan, tilt))) = (self.nozzle_estimate, self.wmc_angles) else { return };
        let Ok(traj) = simulate_trajectory(nozzle, pan, tilt, &self.jet, 0.02, world.grid.as_ref()) else { return };
        let predicted: Vec<(f64, f64)> = traj.points.iter().filter_map(|p| self.intr.project(est, p)).collect();
        let (landing_geo, confidence) = match detect_jet(image, &predicted, self.cfg.water_band_c) {
            Some(obs) => {
                let (u, v) = (obs.landing_px.0 as f64, obs.landing_px.1 as f64);
                let ray = self.intr.back_project(est, u, v);
                let hit = world.grid.raycast(&est.position, &ray, 1000.0);
                (hit.map(|h| enu_to_geo(&h.point, &self.origin)), obs.confidence)
            }
            None => (None, 0.0),
        };
        out.to_console.push(Message::JetUpdate { landing_geo, confidence });
    }

    /// Send `target.assign` on significant moves and as a keep-alive; never for
    /// an unreachable track.
    fn stream_assignment(&mut self, now: f64, out: &mut Outbox) {
        let Some(id) = self.selected else { return };
        let (position, covariance) = match self.tracks.get(id) {
            Some(t) => (t.position, t.covariance_proxy),
            None => match (self.cfg.track_lost, self.assigned_track) {
                (TrackLostPolicy::HoldLast, Some((aid, p, c))) if aid == id => (p, c),
                _ => return,
            },
        };
        let reachable = self.nozzle_estimate.is_some_and(|n| is_reachable(n, position, &self.jet).0);
        if !reachable {
            return;
        }
        let due = match self.last_assign {
            None => true,
            Some((p, t)) => p.distance(&position) > self.cfg.reassign_m || now - t >= self.cfg.keepalive_s - 1e-9,
        };
        if due {
            self.last_assign = Some((position, now));
            self.assigned_track = Some((id, position, covariance));
            out.to_wmc.push(Message::TargetAssign {
                track_id: id,
                geo: enu_to_geo(&position, &self.origin),
                covariance_m: covariance,
            });
        }
    }
}
