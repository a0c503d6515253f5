//! The fixed-step loop tying world, WMC, GCS and operator together.

use std::sync::Arc;

use crate::ballistics::{is_reachable, simulate_trajectory, JetParameters};
use crate::frames::{enu_to_geo, geo_to_enu, EnuPoint, GeoPoint, Pose};
use crate::gcs::mission::MissionState;
use crate::gcs::protocol::{Envelope, Message, Receiver, Sender, TrackMsg};
use crate::gcs::{Gcs, Inbox};
use crate::metrics::{compute_metrics, RunMetrics};
use crate::monitor::{MonitorState, SetpointChange, Wmc};
use crate::runlog::{link, LogRecord, LOG_VERSION};
use crate::scenario::{FunnelSpec, Scenario, ScenarioError};
use crate::world::WorldState;

/// Keep stepping this long after the mission finishes so the last messages land.
const FINISH_GRACE_S: f64 = 1.0;

/// Headless stand-in for the operator: configures, takes off, selects the
/// first reachable track and authorizes at once.
#[derive(Clone, Debug)]
pub struct ScriptedOperator {
    funnel: FunnelSpec,
    origin: GeoPoint,
    jet: JetParameters,
    sent_funnel: bool,
    funnel_ready: bool,
    sent_takeoff: bool,
    mission_state: String,
    tracks: Vec<TrackMsg>,
    nozzle: Option<EnuPoint>,
    selected: Option<u32>,
    authorized: bool,
    last_heartbeat: f64,
}

impl ScriptedOperator {
    pub fn new(funnel: FunnelSpec, origin: GeoPoint, jet: JetParameters) -> Self {
        Self {
            funnel,
            origin,
            jet,
            sent_funnel: false,
            funnel_ready: false,
            sent_takeoff: false,
            mission_state: String::new(),
            tracks: Vec::new(),
            nozzle: None,
            selected: None,
            authorized: false,
            last_heartbeat: f64::NEG_INFINITY,
        }
    }

    pub fn observe(&mut self, msg: &Message) {
        match msg {
            Message::FunnelUpdate { .. } => self.funnel_ready = true,
            Message::TelemetryUav { state, .. } => self.mission_state.clone_from(state),
            Message::TelemetryWmc { gnss: Some(g), .. } => {
                self.nozzle = geo_to_enu(g, &self.origin).ok().map(|p| p + self.jet.nozzle_offset);
            }
            Message::DetectionUpdate { tracks } => self.tracks.clone_from(tracks),
            _ => {}
        }
    }

    pub fn act(&mut self, now: f64) -> Vec<Message> {
        let mut out = Vec::new();
        if now - self.last_heartbeat >= 1.0 - 1e-9 {
            self.last_heartbeat = now;
            out.push(Message::Heartbeat {});
        }
        if !self.sent_funnel {
            self.sent_funnel = true;
            out.push(Message::FunnelSet {
                center_geo: self.funnel.center,
                margin_m: self.funnel.margin_m,
                ceiling_m: self.funnel.ceiling_m,
            });
        }
        if self.funnel_ready && !self.sent_takeoff {
            self.sent_takeoff = true;
            out.push(Message::Takeoff {});
        }
        if self.mission_state == "AwaitSelection" && self.selected.is_none() {
            if let Some(nozzle) = self.nozzle {
                let origin = self.origin;
                let pick = self.tracks.iter().find(|t| {
                    geo_to_enu(&t.geo, &origin).is_ok_and(|p| is_reachable(nozzle, p, &self.jet).0)
                });
                if let Some(t) = pick {
                    self.selected = Some(t.id);
                    out.push(Message::TargetSelect { track_id: t.id });
                }
            }
        }
        if self.mission_state == "Alternating" && self.selected.is_some() && !self.authorized {
            self.authorized = true;
            out.push(Message::Authorize {});
        }
        out
    }
}

struct Link {
    sender: Sender,
    receiver: Receiver,
    queue: Vec<Envelope>,
}

impl Link {
    fn new() -> Self {
        Self { sender: Sender::new(), receiver: Receiver::default(), queue: Vec::new() }
    }

    fn take(&mut self) -> Vec<Message> {
        let q = std::mem::take(&mut self.queue);
        q.into_iter().filter_map(|e| self.receiver.accept(e).map(|(_, m)| m)).collect()
    }
}

pub struct Sim {
    pub scenario: Scenario,
    pub world: WorldState,
    pub wmc: Wmc,
    pub gcs: Gcs,
    pub operator: Option<ScriptedOperator>,
    pub records: Vec<LogRecord>,
    pub seed: u64,
    pub finished: Option<(MissionState, String)>,
    /// Envelopes for an attached console, drained by the network service.
    pub console_out: Vec<Envelope>,
    /// Stop the WMC heartbeat, to exercise link-loss handling.
    pub wmc_silent: bool,
    links: [Link; 4],
    net_rx: Receiver,
    jet: JetParameters,
    monitor_truth: Pose,
    wmc_last_heartbeat: f64,
    finish_at: Option<f64>,
}

const C2G: usize = 0;
const G2C: usize = 1;
const G2W: usize = 2;
const W2G: usize = 3;

impl Sim {
    pub fn new(scenario: Scenario, seed_override: Option<u64>, scripted: bool) -> Result<Sim, ScenarioError> {
        let seed = seed_override.unwrap_or(scenario.seed);
        let grid = Arc::new(scenario.grid()?);
        let fires = scenario.fire_sources()?;
        let uav_start = scenario.enu(&scenario.uav_start)?;
        let monitor_base = scenario.enu(&scenario.monitor.geo)?;
        let world = WorldState::new(grid, fires, uav_start, monitor_base, scenario.world_config(), seed);
        let jet = scenario.jet_parameters()?;
        let mcfg = scenario.monitor_config();
        let state = MonitorState::new(&mcfg, 0.0, 0.0, scenario.monitor.pressure_pa);
        let wmc = Wmc::new(mcfg, state, jet, scenario.origin, world.cfg.dt);
        let aoi = match &scenario.aoi {
            Some(a) => scenario.enu(a)?,
            None => scenario.enu(&scenario.funnel.center)? + EnuPoint::new(0.0, 40.0, 0.0),
        };
        let gcs = Gcs::new(scenario.defaults.gcs.clone(), scenario.origin, jet, aoi);
        let operator = scripted.then(|| ScriptedOperator::new(scenario.funnel.clone(), scenario.origin, jet));
        let header = LogRecord::Header {
            version: LOG_VERSION,
            scenario: scenario.name.clone(),
            seed,
            dt: world.cfg.dt,
            origin: scenario.origin,
            fires: world.fires.iter().map(|f| f.position).collect(),
        };
        Ok(Sim {
            monitor_truth: Pose::new(monitor_base, 0.0, 0.0),
            scenario,
            world,
            wmc,
            gcs,
            operator,
            records: vec![header],
            seed,
            finished: None,
            console_out: Vec::new(),
            wmc_silent: false,
            links: [Link::new(), Link::new(), Link::new(), Link::new()],
            net_rx: Receiver::default(),
            jet,
            wmc_last_heartbeat: f64::NEG_INFINITY,
            finish_at: None,
        })
    }

    pub fn now(&self) -> f64 {
        self.world.clock
    }

    fn send(&mut self, idx: usize, name: &str, msg: &Message) {
        let now = self.world.clock;
        let env = self.links[idx].sender.wrap(msg, now);
        self.records.push(LogRecord::Msg { t: now, link: name.to_string(), env: env.clone() });
        if idx == G2C {
            self.console_out.push(env.clone());
        }
        self.links[idx].queue.push(env);
    }

    /// A frame from an attached console, checked like any network frame.
    /// Returns false when the frame was dropped.
    pub fn inject_console_line(&mut self, line: &str) -> bool {
        let Some((env, _)) = self.net_rx.accept_line(line) else { return false };
        self.records.push(LogRecord::Msg { t: self.world.clock, link: link::CONSOLE_TO_GCS.to_string(), env: env.clone() });
        self.links[C2G].queue.push(env);
        true
    }

    /// Typed console message from an in-process client.
    pub fn send_console(&mut self, msg: &Message) {
        self.send(C2G, link::CONSOLE_TO_GCS, msg);
    }

    pub fn malformed_console_frames(&self) -> u64 {
        self.net_rx.malformed
    }

    /// Advance one fixed tick. Messages sent during a tick are delivered on the next.
    pub fn step(&mut self) {
        if self.finished.is_some() {
            return;
        }
        let events = self.world.step();
        let now = self.world.clock;

        let console_in = self.links[C2G].take();
        let wmc_in = self.links[W2G].take();
        let to_wmc = self.links[G2W].take();
        let to_console = self.links[G2C].take();

        // WMC side
        for msg in to_wmc {
            match msg {
                Message::TargetAssign { geo, .. } => {
                    let change = self.wmc.on_target(&geo, now);
                    if matches!(change, SetpointChange::Created | SetpointChange::Replaced) {
                        let sp = self.wmc.setpoint.expect("just written");
                        self.records.push(LogRecord::Aim { t: now, yaw: sp.yaw, pitch: sp.pitch });
                    }
                }
                Message::ModeSet { mode } => self.wmc.set_mode(mode, now),
                Message::ManualVelocity { pan_cmd, tilt_cmd } => self.wmc.manual_command(pan_cmd, tilt_cmd, None, now),
                Message::Heartbeat {} => self.wmc.on_message(now),
                other => log::warn!("wmc ignores {}", other.kind()),
            }
        }

        // GCS
        let out = self.gcs.tick(&mut self.world, &events, Inbox { console: console_in, wmc: wmc_in });
        self.records.extend(out.records);
        for m in &out.to_wmc {
            self.send(G2W, link::GCS_TO_WMC, m);
        }
        for m in &out.to_console {
            self.send(G2C, link::GCS_TO_CONSOLE, m);
        }

        // WMC tick with fresh monitor GNSS
        let truth = self.monitor_truth;
        let g = self.world.sample_monitor_gnss(&truth);
        self.wmc.state.gnss = Some((enu_to_geo(&g.position, &self.scenario.origin), g));
        self.wmc.state.water_flowing = self.world.water_flowing;
        if let Some(t) = self.wmc.tick(now) {
            if !self.wmc_silent {
                let msg = Message::TelemetryWmc {
                    pan_deg: t.pan_deg,
                    tilt_deg: t.tilt_deg,
                    pressure_pa: t.pressure_pa,
                    mode: t.mode,
                    status: t.status,
                    gnss: t.gnss,
                };
                self.send(W2G, link::WMC_TO_GCS, &msg);
            }
        }
        if !self.wmc_silent && now - self.wmc_last_heartbeat >= 1.0 - 1e-9 {
            self.wmc_last_heartbeat = now;
            self.send(W2G, link::WMC_TO_GCS, &Message::Heartbeat {});
        }

        self.apply_jet(now);

        // operator
        if let Some(op) = self.operator.as_mut() {
            for m in &to_console {
                op.observe(m);
            }
            let msgs = op.act(now);
            for m in &msgs {
                self.send(C2G, link::CONSOLE_TO_GCS, m);
            }
        }

        self.check_end(now);
    }

    fn apply_jet(&mut self, now: f64) {
        if !self.world.water_flowing {
            self.world.jet = None;
            return;
        }
        let nozzle = self.world.monitor_base + self.jet.nozzle_offset;
        let (pan, tilt) = (self.wmc.state.pan, self.wmc.state.tilt);
        match simulate_trajectory(nozzle, pan, tilt, &self.jet, 0.02, self.world.grid.as_ref()) {
            Ok(traj) => {
                self.world.jet = Some(traj.points);
                let dt = self.world.cfg.dt;
                for ev in self.world.apply_water(&traj.landing, dt) {
                    if let crate::world::WorldEvent::FireExtinguished(index) = ev {
                        log::info!("fire {index} extinguished at {now:.2} s");
                        self.records.push(LogRecord::FireOut { t: now, index });
                    }
                }
            }
            Err(e) => {
                log::debug!("jet does not land: {e}");
                self.world.jet = None;
            }
        }
    }

    fn check_end(&mut self, now: f64) {
        let state = self.gcs.state;
        let reason = match state {
            MissionState::Finished => Some("finished"),
            MissionState::Fault => Some("fault"),
            _ if now >= self.scenario.duration_s - 1e-9 => Some("time limit"),
            _ => None,
        };
        let Some(reason) = reason else { return };
        let grace = if reason == "time limit" { 0.0 } else { FINISH_GRACE_S };
        let at = *self.finish_at.get_or_insert(now + grace);
        if now >= at - 1e-9 {
            self.records.push(LogRecord::End { t: now, state, reason: reason.to_string() });
            self.finished = Some((state, reason.to_string()));
        }
    }

    pub fn run_to_end(&mut self) {
        while self.finished.is_none() {
            self.step();
        }
    }

    pub fn metrics(&self) -> RunMetrics {
        compute_metrics(&self.records)
    }

    /// The run log as JSON lines.
    pub fn log_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_line());
            s.push('\n');
        }
        s
    }
}

/// Run a scenario to completion with the scripted operator.
pub fn run_headless(scenario: Scenario, seed: Option<u64>) -> Result<Sim, ScenarioError> {
    let mut sim = Sim::new(scenario, seed, true)?;
    sim.run_to_end();
    Ok(sim)
}
