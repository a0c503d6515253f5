//! Versioned JSON wire protocol shared by the GCS, the WMC and the console.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::frames::GeoPoint;
use crate::monitor::{ControlMode, WmcStatus};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("unsupported protocol version {0}")]
    VersionMismatch(u32),
    #[error("bad payload for {kind}: {reason}")]
    BadPayload { kind: String, reason: String },
}

/// One framed message: `{v, type, seq, stamp, payload}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub v: u32,
    #[serde(rename = "type")]
    pub kind: String,
    pub seq: u64,
    pub stamp: f64,
    pub payload: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GimbalAngles {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackMsg {
    pub id: u32,
    pub geo: GeoPoint,
    pub covariance_m: f64,
    pub observations: u32,
    pub last_seen: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload")]
pub enum Message {
    #[serde(rename = "telemetry.uav")]
    TelemetryUav { pose_geo: GeoPoint, gimbal: GimbalAngles, state: String },
    #[serde(rename = "telemetry.wmc")]
    TelemetryWmc {
        pan_deg: f64,
        tilt_deg: f64,
        pressure_pa: f64,
        mode: ControlMode,
        status: WmcStatus,
        gnss: Option<GeoPoint>,
    },
    #[serde(rename = "detection.update")]
    DetectionUpdate { tracks: Vec<TrackMsg> },
    #[serde(rename = "jet.update")]
    JetUpdate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        landing_geo: Option<GeoPoint>,
        confidence: f64,
    },
    #[serde(rename = "funnel.set")]
    FunnelSet { center_geo: GeoPoint, margin_m: f64, ceiling_m: f64 },
    /// Computed funnel, GCS to console.
    #[serde(rename = "funnel.update")]
    FunnelUpdate {
        center_geo: GeoPoint,
        cyl_radius_m: f64,
        cone_slope: f64,
        floor_alt_m: f64,
        ceiling_alt_m: f64,
        horizon_m: f64,
        margin_m: f64,
    },
    #[serde(rename = "takeoff")]
    Takeoff {},
    #[serde(rename = "target.select")]
    TargetSelect { track_id: u32 },
    #[serde(rename = "mode.set")]
    ModeSet { mode: ControlMode },
    #[serde(rename = "authorize")]
    Authorize {},
    #[serde(rename = "reset")]
    Reset {},
    #[serde(rename = "manual.velocity")]
    ManualVelocity { pan_cmd: f64, tilt_cmd: f64 },
    #[serde(rename = "target.assign")]
    TargetAssign { track_id: u32, geo: GeoPoint, covariance_m: f64 },
    #[serde(rename = "heartbeat")]
    Heartbeat {},
}

pub const KNOWN_TYPES: &[&str] = &[
    "telemetry.uav",
    "telemetry.wmc",
    "detection.update",
    "jet.update",
    "funnel.set",
    "funnel.update",
    "takeoff",
    "target.select",
    "mode.set",
    "authorize",
    "reset",
    "manual.velocity",
    "target.assign",
    "heartbeat",
];

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::TelemetryUav { .. } => "telemetry.uav",
            Message::TelemetryWmc { .. } => "telemetry.wmc",
            Message::DetectionUpdate { .. } => "detection.update",
            Message::JetUpdate { .. } => "jet.update",
            Message::FunnelSet { .. } => "funnel.set",
            Message::FunnelUpdate { .. } => "funnel.update",
            Message::Takeoff {} => "takeoff",
            Message::TargetSelect { .. } => "target.select",
            Message::ModeSet { .. } => "mode.set",
            Message::Authorize {} => "authorize",
            Message::Reset {} => "reset",
            Message::ManualVelocity { .. } => "manual.velocity",
            Message::TargetAssign { .. } => "target.assign",
            Message::Heartbeat {} => "heartbeat",
        }
    }

    fn payload(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("messages serialize");
        v.get_mut("payload").map(Value::take).unwrap_or_else(|| Value::Object(Default::default()))
    }
}

/// Sim time rounded to milliseconds, as carried on the wire.
pub fn wire_stamp(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

impl Envelope {
    pub fn parse(line: &str) -> Result<Envelope, ProtocolError> {
        let env: Envelope = serde_json::from_str(line).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
        if env.v != PROTOCOL_VERSION {
            return Err(ProtocolError::VersionMismatch(env.v));
        }
        Ok(env)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("envelopes serialize")
    }

    /// Typed payload; `Ok(None)` for a type this version does not know.
    pub fn decode(&self) -> Result<Option<Message>, ProtocolError> {
        if !KNOWN_TYPES.contains(&self.kind.as_str()) {
            return Ok(None);
        }
        let tagged = serde_json::json!({ "type": self.kind, "payload": self.payload });
        serde_json::from_value(tagged)
            .map(Some)
            .map_err(|e| ProtocolError::BadPayload { kind: self.kind.clone(), reason: e.to_string() })
    }
}

/// Sending side of one connection: stamps envelopes with a gap-free sequence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sender {
    next_seq: u64,
}

impl Sender {
    pub fn new() -> Self {
        Self { next_seq: 1 }
    }

    pub fn wrap(&mut self, msg: &Message, t: f64) -> Envelope {
        if self.next_seq == 0 {
            self.next_seq = 1;
        }
        let env = Envelope {
            v: PROTOCOL_VERSION,
            kind: msg.kind().to_string(),
            seq: self.next_seq,
            stamp: wire_stamp(t),
            payload: msg.payload(),
        };
        self.next_seq += 1;
        env
    }
}

/// Receiving side of one connection: decodes and counts what it had to drop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Receiver {
    pub last_seq: Option<u64>,
    pub malformed: u64,
    pub unknown: u64,
    pub out_of_order: u64,
}

impl Receiver {
    pub fn accept_line(&mut self, line: &str) -> Option<(Envelope, Message)> {
        let env = match Envelope::parse(line) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("dropping frame: {e}");
                self.malformed += 1;
                return None;
            }
        };
        self.accept(env)
    }

    pub fn accept(&mut self, env: Envelope) -> Option<(Envelope, Message)> {
        if self.last_seq.is_some_and(|s| env.seq <= s) {
            log::warn!("dropping {} with stale seq {}", env.kind, env.seq);
            self.out_of_order += 1;
            return None;
        }
        match env.decode() {
            Ok(Some(msg)) => {
                self.last_seq = Some(env.seq);
                Some((env, msg))
            }
            Ok(None) => {
                log::warn!("ignoring unknown message type {:?}", env.kind);
                self.last_seq = Some(env.seq);
                self.unknown += 1;
                None
            }
            Err(e) => {
                log::warn!("dropping frame: {e}");
                self.malformed += 1;
                None
            }
        }
    }
}

/// Problems found by [`validate_stream`], one per offending envelope.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checked: usize,
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Check a stream of envelopes from one connection: version, known types,
/// decodable payloads, gap-free sequence numbers and non-decreasing stamps.
pub fn validate_stream<'a>(envs: impl IntoIterator<Item = &'a Envelope>) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let mut prev: Option<&Envelope> = None;
    for env in envs {
        rep.checked += 1;
        if env.v != PROTOCOL_VERSION {
            rep.errors.push(format!("seq {}: version {}", env.seq, env.v));
        }
        match env.decode() {
            Ok(Some(_)) => {}
            Ok(None) => rep.errors.push(format!("seq {}: unknown type {}", env.seq, env.kind)),
            Err(e) => rep.errors.push(format!("seq {}: {e}", env.seq)),
        }
        if wire_stamp(env.stamp) != env.stamp {
            rep.errors.push(format!("seq {}: stamp {} not at millisecond resolution", env.seq, env.stamp));
        }
        if let Some(p) = prev {
            if env.seq != p.seq + 1 {
                rep.errors.push(format!("seq gap {} -> {}", p.seq, env.seq));
            }
            if env.stamp < p.stamp {
                rep.errors.push(format!("seq {}: stamp went backwards", env.seq));
            }
        }
        prev = Some(env);
    }
    rep
}
