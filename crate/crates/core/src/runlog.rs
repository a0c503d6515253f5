//! JSON-lines run log: one record per line, enough to recompute every metric.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{EnuPoint, GeoPoint, Pose};
use crate::gcs::mission::{MissionEvent, MissionState};
use crate::gcs::protocol::Envelope;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log version {found} is not supported (expected {LOG_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("log has no header")]
    MissingHeader,
    #[error("bad record on line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Named message links between the GCS and its peers.
pub mod link {
    pub const GCS_TO_CONSOLE: &str = "gcs>console";
    pub const CONSOLE_TO_GCS: &str = "console>gcs";
    pub const GCS_TO_WMC: &str = "gcs>wmc";
    pub const WMC_TO_GCS: &str = "wmc>gcs";
    pub const ALL: [&str; 4] = [GCS_TO_CONSOLE, CONSOLE_TO_GCS, GCS_TO_WMC, WMC_TO_GCS];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyframeSide {
    Explore,
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizationMethod {
    Pair,
    Depth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rec", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        version: u32,
        scenario: String,
        seed: u64,
        dt: f64,
        origin: GeoPoint,
        /// Ground truth fire positions.
        fires: Vec<EnuPoint>,
    },
    Msg {
        t: f64,
        link: String,
        env: Envelope,
    },
    Transition {
        t: f64,
        from: MissionState,
        to: MissionState,
        #[serde(flatten)]
        event: MissionEvent,
    },
    Rejected {
        t: f64,
        state: MissionState,
        #[serde(flatten)]
        event: MissionEvent,
    },
    Keyframe {
        t: f64,
        id: u64,
        side: KeyframeSide,
        gnss_pose: Pose,
        detections: usize,
    },
    Localization {
        t: f64,
        method: LocalizationMethod,
        keyframes: (u64, u64),
        position: EnuPoint,
    },
    Frame {
        t: f64,
        /// True fires inside the view and in line of sight.
        visible: u32,
        /// Of those, how many a detection box covers.
        detected: u32,
        /// Whether the selected fire's detection lies in the central image region.
        central: Option<bool>,
    },
    Aim {
        t: f64,
        yaw: f64,
        pitch: f64,
    },
    FireOut {
        t: f64,
        index: usize,
    },
    End {
        t: f64,
        state: MissionState,
        reason: String,
    },
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

pub fn write_log<W: Write>(mut w: W, records: &[LogRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()
}

/// Parsed log plus whether reading stopped at a damaged or truncated line.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedLog {
    pub records: Vec<LogRecord>,
    pub truncated: bool,
}

/// Read a log, stopping cleanly at the first unparsable line (a truncated tail).
pub fn read_log<R: BufRead>(r: R) -> Result<LoadedLog, LogError> {
    let mut records = Vec::new();
    let mut truncated = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogRecord>(&line) {
            Ok(rec) => {
                if i == 0 || records.is_empty() {
                    match &rec {
                        LogRecord::Header { version, .. } if *version != LOG_VERSION => {
                            return Err(LogError::VersionMismatch { found: *version });
                        }
                        LogRecord::Header { .. } => {}
                        _ => return Err(LogError::MissingHeader),
                    }
                }
                records.push(rec);
            }
            Err(e) => {
                if records.is_empty() {
                    return Err(LogError::BadRecord { line: i + 1, reason: e.to_string() });
                }
                log::warn!("log ends at line {} ({e}); keeping {} records", i + 1, records.len());
                truncated = true;
                break;
            }
        }
    }
    if records.is_empty() {
        return Err(LogError::MissingHeader);
    }
    Ok(LoadedLog { records, truncated })
}

/// Time spent in each mission state, in order of first entry.
pub fn state_dwell_times(records: &[LogRecord]) -> Vec<(MissionState, f64)> {
    let mut out: Vec<(MissionState, f64)> = Vec::new();
    let mut current = (MissionState::Configuring, 0.0);
    let mut end = 0.0f64;
    let add = |out: &mut Vec<(MissionState, f64)>, s: MissionState, d: f64| match out.iter_mut().find(|e| e.0 == s) {
        Some(e) => e.1 += d,
        None => out.push((s, d)),
    };
    for r in records {
        match r {
            LogRecord::Transition { t, to, .. } => {
                add(&mut out, current.0, t - current.1);
                current = (*to, *t);
            }
            LogRecord::Msg { t, .. } | LogRecord::Frame { t, .. } | LogRecord::End { t, .. } => end = end.max(*t),
            _ => {}
        }
    }
    add(&mut out, current.0, (end - current.1).max(0.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> LogRecord {
        LogRecord::Header {
            version: LOG_VERSION,
            scenario: "t".into(),
            seed: 1,
            dt: 0.05,
            origin: GeoPoint::new(48.0, 11.0, 500.0),
            fires: vec![EnuPoint::new(1.0, 2.0, 0.0)],
        }
    }

    #[test]
    fn round_trip() {
        let recs = vec![
            header(),
            LogRecord::Transition {
                t: 1.0,
                from: MissionState::Ready,
                to: MissionState::Takeoff,
                event: MissionEvent::TakeoffCmd,
            },
            LogRecord::Frame { t: 2.0, visible: 1, detected: 1, central: Some(true) },
        ];
        let mut buf = Vec::new();
        write_log(&mut buf, &recs).unwrap();
        let back = read_log(&buf[..]).unwrap();
        assert_eq!(back.records, recs);
        assert!(!back.truncated);
    }

    #[test]
    fn truncated_tail_is_tolerated() {
        let mut text = header().to_line();
        text.push('\n');
        text.push_str(&LogRecord::FireOut { t: 3.0, index: 0 }.to_line());
        text.push_str("\n{\"rec\":\"frame\",\"t\":4.0,\"vis");
        let back = read_log(text.as_bytes()).unwrap();
        assert_eq!(back.records.len(), 2);
        assert!(back.truncated);
    }

    #[test]
    fn version_mismatch() {
        let text = header().to_line().replace("\"version\":1", "\"version\":9");
        assert!(matches!(read_log(text.as_bytes()), Err(LogError::VersionMismatch { found: 9 })));
    }

    #[test]
    fn dwell_times() {
        let recs = vec![
            header(),
            LogRecord::Transition { t: 1.0, from: MissionState::Configuring, to: MissionState::Ready, event: MissionEvent::FunnelSet },
            LogRecord::End { t: 4.0, state: MissionState::Ready, reason: "x".into() },
        ];
        assert_eq!(state_dwell_times(&recs), vec![(MissionState::Configuring, 1.0), (MissionState::Ready, 3.0)]);
    }
}
