//! Run metrics, computed from the run log alone.

use serde::{Deserialize, Serialize};

use crate::frames::{shortest_arc_deg, EnuPoint};
use crate::gcs::mission::MissionState;
use crate::gcs::protocol::Message;
use crate::runlog::{link, KeyframeSide, LocalizationMethod, LogRecord};

/// Setpoints older than this count toward the steady-state error.
pub const SETTLE_WINDOW_S: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub central_region_fraction: f64,
    pub detection_rate: f64,
    pub alternation_count: u32,
    pub pair_localization_error_m: Option<f64>,
    pub cross_pair_error_m: Option<f64>,
    pub time_to_extinguish_s: Option<f64>,
    /// Median encoder error per axis `(pan, tilt)` once settled.
    pub steady_state_angle_err_deg: Option<(f64, f64)>,
    pub final_state: MissionState,
    pub target_assign_count: u32,
    pub keyframes: u32,
    pub sim_time_s: f64,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) })
}

fn nearest(fires: &[EnuPoint], p: &EnuPoint) -> Option<(usize, f64)> {
    fires
        .iter()
        .enumerate()
        .map(|(i, f)| (i, f.distance(p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

pub fn compute_metrics(records: &[LogRecord]) -> RunMetrics {
    let fires: Vec<EnuPoint> = records
        .iter()
        .find_map(|r| match r {
            LogRecord::Header { fires, .. } => Some(fires.clone()),
            _ => None,
        })
        .unwrap_or_default();

    let (mut visible, mut detected, mut central_n, mut central_yes) = (0u64, 0u64, 0u64, 0u64);
    let mut alternations = 0u32;
    let mut keyframes = 0u32;
    let mut pair_errors = Vec::new();
    let mut last_pair: Vec<Option<EnuPoint>> = vec![None; fires.len()];
    let mut cross = Vec::new();
    let mut extinguish = None;
    let mut final_state = MissionState::Configuring;
    let mut assigns = 0u32;
    let mut aim: Option<(f64, f64, f64)> = None;
    let (mut pan_err, mut tilt_err) = (Vec::new(), Vec::new());
    let mut t_end = 0.0f64;

    for r in records {
        match r {
            LogRecord::Frame { visible: v, detected: d, central, t } => {
                visible += *v as u64;
                detected += *d as u64;
                if let Some(c) = central {
                    central_n += 1;
                    central_yes += *c as u64;
                }
                t_end = t_end.max(*t);
            }
            LogRecord::Keyframe { side, .. } => {
                keyframes += 1;
                if *side != KeyframeSide::Explore {
                    alternations += 1;
                }
            }
            LogRecord::Localization { method: LocalizationMethod::Pair, position, .. } => {
                if let Some((i, err)) = nearest(&fires, position) {
                    pair_errors.push(err);
                    if let Some(prev) = last_pair[i] {
                        cross.push(prev.distance(position));
                    }
                    last_pair[i] = Some(*position);
                }
            }
            LogRecord::FireOut { t, .. } => {
                if extinguish.is_none() {
                    extinguish = Some(*t);
                }
            }
            LogRecord::Transition { to, t, .. } => {
                final_state = *to;
                t_end = t_end.max(*t);
            }
            LogRecord::End { state, t, .. } => {
                final_state = *state;
                t_end = t_end.max(*t);
            }
            LogRecord::Aim { t, yaw, pitch } => aim = Some((*t, *yaw, *pitch)),
            LogRecord::Msg { t, link: l, env } => {
                t_end = t_end.max(*t);
                if l == link::GCS_TO_WMC && env.kind == "target.assign" {
                    assigns += 1;
                }
                if l == link::WMC_TO_GCS && env.kind == "telemetry.wmc" {
                    if let (Some((t_aim, yaw, pitch)), Ok(Some(Message::TelemetryWmc { pan_deg, tilt_deg, .. }))) =
                        (aim, env.decode())
                    {
                        if t - t_aim >= SETTLE_WINDOW_S {
                            pan_err.push(shortest_arc_deg(pan_deg, yaw).abs());
                            tilt_err.push((tilt_deg - pitch).abs());
                        }
                    }
                }
            }
            _ => {}
        }
    }

    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    RunMetrics {
        central_region_fraction: ratio(central_yes, central_n),
        detection_rate: ratio(detected, visible),
        alternation_count: alternations,
        pair_localization_error_m: median(pair_errors),
        cross_pair_error_m: median(cross),
        time_to_extinguish_s: extinguish,
        steady_state_angle_err_deg: median(pan_err).zip(median(tilt_err)),
        final_state,
        target_assign_count: assigns,
        keyframes,
        sim_time_s: t_end,
    }
}
