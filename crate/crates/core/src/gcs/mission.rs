use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissionState {
    Configuring,
    Ready,
    Takeoff,
    InitialExploration,
    AwaitSelection,
    Alternating,
    Engaged,
    ManualOverride,
    Fault,
    Finished,
}

impl MissionState {
    pub const ALL: [MissionState; 10] = [
        MissionState::Configuring,
        MissionState::Ready,
        MissionState::Takeoff,
        MissionState::InitialExploration,
        MissionState::AwaitSelection,
        MissionState::Alternating,
        MissionState::Engaged,
        MissionState::ManualOverride,
        MissionState::Fault,
        MissionState::Finished,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MissionState::Configuring => "Configuring",
            MissionState::Ready => "Ready",
            MissionState::Takeoff => "Takeoff",
            MissionState::InitialExploration => "InitialExploration",
            MissionState::AwaitSelection => "AwaitSelection",
            MissionState::Alternating => "Alternating",
            MissionState::Engaged => "Engaged",
            MissionState::ManualOverride => "ManualOverride",
            MissionState::Fault => "Fault",
            MissionState::Finished => "Finished",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MissionEvent {
    FunnelSet,
    TakeoffCmd,
    PoseReached,
    DetectionsUpdated,
    TargetSelected { track_id: u32 },
    Authorize,
    Extinguished,
    Abort,
    CommLoss,
    Reset,
}

/// Facts the guarded edges depend on, supplied by the orchestrator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Guards {
    /// The exploration sweep has finished.
    pub exploration_done: bool,
    /// The track named by a selection event exists.
    pub track_exists: bool,
    /// A target is selected and the monitor can reach it.
    pub target_reachable: bool,
    /// The selected track is gone and the policy says to fall back to selection.
    pub target_lost: bool,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("invalid transition: {event:?} in {state:?}")]
pub struct InvalidTransition {
    pub state: MissionState,
    pub event: MissionEvent,
}

/// The declared edge set. Undeclared pairs leave the state unchanged.
pub fn advance(state: MissionState, event: MissionEvent, g: Guards) -> Result<MissionState, InvalidTransition> {
    use MissionEvent as E;
    use MissionState as S;
    let next = match (state, event) {
        (_, E::Abort) => Some(S::ManualOverride),
        (S::Fault | S::ManualOverride | S::Finished, E::Reset) => Some(S::Configuring),
        (S::Configuring | S::Finished | S::Fault, E::CommLoss) => None,
        (_, E::CommLoss) => Some(S::Fault),

        (S::Configuring | S::Ready, E::FunnelSet) => Some(S::Ready),
        (S::Ready, E::TakeoffCmd) => Some(S::Takeoff),
        (S::Takeoff, E::PoseReached) => Some(S::InitialExploration),
        (S::InitialExploration, E::PoseReached) => Some(S::InitialExploration),
        (S::InitialExploration, E::DetectionsUpdated) if g.exploration_done => Some(S::AwaitSelection),
        (S::InitialExploration, E::DetectionsUpdated) => Some(S::InitialExploration),
        (S::AwaitSelection, E::DetectionsUpdated) => Some(S::AwaitSelection),
        (S::AwaitSelection | S::Alternating, E::TargetSelected { .. }) if g.track_exists => Some(S::Alternating),
        (S::Alternating | S::Engaged, E::DetectionsUpdated) if g.target_lost => Some(S::AwaitSelection),
        (S::Alternating, E::PoseReached | E::DetectionsUpdated) => Some(S::Alternating),
        (S::Alternating, E::Authorize) if g.target_reachable => Some(S::Engaged),
        (S::Engaged, E::PoseReached | E::DetectionsUpdated) => Some(S::Engaged),
        (S::Engaged, E::Extinguished) => Some(S::Finished),
        _ => None,
    };
    next.ok_or(InvalidTransition { state, event })
}
