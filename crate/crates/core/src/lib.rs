//! Simulation and control stack for UAV-assisted fire monitor targeting.

pub mod frames;
pub mod funnel;
pub mod ballistics;
pub mod world;
pub mod perception;
pub mod monitor;
pub mod gcs;
pub mod runlog;
pub mod metrics;
pub mod scenario;
pub mod runner;
