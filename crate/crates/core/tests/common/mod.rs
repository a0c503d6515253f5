#![allow(dead_code)]

use std::sync::Arc;

use ladderfire::frames::{build_grid, EnuPoint, ExtrudedBox, Heightmap, OccupancyGrid, Pose};
use ladderfire::perception::{detect_heat, triangulate_pair, Keyframe, DEFAULT_THRESHOLD_C};
use ladderfire::world::{FireSource, GnssConfig, Intrinsics, WorldConfig, WorldState};

pub fn flat_grid(half_extent: f64, buildings: &[ExtrudedBox]) -> OccupancyGrid {
    let n = (2.0 * half_extent / 5.0).ceil() as usize;
    let terrain = Heightmap::flat(-half_extent, -half_extent, n, n, 5.0, 0.0);
    build_grid(&terrain, buildings, 1.0).unwrap()
}

/// World with noise scaled by `noise` relative to the defaults.
pub fn world_with_noise(grid: Arc<OccupancyGrid>, fires: Vec<FireSource>, noise: f64, seed: u64) -> WorldState {
    let base = WorldConfig::default();
    let mut cfg = WorldConfig {
        gnss: GnssConfig { sigma_yaw_deg: 1.0, ..base.gnss }.scaled(noise),
        gimbal_sigma_deg: base.gimbal_sigma_deg * noise,
        depth_sigma: base.depth_sigma * noise,
        ..base
    };
    cfg.thermal.noise_sigma_c *= noise;
    WorldState::new(grid, fires, EnuPoint::new(0.0, 0.0, 20.0), EnuPoint::new(-30.0, 20.0, 20.0), cfg, seed)
}

/// Capture a keyframe from `position` at sim time `t`, gimbal aimed at `look`.
pub fn capture(world: &mut WorldState, position: EnuPoint, look: EnuPoint, t: f64, id: u64) -> Keyframe {
    world.clock = t;
    world.uav.position = position;
    world.set_gimbal_target(Some(look));
    let cam = world.camera_pose();
    let image = world.render_thermal(&cam, &Intrinsics::default());
    let detections = detect_heat(&image, DEFAULT_THRESHOLD_C);
    let gnss_pose = world.estimated_camera_pose();
    Keyframe { id, image: Arc::new(image), gnss_pose, detections }
}

/// Single-fire triangulation geometry: cameras 5 m apart at 20 m altitude,
/// 41.8 m slant range to a ground fire.
pub fn pair_geometry() -> (EnuPoint, EnuPoint, EnuPoint) {
    let fire = EnuPoint::new(0.0, (41.8f64.powi(2) - 20.0f64.powi(2)).sqrt(), 0.0);
    (EnuPoint::new(-2.5, 0.0, 20.0), EnuPoint::new(2.5, 0.0, 20.0), fire)
}

/// Median per-pair triangulation error over `trials` seeds at the given noise scale.
/// Keyframes are 10 s apart, the alternation cadence of 5 m legs at 1 m/s plus holds.
pub fn median_pair_error(noise: f64, trials: u64, grid: &Arc<OccupancyGrid>) -> f64 {
    let (left, right, fire) = pair_geometry();
    let mut errors: Vec<f64> = (0..trials)
        .map(|seed| {
            let mut w = world_with_noise(grid.clone(), vec![FireSource::new(fire, 2.0, 600.0)], noise, 1000 + seed);
            let a = capture(&mut w, left, fire, 100.0, 0);
            let b = capture(&mut w, right, fire, 110.0, 1);
            let c = triangulate_pair(&a, &b).expect("pair must triangulate");
            assert_eq!(c.len(), 1, "seed {seed}");
            c[0].position.distance(&fire)
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    errors[errors.len() / 2]
}

pub fn pose_at(p: EnuPoint) -> Pose {
    Pose::new(p, 0.0, 0.0)
}
