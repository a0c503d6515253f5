//! Coordinate frames, terrain ingestion and the voxel world model.

mod geo;
mod grid;
mod terrain;

pub use geo::{
    bearing_deg, direction_from_angles, enu_to_geo, geo_to_enu, look_angles, shortest_arc_deg, wrap_deg_360,
    EnuPoint, GeoPoint, Pose, METERS_PER_DEGREE,
};
pub use grid::{build_grid, build_grid_with_cap, OccupancyGrid, RayHit, DEFAULT_MAX_CELLS, MAX_CELL_SIZE, MIN_CELL_SIZE};
pub use terrain::{ExtrudedBox, Heightmap};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FramesError {
    #[error("point is {dlat:.3}° of latitude from the origin, outside the local tangent plane")]
    OutOfTangentRange { dlat: f64 },
    #[error("building {index} lies outside the terrain extent")]
    Coverage { index: usize },
    #[error("building {index} has an empty footprint or non-positive height")]
    InvalidBuilding { index: usize },
    #[error("cell size {0} m outside the supported range")]
    InvalidCellSize(f64),
    #[error("grid of {dims:?} cells exceeds the cap of {max_cells}")]
    GridTooLarge { dims: [usize; 3], max_cells: usize },
    #[error("heightmap: {0}")]
    Heightmap(String),
}
