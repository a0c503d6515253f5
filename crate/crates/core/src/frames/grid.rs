//! Voxel occupancy grid with exact ray traversal.

use nalgebra::Vector3;

use super::geo::EnuPoint;
use super::terrain::{ExtrudedBox, Heightmap};
use super::FramesError;

/// Upper bound on the number of cells a grid may allocate.
pub const DEFAULT_MAX_CELLS: usize = 64_000_000;

pub const MIN_CELL_SIZE: f64 = 0.25;
pub const MAX_CELL_SIZE: f64 = 10.0;

/// Dense boolean voxel grid.
///
/// Queries outside the allocated volume are well defined: everything below
/// the grid floor is occupied, everything at or above the ceiling is free,
/// and columns outside the horizontal extent are free.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    origin: EnuPoint,
    cell_size: f64,
    dims: [usize; 3],
    cells: Vec<bool>,
}

/// First occupied boundary along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub point: EnuPoint,
    pub range: f64,
}

impl OccupancyGrid {
    /// All-free grid with `dims` cells whose min corner sits at `origin`.
    pub fn empty(origin: EnuPoint, cell_size: f64, dims: [usize; 3]) -> Result<Self, FramesError> {
        Self::empty_with_cap(origin, cell_size, dims, DEFAULT_MAX_CELLS)
    }

    pub fn empty_with_cap(
        origin: EnuPoint,
        cell_size: f64,
        dims: [usize; 3],
        max_cells: usize,
    ) -> Result<Self, FramesError> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(FramesError::InvalidCellSize(cell_size));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&c| c <= max_cells)
            .ok_or(FramesError::GridTooLarge { dims, max_cells })?;
        if count == 0 {
            return Err(FramesError::GridTooLarge { dims, max_cells });
        }
        Ok(Self { origin, cell_size, dims, cells: vec![false; count] })
    }

    pub fn origin(&self) -> EnuPoint {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Max corner of the allocated volume.
    pub fn max_corner(&self) -> EnuPoint {
        self.origin
            + EnuPoint::new(
                self.dims[0] as f64 * self.cell_size,
                self.dims[1] as f64 * self.cell_size,
                self.dims[2] as f64 * self.cell_size,
            )
    }

    pub fn floor_u(&self) -> f64 {
        self.origin.u
    }

    pub fn ceiling_u(&self) -> f64 {
        self.max_corner().u
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.cells[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, occupied: bool) {
        let idx = self.index(i, j, k);
        self.cells[idx] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> EnuPoint {
        self.origin
            + EnuPoint::new(
                (i as f64 + 0.5) * self.cell_size,
                (j as f64 + 0.5) * self.cell_size,
                (k as f64 + 0.5) * self.cell_size,
            )
    }

    /// Cell containing `p`, if inside the allocated volume.
    pub fn cell_of(&self, p: &EnuPoint) -> Option<[usize; 3]> {
        let rel = (*p - self.origin) * (1.0 / self.cell_size);
        let idx = [rel.e.floor(), rel.n.floor(), rel.u.floor()];
        let mut out = [0usize; 3];
        for axis in 0..3 {
            if idx[axis] < 0.0 || idx[axis] >= self.dims[axis] as f64 {
                return None;
            }
            out[axis] = idx[axis] as usize;
        }
        Some(out)
    }

    /// Occupancy at an arbitrary point, including the out-of-bounds rules.
    pub fn is_occupied_at(&self, p: &EnuPoint) -> bool {
        if p.u < self.floor_u() {
            return true;
        }
        if p.u >= self.ceiling_u() {
            return false;
        }
        match self.cell_of(p) {
            Some([i, j, k]) => self.get(i, j, k),
            None => false,
        }
    }

    /// Top of the highest occupied cell in column `(i, j)`.
    pub fn column_top(&self, i: usize, j: usize) -> Option<f64> {
        (0..self.dims[2])
            .rev()
            .find(|&k| self.get(i, j, k))
            .map(|k| self.origin.u + (k + 1) as f64 * self.cell_size)
    }

    /// Height of the occupied surface below `(e, n)`; the grid floor if the column is empty
    /// or outside the horizontal extent.
    pub fn surface_height(&self, e: f64, n: f64) -> f64 {
        let probe = EnuPoint::new(e, n, self.origin.u + 0.5 * self.cell_size);
        match self.cell_of(&probe) {
            Some([i, j, _]) => self.column_top(i, j).unwrap_or(self.floor_u()),
            None => self.floor_u(),
        }
    }

    /// Exact voxel traversal along `dir` from `from`.
    ///
    /// Returns the first point where the ray enters occupied space, within
    /// `max_range`. A ray starting in occupied space hits at range 0.
    pub fn raycast(&self, from: &EnuPoint, dir: &Vector3<f64>, max_range: f64) -> Option<RayHit> {
        let len = dir.norm();
        if !(len > 0.0) || !(max_range >= 0.0) {
            return None;
        }
        debug_assert!((len - 1.0).abs() < 1e-6, "raycast direction must be normalized");
        let d = dir / len;

        if self.is_occupied_at(from) {
            return Some(RayHit { point: *from, range: 0.0 });
        }

        let mut limit = max_range;
        let mut best: Option<f64> = None;

        // Everything below the floor is solid, even outside the horizontal extent.
        if d.z < 0.0 {
            let t_floor = (self.floor_u() - from.u) / d.z;
            if t_floor <= limit {
                best = Some(t_floor.max(0.0));
                limit = t_floor.max(0.0);
            }
        }

        if let Some(t) = self.traverse(from, &d, limit) {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }

        best.map(|t| RayHit { point: *from + d * t, range: t })
    }

    /// First occupied hit along the segment `a -> b`.
    pub fn segment_hit(&self, a: &EnuPoint, b: &EnuPoint) -> Option<RayHit> {
        let delta = (*b - *a).vec();
        let len = delta.norm();
        if len == 0.0 {
            return self.is_occupied_at(a).then_some(RayHit { point: *a, range: 0.0 });
        }
        self.raycast(a, &(delta / len), len)
    }

    fn traverse(&self, from: &EnuPoint, d: &Vector3<f64>, limit: f64) -> Option<f64> {
        let lo = self.origin.vec();
        let hi = self.max_corner().vec();
        let p0 = from.vec();

        // slab clipping against the allocated volume
        let mut t_enter = 0.0f64;
        let mut t_exit = limit;
        for axis in 0..3 {
            if d[axis] == 0.0 {
                if p0[axis] < lo[axis] || p0[axis] >= hi[axis] {
                    return None;
                }
            } else {
                let inv = 1.0 / d[axis];
                let (mut t0, mut t1) = ((lo[axis] - p0[axis]) * inv, (hi[axis] - p0[axis]) * inv);
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                t_enter = t_enter.max(t0);
                t_exit = t_exit.min(t1);
            }
        }
        if t_enter > t_exit {
            return None;
        }

        let entry = p0 + d * t_enter;
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for axis in 0..3 {
            let rel = (entry[axis] - lo[axis]) / self.cell_size;
            let n = self.dims[axis] as i64;
            cell[axis] = (rel.floor() as i64).clamp(0, n - 1);
            if d[axis] > 0.0 {
                step[axis] = 1;
                let boundary = lo[axis] + (cell[axis] + 1) as f64 * self.cell_size;
                t_max[axis] = (boundary - p0[axis]) / d[axis];
                t_delta[axis] = self.cell_size / d[axis];
            } else if d[axis] < 0.0 {
                step[axis] = -1;
                let boundary = lo[axis] + cell[axis] as f64 * self.cell_size;
                t_max[axis] = (boundary - p0[axis]) / d[axis];
                t_delta[axis] = -self.cell_size / d[axis];
            }
        }

        let mut t = t_enter;
        loop {
            if self.get(cell[0] as usize, cell[1] as usize, cell[2] as usize) {
                return Some(t);
            }
            let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            t = t_max[axis];
            if t > t_exit {
                return None;
            }
            cell[axis] += step[axis];
            if cell[axis] < 0 || cell[axis] >= self.dims[axis] as i64 {
                return None;
            }
            t_max[axis] += t_delta[axis];
        }
    }
}

/// Voxelize terrain and buildings.
///
/// A cell is occupied iff its center lies below the terrain or inside a
/// building. The grid spans the heightmap extent horizontally and one cell
/// below the lowest terrain up to one cell above the highest roof.
pub fn build_grid(
    terrain: &Heightmap,
    buildings: &[ExtrudedBox],
    cell_size: f64,
) -> Result<OccupancyGrid, FramesError> {
    build_grid_with_cap(terrain, buildings, cell_size, DEFAULT_MAX_CELLS)
}

pub fn build_grid_with_cap(
    terrain: &Heightmap,
    buildings: &[ExtrudedBox],
    cell_size: f64,
    max_cells: usize,
) -> Result<OccupancyGrid, FramesError> {
    if !(MIN_CELL_SIZE..=MAX_CELL_SIZE).contains(&cell_size) {
        return Err(FramesError::InvalidCellSize(cell_size));
    }
    let (e0, n0, e1, n1) = terrain.extent();
    for (index, b) in buildings.iter().enumerate() {
        if !b.is_valid() {
            return Err(FramesError::InvalidBuilding { index });
        }
        if b.e_min < e0 || b.e_max > e1 || b.n_min < n0 || b.n_max > n1 {
            return Err(FramesError::Coverage { index });
        }
    }

    let solids: Vec<(ExtrudedBox, f64, f64)> = buildings
        .iter()
        .map(|b| {
            let base = b.base_height(terrain);
            (*b, base, base + b.height_m)
        })
        .collect();
    let top = solids
        .iter()
        .map(|s| s.2)
        .fold(terrain.max_height(), f64::max);

    let u_floor = (terrain.min_height() / cell_size).floor() * cell_size - cell_size;
    let u_top = (top / cell_size).ceil() * cell_size + cell_size;
    let dims = [
        ((e1 - e0) / cell_size).ceil().max(1.0) as usize,
        ((n1 - n0) / cell_size).ceil().max(1.0) as usize,
        ((u_top - u_floor) / cell_size).round().max(1.0) as usize,
    ];
    let mut grid =
        OccupancyGrid::empty_with_cap(EnuPoint::new(e0, n0, u_floor), cell_size, dims, max_cells)?;

    for j in 0..dims[1] {
        for i in 0..dims[0] {
            let c = grid.cell_center(i, j, 0);
            let ground = terrain.height_at_clamped(c.e, c.n);
            let covering: Vec<(f64, f64)> = solids
                .iter()
                .filter(|(b, _, _)| b.footprint_contains(c.e, c.n))
                .map(|(_, base, top)| (*base, *top))
                .collect();
            for k in 0..dims[2] {
                let cu = u_floor + (k as f64 + 0.5) * cell_size;
                let occupied = cu < ground || covering.iter().any(|(base, top)| cu >= *base && cu <= *top);
                if occupied {
                    grid.set(i, j, k, true);
                }
            }
        }
    }
    Ok(grid)
}
