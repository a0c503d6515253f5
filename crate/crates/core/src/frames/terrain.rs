//! Terrain heightmaps (ESRI ASCII grid) and extruded building boxes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FramesError;

/// Regular terrain grid in the local ENU frame.
///
/// `xllcorner`/`yllcorner` are the east/north coordinates of the lower-left
/// corner, and heights are ENU `u` values (meters relative to the scenario
/// origin altitude). Rows are stored north to south, as in the file format.
#[derive(Clone, Debug, PartialEq)]
pub struct Heightmap {
    ncols: usize,
    nrows: usize,
    xllcorner: f64,
    yllcorner: f64,
    cellsize: f64,
    heights: Vec<f64>,
}

impl Heightmap {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize: f64,
        heights: Vec<f64>,
    ) -> Result<Self, FramesError> {
        if ncols == 0 || nrows == 0 {
            return Err(FramesError::Heightmap("empty grid".into()));
        }
        if !(cellsize > 0.0 && cellsize.is_finite()) {
            return Err(FramesError::Heightmap(format!("invalid cellsize {cellsize}")));
        }
        if heights.len() != ncols * nrows {
            return Err(FramesError::Heightmap(format!(
                "expected {} values, found {}",
                ncols * nrows,
                heights.len()
            )));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(FramesError::Heightmap("non-finite height".into()));
        }
        Ok(Self { ncols, nrows, xllcorner, yllcorner, cellsize, heights })
    }

    /// Constant-height terrain covering `[e_min, e_min + ncols*cellsize] x [n_min, ...]`.
    pub fn flat(e_min: f64, n_min: f64, ncols: usize, nrows: usize, cellsize: f64, height: f64) -> Self {
        Self::new(ncols, nrows, e_min, n_min, cellsize, vec![height; ncols * nrows])
            .expect("flat heightmap parameters must be valid")
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn cellsize(&self) -> f64 {
        self.cellsize
    }

    /// `(e_min, n_min, e_max, n_max)` of the covered area.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.xllcorner,
            self.yllcorner,
            self.xllcorner + self.ncols as f64 * self.cellsize,
            self.yllcorner + self.nrows as f64 * self.cellsize,
        )
    }

    pub fn contains(&self, e: f64, n: f64) -> bool {
        let (e0, n0, e1, n1) = self.extent();
        e >= e0 && e <= e1 && n >= n0 && n <= n1
    }

    pub fn min_height(&self) -> f64 {
        self.heights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Height of the grid cell containing `(e, n)`; `None` outside the extent.
    pub fn height_at(&self, e: f64, n: f64) -> Option<f64> {
        if !self.contains(e, n) {
            return None;
        }
        Some(self.height_at_clamped(e, n))
    }

    /// Height of the nearest grid cell, clamping positions outside the extent.
    pub fn height_at_clamped(&self, e: f64, n: f64) -> f64 {
        let col = ((e - self.xllcorner) / self.cellsize).floor();
        let row_from_south = ((n - self.yllcorner) / self.cellsize).floor();
        let col = (col.max(0.0) as usize).min(self.ncols - 1);
        let row_from_south = (row_from_south.max(0.0) as usize).min(self.nrows - 1);
        let row = self.nrows - 1 - row_from_south;
        self.heights[row * self.ncols + col]
    }

    /// Parse an ESRI ASCII grid. NODATA cells are filled with the lowest valid height.
    pub fn parse_ascii(text: &str) -> Result<Self, FramesError> {
        let mut tokens = text.split_whitespace().peekable();
        let mut ncols = None;
        let mut nrows = None;
        let mut xll = None;
        let mut yll = None;
        let mut center_registered = false;
        let mut cellsize = None;
        let mut nodata = None;

        while let Some(tok) = tokens.peek() {
            if tok.parse::<f64>().is_ok() {
                break;
            }
            let key = tokens.next().unwrap().to_ascii_lowercase();
            let value = tokens
                .next()
                .ok_or_else(|| FramesError::Heightmap(format!("missing value for {key}")))?;
            let num: f64 = value
                .parse()
                .map_err(|_| FramesError::Heightmap(format!("bad value {value:?} for {key}")))?;
            match key.as_str() {
                "ncols" => ncols = Some(num as usize),
                "nrows" => nrows = Some(num as usize),
                "xllcorner" => xll = Some(num),
                "yllcorner" => yll = Some(num),
                "xllcenter" => {
                    xll = Some(num);
                    center_registered = true;
                }
                "yllcenter" => {
                    yll = Some(num);
                    center_registered = true;
                }
                "cellsize" => cellsize = Some(num),
                "nodata_value" => nodata = Some(num),
                other => return Err(FramesError::Heightmap(format!("unknown header key {other:?}"))),
            }
        }

        let missing = |k: &str| FramesError::Heightmap(format!("missing header {k}"));
        let ncols = ncols.ok_or_else(|| missing("ncols"))?;
        let nrows = nrows.ok_or_else(|| missing("nrows"))?;
        let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
        let mut xll = xll.ok_or_else(|| missing("xllcorner"))?;
        let mut yll = yll.ok_or_else(|| missing("yllcorner"))?;
        if center_registered {
            xll -= cellsize / 2.0;
            yll -= cellsize / 2.0;
        }

        let mut heights = Vec::with_capacity(ncols * nrows);
        for tok in tokens {
            let v: f64 = tok
                .parse()
                .map_err(|_| FramesError::Heightmap(format!("bad height value {tok:?}")))?;
            heights.push(v);
        }

        if let Some(nd) = nodata {
            let is_nodata = |h: f64| (h - nd).abs() < 1e-9;
            let fill = heights
                .iter()
                .copied()
                .filter(|h| !is_nodata(*h))
                .fold(f64::INFINITY, f64::min);
            if !fill.is_finite() {
                return Err(FramesError::Heightmap("all cells are NODATA".into()));
            }
            for h in heights.iter_mut().filter(|h| is_nodata(**h)) {
                *h = fill;
            }
        }

        Self::new(ncols, nrows, xll, yll, cellsize, heights)
    }

    pub fn load(path: &Path) -> Result<Self, FramesError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FramesError::Heightmap(format!("{}: {e}", path.display())))?;
        Self::parse_ascii(&text)
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ncols {}", self.ncols);
        let _ = writeln!(out, "nrows {}", self.nrows);
        let _ = writeln!(out, "xllcorner {}", self.xllcorner);
        let _ = writeln!(out, "yllcorner {}", self.yllcorner);
        let _ = writeln!(out, "cellsize {}", self.cellsize);
        let _ = writeln!(out, "NODATA_value -9999");
        for row in self.heights.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|h| h.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// Axis-aligned building: a footprint extruded `height_m` above the lowest
/// terrain under it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrudedBox {
    pub e_min: f64,
    pub n_min: f64,
    pub e_max: f64,
    pub n_max: f64,
    pub height_m: f64,
}

impl ExtrudedBox {
    pub fn new(e_min: f64, n_min: f64, e_max: f64, n_max: f64, height_m: f64) -> Self {
        Self { e_min, n_min, e_max, n_max, height_m }
    }

    pub fn footprint_contains(&self, e: f64, n: f64) -> bool {
        e >= self.e_min && e <= self.e_max && n >= self.n_min && n <= self.n_max
    }

    pub fn is_valid(&self) -> bool {
        self.e_min < self.e_max && self.n_min < self.n_max && self.height_m > 0.0
    }

    /// Lowest terrain height under the footprint, sampled at heightmap resolution.
    pub fn base_height(&self, terrain: &Heightmap) -> f64 {
        let step = terrain.cellsize() / 2.0;
        let ne = ((self.e_max - self.e_min) / step).ceil() as usize + 1;
        let nn = ((self.n_max - self.n_min) / step).ceil() as usize + 1;
        let mut base = f64::INFINITY;
        for i in 0..ne {
            let e = (self.e_min + i as f64 * step).min(self.e_max);
            for j in 0..nn {
                let n = (self.n_min + j as f64 * step).min(self.n_max);
                base = base.min(terrain.height_at_clamped(e, n));
            }
        }
        base
    }
}
