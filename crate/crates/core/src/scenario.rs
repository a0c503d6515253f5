//! Scenario files: scene, fires, platforms, noise and every tunable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ballistics::{pressure_to_exit_speed, JetParameters};
use crate::frames::{build_grid, geo_to_enu, EnuPoint, ExtrudedBox, GeoPoint, Heightmap, OccupancyGrid};
use crate::funnel::{compute_funnel_with, FlightFunnel, FunnelConfig};
use crate::gcs::GcsConfig;
use crate::monitor::MonitorConfig;
use crate::world::{FireSource, WorldConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FireSpec {
    pub geo: GeoPoint,
    pub radius_m: f64,
    pub temp_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSpec {
    /// Nozzle position.
    pub geo: GeoPoint,
    pub pressure_pa: f64,
    pub speed_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunnelSpec {
    pub center: GeoPoint,
    pub margin_m: f64,
    /// Ceiling height above the center.
    pub ceiling_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub gnss_sigma_h: f64,
    pub gnss_sigma_v: f64,
    pub thermal_sigma: f64,
    pub depth_sigma: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { gnss_sigma_h: 0.3, gnss_sigma_v: 0.5, thermal_sigma: 0.5, depth_sigma: 0.01 }
    }
}

/// Flat ground patch used when no heightmap file is given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatTerrain {
    pub e_min: f64,
    pub n_min: f64,
    pub e_max: f64,
    pub n_max: f64,
    pub height: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JetSpec {
    pub drag_coeff: f64,
    pub discharge_coeff: f64,
    pub nozzle_offset: EnuPoint,
}

impl Default for JetSpec {
    fn default() -> Self {
        let j = JetParameters::default();
        Self { drag_coeff: 0.0, discharge_coeff: j.discharge_coeff, nozzle_offset: j.nozzle_offset }
    }
}

/// Every tunable with its default; an empty block reproduces the reference behavior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Defaults {
    pub grid_cell_m: f64,
    pub world: WorldConfig,
    pub monitor: MonitorConfig,
    pub gcs: GcsConfig,
    pub jet: JetSpec,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            grid_cell_m: 1.0,
            world: WorldConfig::default(),
            monitor: MonitorConfig::default(),
            gcs: GcsConfig::default(),
            jet: JetSpec::default(),
        }
    }
}

fn default_duration() -> f64 {
    300.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub origin: GeoPoint,
    /// ESRI ASCII heightmap, relative to the scenario file.
    #[serde(default)]
    pub terrain: Option<String>,
    #[serde(default)]
    pub flat_terrain: Option<FlatTerrain>,
    /// Building footprints in the local ENU frame.
    #[serde(default)]
    pub buildings: Vec<ExtrudedBox>,
    pub fires: Vec<FireSpec>,
    pub uav_start: GeoPoint,
    pub monitor: MonitorSpec,
    pub funnel: FunnelSpec,
    /// Where the operator expects the fire; exploration poses look here.
    #[serde(default)]
    pub aoi: Option<GeoPoint>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let read_err = |reason: String| ScenarioError::Read { path: path.display().to_string(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        let mut s: Scenario = serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        let mut s: Scenario = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        s.base_dir = base_dir.to_path_buf();
        s.validate()?;
        Ok(s)
    }

    pub fn terrain_path(&self) -> Option<PathBuf> {
        self.terrain.as_ref().map(|t| self.base_dir.join(t))
    }

    pub fn enu(&self, g: &GeoPoint) -> Result<EnuPoint, ScenarioError> {
        geo_to_enu(g, &self.origin).map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.origin.is_valid() {
            return Err(invalid("origin is not a valid geodetic point"));
        }
        let mut points: Vec<(&str, &GeoPoint)> = vec![
            ("uav_start", &self.uav_start),
            ("monitor", &self.monitor.geo),
            ("funnel.center", &self.funnel.center),
        ];
        points.extend(self.fires.iter().map(|f| ("fire", &f.geo)));
        if let Some(a) = &self.aoi {
            points.push(("aoi", a));
        }
        for (name, p) in points {
            if !p.is_valid() || (p.lat - self.origin.lat).abs() > 1.0 || (p.lon - self.origin.lon).abs() > 1.0 {
                return Err(invalid(format!("{name} is not within 1 degree of the origin")));
            }
        }
        match (&self.terrain, &self.flat_terrain) {
            (Some(_), Some(_)) => return Err(invalid("give either terrain or flat_terrain, not both")),
            (None, None) => return Err(invalid("no terrain given")),
            (Some(_), None) => {
                let p = self.terrain_path().expect("terrain set");
                if !p.is_file() {
                    return Err(invalid(format!("terrain file {} does not exist", p.display())));
                }
            }
            (None, Some(f)) => {
                if !(f.e_max > f.e_min && f.n_max > f.n_min) {
                    return Err(invalid("flat_terrain extent is empty"));
                }
            }
        }
        for (i, f) in self.fires.iter().enumerate() {
            if !(f.radius_m > 0.0) {
                return Err(invalid(format!("fire {i} radius must be positive")));
            }
        }
        if !(self.monitor.pressure_pa > 0.0) {
            return Err(invalid("monitor pressure must be positive"));
        }
        if !(self.monitor.speed_pct > 0.0 && self.monitor.speed_pct <= 100.0) {
            return Err(invalid("monitor speed_pct must be in (0, 100]"));
        }
        if !(self.funnel.margin_m > 0.0 && self.funnel.ceiling_m > 0.0) {
            return Err(invalid("funnel margin and ceiling must be positive"));
        }
        if !(self.duration_s > 0.0) {
            return Err(invalid("duration must be positive"));
        }
        if !(self.defaults.world.dt > 0.0 && self.defaults.world.dt <= 0.05) {
            return Err(invalid("world dt must be in (0, 0.05]"));
        }
        Ok(())
    }

    pub fn heightmap(&self) -> Result<Heightmap, ScenarioError> {
        if let Some(p) = self.terrain_path() {
            return Heightmap::load(&p).map_err(|e| invalid(e.to_string()));
        }
        let f = self.flat_terrain.expect("validated");
        let cs = 5.0;
        let ncols = ((f.e_max - f.e_min) / cs).ceil() as usize;
        let nrows = ((f.n_max - f.n_min) / cs).ceil() as usize;
        Ok(Heightmap::flat(f.e_min, f.n_min, ncols, nrows, cs, f.height))
    }

    pub fn grid(&self) -> Result<OccupancyGrid, ScenarioError> {
        let terrain = self.heightmap()?;
        build_grid(&terrain, &self.buildings, self.defaults.grid_cell_m).map_err(|e| invalid(e.to_string()))
    }

    pub fn fire_sources(&self) -> Result<Vec<FireSource>, ScenarioError> {
        self.fires
            .iter()
            .map(|f| Ok(FireSource::new(self.enu(&f.geo)?, f.radius_m, f.temp_c)))
            .collect()
    }

    pub fn jet_parameters(&self) -> Result<JetParameters, ScenarioError> {
        let mut p = JetParameters {
            drag_coeff: self.defaults.jet.drag_coeff,
            discharge_coeff: self.defaults.jet.discharge_coeff,
            nozzle_offset: self.defaults.jet.nozzle_offset,
            ..JetParameters::default()
        };
        p.exit_speed = pressure_to_exit_speed(self.monitor.pressure_pa, &p).map_err(|e| invalid(e.to_string()))?;
        Ok(p)
    }

    /// World configuration with the scenario's noise block applied.
    pub fn world_config(&self) -> WorldConfig {
        let mut w = self.defaults.world;
        w.gnss.sigma_h = self.noise.gnss_sigma_h;
        w.gnss.sigma_v = self.noise.gnss_sigma_v;
        w.thermal.noise_sigma_c = self.noise.thermal_sigma;
        w.depth_sigma = self.noise.depth_sigma;
        w
    }

    pub fn monitor_config(&self) -> MonitorConfig {
        MonitorConfig { speed_pct: self.monitor.speed_pct, ..self.defaults.monitor }
    }

    /// The funnel a `funnel.set` with this scenario's funnel block produces.
    pub fn planned_funnel(&self, grid: &OccupancyGrid) -> Result<FlightFunnel, ScenarioError> {
        let center = self.enu(&self.funnel.center)?;
        let cfg = FunnelConfig {
            margin: self.funnel.margin_m,
            horizon: self.defaults.gcs.funnel_horizon_m,
            ceiling_alt: Some(center.u + self.funnel.ceiling_m),
            ..FunnelConfig::default()
        };
        compute_funnel_with(grid, center, &cfg).map_err(|e| invalid(format!("funnel: {e}")))
    }
}
