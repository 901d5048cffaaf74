//! JSON documents: the parameter file, assemblies and command inputs.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::{Assembly, Cell, RotorState, Unit, UnitGeometry, Yaw};
use crate::sim::{Scenario, SimSettings};
use crate::sweep::FaultFamily;

/// Environment variable naming an alternative parameter file.
pub const PARAMS_ENV: &str = "MARS_PARAMS";

pub const DEFAULT_PARAMS_JSON: &str = include_str!("../params/default.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub pitch: f64,
    pub geometry: UnitGeometry,
    pub simulation: SimSettings,
}

impl Params {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry.validate()?;
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return Err(ConfigError::Parse("pitch must be positive".into()));
        }
        self.simulation.validate()?;
        Ok(())
    }

    /// The bundled parameters.
    pub fn bundled() -> Self {
        parse_str(DEFAULT_PARAMS_JSON).expect("bundled parameter file is valid")
    }

    /// `$MARS_PARAMS` if set, else the bundled file.
    pub fn load() -> Result<Self, ConfigError> {
        let params: Params = match std::env::var_os(PARAMS_ENV) {
            Some(path) => read_json(Path::new(&path))?,
            None => Self::bundled(),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Parses JSON; errors carry serde's line and column.
pub fn parse_str<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_str(&text).map_err(|e| match e {
        ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn healthy_eta() -> [f64; 4] {
    [1.0; 4]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitDoc {
    pub id: u32,
    pub cell: Cell,
    #[serde(default)]
    pub yaw: Yaw,
    #[serde(default = "healthy_eta")]
    pub eta: [f64; 4],
}

/// `{"pitch": .., "geometry": {..}, "units": [..]}`. Missing pitch or
/// geometry fall back to the parameter file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<UnitGeometry>,
    pub units: Vec<UnitDoc>,
}

impl AssemblyDoc {
    pub fn from_assembly(a: &Assembly) -> Self {
        Self {
            pitch: Some(a.pitch()),
            geometry: Some(a.geometry().clone()),
            units: a
                .units()
                .iter()
                .map(|u| UnitDoc { id: u.id, cell: u.cell, yaw: u.yaw, eta: u.efficiencies() })
                .collect(),
        }
    }

    pub fn build(&self, params: &Params) -> Result<Assembly, ConfigError> {
        let units = self
            .units
            .iter()
            .map(|u| Unit {
                id: u.id,
                cell: u.cell,
                yaw: u.yaw,
                rotors: u.eta.map(|efficiency| RotorState { efficiency }),
            })
            .collect();
        let pitch = self.pitch.unwrap_or(params.pitch);
        let geometry = self.geometry.clone().unwrap_or_else(|| params.geometry.clone());
        Ok(Assembly::new(units, pitch, geometry)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub assembly: AssemblyDoc,
    pub family: FaultFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub assembly: AssemblyDoc,
    pub scenario: Scenario,
    /// Overrides the parameter file's simulation block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<SimSettings>,
}
