use thiserror::Error;

use crate::model::Cell;

/// Errors raised while building or editing an assembly.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("cell ({}, {}) is occupied by more than one unit", .0.col, .0.row)]
    DuplicateCell(Cell),
    #[error("unit id {0} appears more than once")]
    DuplicateUnitId(u32),
    #[error("occupied cells are not 4-connected")]
    DisconnectedAssembly,
    #[error("assembly has no units")]
    EmptyAssembly,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("unknown unit id {0}")]
    UnknownUnit(u32),
    #[error("rotor efficiency {value} of unit {unit} is outside [0, 1]")]
    EfficiencyOutOfRange { unit: u32, value: f64 },
    #[error("yaw {0} rad is not a multiple of pi/2")]
    InvalidYaw(f64),
}

/// Errors raised by the set-distance computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box-constrained least squares did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("attainable set is not full-dimensional (generator rank {rank} < 4)")]
    DegenerateZonotope { rank: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("assembly has no faulty unit")]
    NoFaultPresent,
    #[error("{0} faulty units found; only a single faulty unit is supported")]
    MultipleFaults(usize),
    #[error("no controllable subassembly contains the faulty unit")]
    NoControllableSubassembly,
    #[error("infeasible plan: {0}")]
    InfeasiblePlan(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("regulator design failed: {0}")]
    RegulatorFailure(String),
    #[error("invalid simulation settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Problems reading or interpreting an input document.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
