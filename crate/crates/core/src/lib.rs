//! Controllability margin analysis and fault-tolerant self-reconfiguration
//! planning for modular aerial robots built from quadrotor units docked on
//! a square grid.
//!
//! The margin is the signed distance from the hover wrench to the boundary
//! of the attainable wrench set, a 4-D zonotope. Positive means the
//! assembly can hover and reject small disturbances in every direction.

pub mod bvls;
pub mod cli;
pub mod config;
pub mod controllability;
pub mod error;
pub mod model;
pub mod planner;
pub mod sim;
pub mod sweep;
pub mod symmetry;
pub mod zonotope;

pub use controllability::{controllability_margin, rank_condition, CmReport, CmSummary};
pub use error::{ConfigError, GeometryError, ModelError, PlanError, SimError};
pub use model::{
    aggregate_rigid_body, apply_fault, linear_model, rotate_unit, wrench_map, Assembly, Cell, Fault, LinearModel,
    RigidBodyModel, RotorState, Unit, UnitGeometry, WrenchMap, Yaw,
};
pub use sim::{allocate, design_regulator, run_tracking, Scenario, SimSettings, TrackingResult};
pub use zonotope::{control_set, Zonotope};
