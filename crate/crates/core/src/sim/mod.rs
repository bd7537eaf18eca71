//! Deterministic fixed-timestep highway world.

pub mod collision;
pub mod control;
pub mod idm;
pub mod road;
pub mod vehicle;
pub mod world;

pub use collision::{detect_collision, rectangles_overlap};
pub use control::{lateral_control, longitudinal_control, ControllerGains};
pub use idm::{idm_acceleration, IdmAccel, IdmOverrides, IdmParams, Leader, EMERGENCY_DECEL};
pub use road::{MergeZone, RoadNetwork, RAMP_LANE};
pub use vehicle::{kinematic_step, ControlTarget, VehicleId, VehicleState, EGO_ID};
pub use world::{Driver, SimConfig, Vehicle, World, WorldStatus};
