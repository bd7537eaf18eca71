use serde::{Deserialize, Serialize};

use super::road::RoadNetwork;
use super::vehicle::VehicleState;

/// Gains and actuator limits shared by the ego and NPC low-level controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    /// Steering per metre of lateral error (rad/m).
    pub kp_lateral: f64,
    /// Steering per radian of heading error.
    pub kp_heading: f64,
    pub steer_max: f64,
    /// Acceleration per m/s of speed error (1/s).
    pub kp_speed: f64,
    pub accel_min: f64,
    pub accel_max: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        // kp_heading / (2 * sqrt(kp_lateral * length)) ~ 0.8 damping for a 5 m vehicle.
        Self {
            kp_lateral: 0.08,
            kp_heading: 1.0,
            steer_max: 0.26,
            kp_speed: 1.0,
            accel_min: -5.0,
            accel_max: 5.0,
        }
    }
}

/// Proportional offset/heading law tracking the centerline of `target_lane`
/// with zero target heading. Positive output steers left.
pub fn lateral_control(
    state: &VehicleState,
    target_lane: i32,
    road: &RoadNetwork,
    gains: &ControllerGains,
) -> f64 {
    let offset = road.centerline(target_lane) - state.y;
    let heading_error = -state.heading;
    let steer = gains.kp_lateral * offset + gains.kp_heading * heading_error;
    steer.clamp(-gains.steer_max, gains.steer_max)
}

pub fn longitudinal_control(speed: f64, target_speed: f64, gains: &ControllerGains) -> f64 {
    (gains.kp_speed * (target_speed - speed)).clamp(gains.accel_min, gains.accel_max)
}
