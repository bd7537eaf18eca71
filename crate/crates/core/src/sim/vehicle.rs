use std::fmt;

use serde::{Deserialize, Serialize};

use super::road::RoadNetwork;

/// The policy-controlled vehicle always carries this id.
pub const EGO_ID: VehicleId = VehicleId(0);

pub const DEFAULT_VEHICLE_LENGTH: f64 = 5.0;
pub const DEFAULT_VEHICLE_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Ground-truth state of one vehicle. `accel_cmd` and `steer_cmd` hold the
/// commands applied over the most recent physics step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub lane: i32,
    pub length: f64,
    pub width: f64,
    pub accel_cmd: f64,
    pub steer_cmd: f64,
}

impl VehicleState {
    /// A vehicle at rest on a lane centerline, heading straight down the road.
    pub fn on_lane(id: VehicleId, road: &RoadNetwork, lane: i32, x: f64, speed: f64) -> Self {
        Self {
            id,
            x,
            y: road.centerline(lane),
            heading: 0.0,
            speed,
            lane,
            length: DEFAULT_VEHICLE_LENGTH,
            width: DEFAULT_VEHICLE_WIDTH,
            accel_cmd: 0.0,
            steer_cmd: 0.0,
        }
    }

    pub fn front_x(&self) -> f64 {
        self.x + self.length / 2.0
    }

    pub fn rear_x(&self) -> f64 {
        self.x - self.length / 2.0
    }
}

/// Set-point tracked by the ego's low-level controllers. Lane keeping is
/// always on: the lateral controller follows `target_lane`'s centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlTarget {
    pub target_lane: i32,
    pub target_speed: f64,
}

/// Forward-Euler kinematic bicycle step. Every update reads the pre-step
/// state; speed is floored at zero and the lane id follows the nearest
/// centerline.
pub fn kinematic_step(state: &VehicleState, dt: f64, road: &RoadNetwork) -> VehicleState {
    debug_assert!(dt > 0.0);
    let v = state.speed;
    let h = state.heading;
    let x = state.x + v * h.cos() * dt;
    let y = state.y + v * h.sin() * dt;
    let speed = (v + state.accel_cmd * dt).max(0.0);
    let heading = h + (v / state.length) * state.steer_cmd.tan() * dt;
    VehicleState {
        x,
        y,
        speed,
        heading,
        lane: road.lane_at(x, y),
        ..state.clone()
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn ego(speed: f64) -> (RoadNetwork, VehicleState) {
        let road = RoadNetwork::default();
        let s = VehicleState::on_lane(EGO_ID, &road, 1, 100.0, speed);
        (road, s)
    }

    #[test]
    fn straight_coasting() {
        let (road, s) = ego(10.0);
        let n = kinematic_step(&s, 0.05, &road);
        assert_relative_eq!(n.x, 100.5, epsilon = 1e-12);
        assert_eq!(n.y, s.y);
        assert_eq!(n.speed, 10.0);
        assert_eq!(n.heading, 0.0);
    }

    #[test]
    fn speed_never_goes_negative() {
        let (road, mut s) = ego(0.0);
        s.accel_cmd = -2.0;
        let n = kinematic_step(&s, 0.05, &road);
        assert_eq!(n.speed, 0.0);
        assert_eq!(n.x, s.x);
    }

    #[test]
    fn one_second_euler_step() {
        let (road, mut s) = ego(20.0);
        s.accel_cmd = 2.0;
        let n = kinematic_step(&s, 1.0, &road);
        assert_eq!(n.speed, 22.0);
        assert_eq!(n.x, 120.0);
    }

    #[test]
    fn heading_rate_follows_bicycle_law() {
        let (road, mut s) = ego(20.0);
        s.steer_cmd = 0.1;
        let n = kinematic_step(&s, 0.05, &road);
        assert_relative_eq!(n.heading, 20.0 / 5.0 * 0.1f64.tan() * 0.05, epsilon = 1e-15);
    }

    #[test]
    fn lane_id_tracks_lateral_position() {
        let (road, mut s) = ego(20.0);
        s.y = 5.9;
        let n = kinematic_step(&s, 0.05, &road);
        assert_eq!(n.lane, 1);
        s.y = 6.1;
        let n = kinematic_step(&s, 0.05, &road);
        assert_eq!(n.lane, 2);
    }
}
