//! The five-valued meta-action alphabet, its mapping onto controller
//! set-points, and the feasibility/safety gate in front of the controllers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sim::{ControlTarget, RoadNetwork, World, EGO_ID};

/// Speed change applied by `FASTER` / `SLOWER`, m/s.
pub const SPEED_STEP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MetaAction {
    LaneLeft = 0,
    Idle = 1,
    LaneRight = 2,
    Faster = 3,
    Slower = 4,
}

impl MetaAction {
    pub const ALL: [MetaAction; 5] = [
        MetaAction::LaneLeft,
        MetaAction::Idle,
        MetaAction::LaneRight,
        MetaAction::Faster,
        MetaAction::Slower,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MetaAction::LaneLeft => "LANE_LEFT",
            MetaAction::Idle => "IDLE",
            MetaAction::LaneRight => "LANE_RIGHT",
            MetaAction::Faster => "FASTER",
            MetaAction::Slower => "SLOWER",
        }
    }

    pub fn is_lane_change(self) -> bool {
        matches!(self, MetaAction::LaneLeft | MetaAction::LaneRight)
    }
}

impl fmt::Display for MetaAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownAction(pub String);

impl fmt::Display for UnknownAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown meta-action `{}`", self.0)
    }
}

impl std::error::Error for UnknownAction {}

impl FromStr for MetaAction {
    type Err = UnknownAction;

    /// Accepts a digit code 0-4 or a name in any case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Ok(code) = t.parse::<u8>() {
            return Self::from_code(code).ok_or_else(|| UnknownAction(s.to_string()));
        }
        let upper = t.to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|a| a.name() == upper)
            .ok_or_else(|| UnknownAction(s.to_string()))
    }
}

/// Maps a validated action onto the next control set-point.
pub fn apply_meta_action(
    target: ControlTarget,
    action: MetaAction,
    _road: &RoadNetwork,
    hard_speed_cap: f64,
) -> ControlTarget {
    let mut next = target;
    match action {
        MetaAction::LaneLeft => next.target_lane += 1,
        MetaAction::LaneRight => next.target_lane -= 1,
        MetaAction::Faster => next.target_speed = (target.target_speed + SPEED_STEP).min(hard_speed_cap),
        MetaAction::Slower => next.target_speed = (target.target_speed - SPEED_STEP).max(0.0),
        MetaAction::Idle => {}
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// The destination lane does not exist.
    OffRoad,
    /// A vehicle sits inside the unsafe envelope in the destination lane.
    UnsafeGap,
    /// No ego vehicle or control target in the world.
    NoEgo,
}

impl RejectReason {
    pub fn explanation(self) -> &'static str {
        match self {
            RejectReason::OffRoad => "requested lane change would leave the road",
            RejectReason::UnsafeGap => "destination lane has a vehicle too close for a safe lane change",
            RejectReason::NoEgo => "no ego vehicle to control",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::OffRoad => "off_road",
            RejectReason::UnsafeGap => "unsafe_gap",
            RejectReason::NoEgo => "no_ego",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub verdict: Verdict,
    pub reason: Option<RejectReason>,
    /// The action that actually reaches the controllers.
    pub applied: MetaAction,
}

impl ValidationResult {
    pub fn accepted(action: MetaAction) -> Self {
        Self {
            verdict: Verdict::Accepted,
            reason: None,
            applied: action,
        }
    }

    pub fn rejected(reason: RejectReason) -> Self {
        Self {
            verdict: Verdict::Rejected,
            reason: Some(reason),
            applied: MetaAction::Idle,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }
}

/// Unsafe longitudinal envelope around the ego in a destination lane:
/// `max(floor, headway * ego_speed)` metres bumper to bumper, either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyEnvelope {
    pub headway: f64,
    pub floor: f64,
}

impl Default for SafetyEnvelope {
    fn default() -> Self {
        Self {
            headway: 0.5,
            floor: 5.0,
        }
    }
}

impl SafetyEnvelope {
    pub fn radius(&self, ego_speed: f64) -> f64 {
        (self.headway * ego_speed).max(self.floor)
    }
}

/// Off-road lane changes are always rejected; the gap check only runs with
/// `hard_safety`. Lane arithmetic is done on the current target lane so
/// back-to-back changes cannot escape the road.
pub fn validate_action(
    world: &World,
    action: MetaAction,
    hard_safety: bool,
    envelope: &SafetyEnvelope,
) -> ValidationResult {
    let (Some(ego), Some(target)) = (world.ego(), world.ego_target()) else {
        return ValidationResult::rejected(RejectReason::NoEgo);
    };
    let destination = match action {
        MetaAction::LaneLeft => target.target_lane + 1,
        MetaAction::LaneRight => target.target_lane - 1,
        _ => return ValidationResult::accepted(action),
    };
    if !world.road.is_main_lane(destination) {
        return ValidationResult::rejected(RejectReason::OffRoad);
    }
    if hard_safety {
        let radius = envelope.radius(ego.state.speed);
        let e = &ego.state;
        let blocked = world.vehicles().iter().any(|v| {
            if v.state.id == EGO_ID || v.state.lane != destination {
                return false;
            }
            let gap = (v.state.x - e.x).abs() - (v.state.length + e.length) / 2.0;
            gap < radius
        });
        if blocked {
            return ValidationResult::rejected(RejectReason::UnsafeGap);
        }
    }
    ValidationResult::accepted(action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Driver, IdmParams, SimConfig, Vehicle, VehicleId, VehicleState};

    fn world_with_ego(lane: i32, speed: f64) -> World {
        let mut w = World::new(RoadNetwork::default(), SimConfig::default());
        w.insert(Vehicle {
            state: VehicleState::on_lane(EGO_ID, &w.road, lane, 100.0, speed),
            driver: Driver::Ego(ControlTarget {
                target_lane: lane,
                target_speed: speed,
            }),
        });
        w
    }

    fn add_npc(w: &mut World, id: u32, lane: i32, x: f64, speed: f64) {
        let state = VehicleState::on_lane(VehicleId(id), &w.road, lane, x, speed);
        w.insert(Vehicle {
            state,
            driver: Driver::Npc {
                idm: IdmParams::default(),
                target_lane: lane,
            },
        });
    }

    #[test]
    fn codes_are_fixed() {
        let codes: Vec<u8> = MetaAction::ALL.iter().map(|a| a.code()).collect();
        assert_eq!(codes, vec![0, 1, 2, 3, 4]);
        assert_eq!(MetaAction::from_code(3), Some(MetaAction::Faster));
        assert_eq!(MetaAction::from_code(5), None);
        assert_eq!("lane_left".parse::<MetaAction>(), Ok(MetaAction::LaneLeft));
        assert_eq!("4".parse::<MetaAction>(), Ok(MetaAction::Slower));
        assert!("7".parse::<MetaAction>().is_err());
        assert_eq!(serde_json::to_string(&MetaAction::LaneRight).unwrap(), "\"LANE_RIGHT\"");
    }

    #[test]
    fn apply_examples() {
        let road = RoadNetwork::default();
        let t = ControlTarget {
            target_lane: 1,
            target_speed: 20.0,
        };
        assert_eq!(
            apply_meta_action(t, MetaAction::Faster, &road, 40.0),
            ControlTarget {
                target_lane: 1,
                target_speed: 22.0
            }
        );
        assert_eq!(apply_meta_action(t, MetaAction::Idle, &road, 40.0), t);
        assert_eq!(apply_meta_action(t, MetaAction::LaneLeft, &road, 40.0).target_lane, 2);
        assert_eq!(apply_meta_action(t, MetaAction::LaneRight, &road, 40.0).target_lane, 0);

        let slow = ControlTarget {
            target_lane: 0,
            target_speed: 1.0,
        };
        assert_eq!(apply_meta_action(slow, MetaAction::Slower, &road, 40.0).target_speed, 0.0);
        let fast = ControlTarget {
            target_lane: 0,
            target_speed: 39.0,
        };
        assert_eq!(apply_meta_action(fast, MetaAction::Faster, &road, 40.0).target_speed, 40.0);
    }

    #[test]
    fn lane_right_from_lane_zero_is_off_road() {
        let w = world_with_ego(0, 20.0);
        let r = validate_action(&w, MetaAction::LaneRight, false, &SafetyEnvelope::default());
        assert_eq!(r.verdict, Verdict::Rejected);
        assert_eq!(r.reason, Some(RejectReason::OffRoad));
        assert_eq!(r.applied, MetaAction::Idle);

        let w = world_with_ego(3, 20.0);
        let r = validate_action(&w, MetaAction::LaneLeft, false, &SafetyEnvelope::default());
        assert_eq!(r.reason, Some(RejectReason::OffRoad));
    }

    #[test]
    fn lane_left_into_empty_lane_is_accepted() {
        let w = world_with_ego(1, 20.0);
        let r = validate_action(&w, MetaAction::LaneLeft, true, &SafetyEnvelope::default());
        assert!(r.is_accepted());
        assert_eq!(r.applied, MetaAction::LaneLeft);
    }

    #[test]
    fn close_vehicle_in_destination_lane_is_unsafe_only_with_hard_safety() {
        // Ego at 20 m/s: envelope max(5, 0.5*20) = 10 m. Bumper gap 3 m.
        let mut w = world_with_ego(1, 20.0);
        add_npc(&mut w, 1, 2, 108.0, 20.0);
        let env = SafetyEnvelope::default();
        let r = validate_action(&w, MetaAction::LaneLeft, true, &env);
        assert_eq!(r.reason, Some(RejectReason::UnsafeGap));
        assert_eq!(r.applied, MetaAction::Idle);
        assert!(validate_action(&w, MetaAction::LaneLeft, false, &env).is_accepted());
        // Speed changes are never gated.
        assert!(validate_action(&w, MetaAction::Faster, true, &env).is_accepted());
    }

    #[test]
    fn envelope_has_a_floor() {
        let env = SafetyEnvelope::default();
        assert_eq!(env.radius(4.0), 5.0);
        assert_eq!(env.radius(30.0), 15.0);
        // Slow ego, vehicle 6 m behind bumper-to-bumper: outside the 5 m floor.
        let mut w = world_with_ego(1, 4.0);
        add_npc(&mut w, 1, 2, 89.0, 4.0);
        assert!(validate_action(&w, MetaAction::LaneLeft, true, &env).is_accepted());
    }

    #[test]
    fn validation_uses_target_lane_for_back_to_back_changes() {
        let mut w = world_with_ego(2, 20.0);
        w.set_ego_target(ControlTarget {
            target_lane: 3,
            target_speed: 20.0,
        });
        let r = validate_action(&w, MetaAction::LaneLeft, false, &SafetyEnvelope::default());
        assert_eq!(r.reason, Some(RejectReason::OffRoad));
    }
}
