//! Deterministic oracle policies.
//!
//! Every table works from the same observation a language model would get:
//! per-lane leads/followers, the ego's speed and set-point, localization and
//! memory. Thresholds are calibration constants, not measured quantities,
//! and can be overridden through [`RuleConfig`].

use serde::{Deserialize, Serialize};

use crate::actions::{MetaAction, SPEED_STEP};
use crate::sim::RAMP_LANE;
use crate::tools::{DrivingStyle, LaneView, Localization, Memory, Neighbor, Perception};

/// Effective deceleration achieved by a run of SLOWER decisions (m/s^2).
const EFFECTIVE_DECEL: f64 = 1.5;
/// Decision period plus controller response (s).
const REACTION_TIME: f64 = 1.5;
/// Set-point tolerance when comparing against a speed cap.
const SPEED_EPS: f64 = 1e-6;

/// Distance consumed while cancelling a closing speed with SLOWER steps.
pub fn braking_distance(closing: f64) -> f64 {
    if closing <= 0.0 {
        0.0
    } else {
        closing * closing / (2.0 * EFFECTIVE_DECEL) + closing * REACTION_TIME
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SpeedAdvice {
    /// Too close or closing too fast: shed speed now.
    Slower,
    /// Fine as is, but one more FASTER would be too much.
    Hold,
    /// Room to speed up.
    Free,
}

fn speed_advice(front: Option<&Neighbor>, floor: f64) -> SpeedAdvice {
    let Some(f) = front else {
        return SpeedAdvice::Free;
    };
    let closing = -f.relative_speed;
    let margin = f.gap - floor;
    if margin < 0.0 || margin < braking_distance(closing) {
        SpeedAdvice::Slower
    } else if margin < braking_distance(closing + SPEED_STEP) + closing.max(0.0) {
        SpeedAdvice::Hold
    } else {
        SpeedAdvice::Free
    }
}

/// True when a lane change into `view` leaves at least `ahead`/`behind`
/// metres and `min_ttc` seconds of time-to-contact on both sides.
fn lane_clear(view: &LaneView, ahead: f64, behind: f64, min_ttc: f64) -> bool {
    if view.alongside.is_some() {
        return false;
    }
    let ok = |n: &Neighbor, need: f64, closing: f64| n.gap >= need && (closing <= 0.0 || n.gap / closing >= min_ttc);
    view.lead.is_none_or(|l| ok(&l, ahead, -l.relative_speed))
        && view.follower.is_none_or(|f| ok(&f, behind, f.relative_speed))
}

/// Nearest vehicle ahead in `lane`. For lane 0 this includes a ramp vehicle
/// that will merge before the ego reaches the end of the merge zone.
fn lane_front(p: &Perception, loc: &Localization, lane: i32) -> Option<Neighbor> {
    let own = p.lane(lane).and_then(|v| v.lead);
    if lane != 0 {
        return own;
    }
    let merging = match (p.lane(RAMP_LANE), loc.distance_to_merge_end) {
        (Some(ramp), Some(to_end)) => ramp.lead.filter(|n| n.gap < to_end).or(ramp.alongside),
        _ => None,
    };
    match (own, merging) {
        (Some(a), Some(b)) => Some(if b.gap < a.gap { b } else { a }),
        (a, b) => a.or(b),
    }
}

fn effective_front(p: &Perception, loc: &Localization) -> Option<Neighbor> {
    lane_front(p, loc, p.ego_lane)
}

/// True when merging traffic leaves room to move into lane 0 here.
fn ramp_clear(p: &Perception, loc: &Localization, clearance: f64, min_ttc: f64) -> bool {
    match (p.lane(RAMP_LANE), loc.distance_to_merge_end) {
        (Some(ramp), Some(_)) => lane_clear(ramp, clearance, clearance, min_ttc),
        _ => true,
    }
}

fn main_lane_view<'a>(p: &'a Perception, loc: &Localization, lane: i32) -> Option<&'a LaneView> {
    if lane < 0 || lane >= loc.lane_count as i32 {
        return None;
    }
    p.lane(lane)
}

fn lane_change_in_progress(p: &Perception) -> bool {
    p.ego_lane != p.set_point.target_lane
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OvertakerParams {
    /// Lead gap below which the overtaker starts looking for a way past.
    pub follow_threshold: f64,
    /// Clearance required ahead of and behind the ego in a destination lane.
    pub clearance: f64,
    /// Gap the overtaker will not go below while following.
    pub abandon_gap: f64,
    /// Minimum time-to-contact in a destination lane.
    pub lane_ttc: f64,
    /// A destination lane must offer this much more lead gap than the
    /// vehicle being overtaken; otherwise pulling out gains nothing.
    pub lane_gain: f64,
}

impl Default for OvertakerParams {
    fn default() -> Self {
        Self {
            follow_threshold: 25.0,
            clearance: 30.0,
            abandon_gap: 12.0,
            lane_ttc: 6.0,
            lane_gain: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveParams {
    pub follow_threshold: f64,
}

impl Default for NaiveParams {
    fn default() -> Self {
        Self { follow_threshold: 25.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum SpeedCap {
    Absolute(f64),
    AboveLimit(f64),
}

impl SpeedCap {
    pub fn resolve(self, speed_limit: f64) -> f64 {
        match self {
            SpeedCap::Absolute(v) => v,
            SpeedCap::AboveLimit(d) => speed_limit + d,
        }
    }
}

/// Parameters of a driving-style table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleTable {
    pub cap: SpeedCap,
    /// Fixed following-gap floor (m).
    pub front_floor: f64,
    /// Speed-proportional following floor (s); the larger floor applies.
    pub min_headway: f64,
    /// Required free distance ahead of and behind the ego in a target lane.
    pub clearance: f64,
    pub lane_ttc: f64,
    /// A lane must offer this much more lead gap than the current one.
    pub lane_gain: f64,
    /// Lane changes are only considered when the front vehicle is within
    /// `lookahead_time * speed` metres.
    pub lookahead_time: f64,
    /// If set, lane changes are only considered when the front gap is below
    /// this value.
    pub blocked_gap: Option<f64>,
}

impl StyleTable {
    pub fn aggressive() -> Self {
        Self {
            cap: SpeedCap::AboveLimit(6.0),
            front_floor: 5.0,
            min_headway: 0.3,
            clearance: 8.0,
            lane_ttc: 2.0,
            lane_gain: 3.0,
            lookahead_time: 4.0,
            blocked_gap: None,
        }
    }

    pub fn conservative() -> Self {
        Self {
            cap: SpeedCap::Absolute(20.0),
            front_floor: 35.0,
            min_headway: 0.0,
            clearance: 50.0,
            lane_ttc: 8.0,
            lane_gain: 10.0,
            lookahead_time: 0.0,
            blocked_gap: Some(15.0),
        }
    }

    pub fn balanced() -> Self {
        Self {
            cap: SpeedCap::AboveLimit(0.0),
            front_floor: 20.0,
            min_headway: 0.0,
            clearance: 25.0,
            lane_ttc: 4.0,
            lane_gain: 10.0,
            lookahead_time: 2.5,
            blocked_gap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub checked_overtaker: OvertakerParams,
    pub naive_overtaker: NaiveParams,
    pub aggressive: StyleTable,
    pub conservative: StyleTable,
    pub balanced: StyleTable,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            checked_overtaker: OvertakerParams::default(),
            naive_overtaker: NaiveParams::default(),
            aggressive: StyleTable::aggressive(),
            conservative: StyleTable::conservative(),
            balanced: StyleTable::balanced(),
        }
    }
}

/// Which rule table to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    CheckedOvertaker,
    NaiveOvertaker,
    Aggressive,
    Conservative,
    /// Balanced by default; follows the driver's most recent style command.
    Balanced,
}

/// A rule decision with a short human-readable rationale.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleOutcome {
    pub action: MetaAction,
    pub rationale: String,
}

fn outcome(action: MetaAction, rationale: impl Into<String>) -> RuleOutcome {
    RuleOutcome {
        action,
        rationale: rationale.into(),
    }
}

pub fn rule_policy_step(
    kind: RuleKind,
    config: &RuleConfig,
    perception: &Perception,
    localization: &Localization,
    memory: &Memory,
) -> RuleOutcome {
    match kind {
        RuleKind::CheckedOvertaker => checked_overtaker(&config.checked_overtaker, perception, localization, memory),
        RuleKind::NaiveOvertaker => naive_overtaker(&config.naive_overtaker, perception, memory),
        RuleKind::Aggressive => style_step(&config.aggressive, "aggressive", perception, localization, memory),
        RuleKind::Conservative => style_step(&config.conservative, "conservative", perception, localization, memory),
        RuleKind::Balanced => match memory.active_style {
            DrivingStyle::Aggressive => style_step(&config.aggressive, "aggressive", perception, localization, memory),
            DrivingStyle::Conservative => {
                style_step(&config.conservative, "conservative", perception, localization, memory)
            }
            DrivingStyle::None => style_step(&config.balanced, "balanced", perception, localization, memory),
        },
    }
}

fn cruise(
    front: Option<&Neighbor>,
    floor: f64,
    target_speed: f64,
    cap: f64,
    why: &str,
) -> RuleOutcome {
    if target_speed > cap + SPEED_EPS {
        return outcome(MetaAction::Slower, format!("{why}: above the {cap:.1} m/s cap"));
    }
    match speed_advice(front, floor) {
        SpeedAdvice::Slower => outcome(MetaAction::Slower, format!("{why}: keeping at least {floor:.1} m to the vehicle ahead")),
        SpeedAdvice::Hold => outcome(MetaAction::Idle, format!("{why}: following at a safe distance")),
        SpeedAdvice::Free if target_speed + SPEED_STEP <= cap + SPEED_EPS => {
            outcome(MetaAction::Faster, format!("{why}: road ahead allows speeding up toward {cap:.1} m/s"))
        }
        SpeedAdvice::Free => outcome(MetaAction::Idle, format!("{why}: cruising at the {cap:.1} m/s cap")),
    }
}

fn checked_overtaker(
    params: &OvertakerParams,
    p: &Perception,
    loc: &Localization,
    memory: &Memory,
) -> RuleOutcome {
    let front = effective_front(p, loc);
    let target_speed = p.set_point.target_speed;
    let limit = memory.speed_limit;
    if lane_change_in_progress(p) {
        return match speed_advice(front.as_ref(), params.abandon_gap) {
            SpeedAdvice::Slower => outcome(MetaAction::Slower, "lane change under way, closing on the vehicle ahead"),
            _ => outcome(MetaAction::Idle, "lane change under way"),
        };
    }

    let clear = |lane: i32| {
        main_lane_view(p, loc, lane)
            .is_some_and(|v| lane_clear(v, params.clearance, params.clearance, params.lane_ttc))
    };

    let home = memory.home_lane.unwrap_or(p.ego_lane);
    if p.ego_lane > home && clear(p.ego_lane - 1) {
        return outcome(MetaAction::LaneRight, "slow vehicle passed and original lane is clear: returning");
    }
    if p.ego_lane < home && clear(p.ego_lane + 1) {
        return outcome(MetaAction::LaneLeft, "slow vehicle passed and original lane is clear: returning");
    }

    if let Some(f) = front.as_ref().filter(|f| f.relative_speed < 0.0) {
        let closing = -f.relative_speed;
        let approaching = f.gap < params.follow_threshold
            || f.gap - params.abandon_gap < braking_distance(closing + SPEED_STEP) + closing;
        if approaching {
            let clear = |lane: i32| {
                clear(lane) && main_lane_view(p, loc, lane).is_some_and(|v| v.lead_gap() > f.gap + params.lane_gain)
            };
            if clear(p.ego_lane + 1) {
                return outcome(MetaAction::LaneLeft, "slower vehicle ahead and left lane clear both ways: overtaking");
            }
            if clear(p.ego_lane - 1) {
                return outcome(MetaAction::LaneRight, "slower vehicle ahead and right lane clear both ways: overtaking");
            }
            return match speed_advice(Some(f), params.abandon_gap) {
                SpeedAdvice::Slower => outcome(
                    MetaAction::Slower,
                    "no adjacent lane is clear: overtaking is unsafe, slowing down and abandoning it",
                ),
                _ => outcome(MetaAction::Idle, "no adjacent lane is clear: holding behind the slower vehicle"),
            };
        }
    }
    cruise(front.as_ref(), params.abandon_gap, target_speed, limit, "overtaker")
}

fn naive_overtaker(params: &NaiveParams, p: &Perception, memory: &Memory) -> RuleOutcome {
    let own = p.own_lane();
    if own.lead_gap() < params.follow_threshold || own.alongside.is_some() {
        return outcome(MetaAction::LaneLeft, "vehicle ahead: pulling out to pass");
    }
    if p.set_point.target_speed + SPEED_STEP <= memory.speed_limit + SPEED_EPS {
        outcome(MetaAction::Faster, "speeding up to the limit")
    } else {
        outcome(MetaAction::Idle, "at the speed limit")
    }
}

fn style_step(
    table: &StyleTable,
    label: &str,
    p: &Perception,
    loc: &Localization,
    memory: &Memory,
) -> RuleOutcome {
    let front = effective_front(p, loc);
    let cap = table.cap.resolve(memory.speed_limit);
    let floor = table.front_floor.max(table.min_headway * p.ego_speed);

    if !lane_change_in_progress(p) {
        // Keep right unless overtaking: move back once the lane to the right
        // is clear and open for the whole lookahead distance.
        let open_ahead = (table.lookahead_time * p.ego_speed).max(table.clearance) * 1.2;
        if let Some(right) = main_lane_view(p, loc, p.ego_lane - 1) {
            let right_front = lane_front(p, loc, right.lane);
            let open = right_front.is_none_or(|l| l.gap >= open_ahead);
            if open
                && lane_clear(right, table.clearance, table.clearance, table.lane_ttc)
                && (right.lane != 0 || ramp_clear(p, loc, table.clearance, table.lane_ttc))
            {
                return outcome(MetaAction::LaneRight, format!("{label}: keeping right, lane {} is open", right.lane));
            }
        }
        if let Some(f) = &front {
            let consider = match table.blocked_gap {
                Some(blocked) => f.gap < blocked,
                None => f.gap < table.lookahead_time * p.ego_speed.max(1.0) && f.relative_speed <= 0.0,
            };
            if consider {
                let candidates = [p.ego_lane + 1, p.ego_lane - 1];
                let best = candidates
                    .iter()
                    .filter_map(|&lane| main_lane_view(p, loc, lane).map(|v| (lane, v)))
                    .filter(|(_, v)| lane_clear(v, table.clearance, table.clearance, table.lane_ttc))
                    .filter(|(lane, _)| *lane != 0 || ramp_clear(p, loc, table.clearance, table.lane_ttc))
                    .map(|(lane, _)| (lane, lane_front(p, loc, lane).map_or(f64::INFINITY, |l| l.gap)))
                    .filter(|(_, gap)| *gap > f.gap + table.lane_gain)
                    .fold(None::<(i32, f64)>, |best, (lane, gap)| match best {
                        Some((_, g)) if g >= gap => best,
                        _ => Some((lane, gap)),
                    });
                if let Some((lane, _)) = best {
                    let action = if lane > p.ego_lane {
                        MetaAction::LaneLeft
                    } else {
                        MetaAction::LaneRight
                    };
                    return outcome(action, format!("{label}: lane {lane} offers more room than the current lane"));
                }
            }
        }
    }
    cruise(front.as_ref(), floor, p.set_point.target_speed, cap, label)
}
