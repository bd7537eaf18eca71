use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lane id reserved for the on-ramp while a vehicle is still on it.
pub const RAMP_LANE: i32 = -1;

/// On-ramp joining lane 0. The ramp runs parallel to lane 0, one lane width
/// to its right, from `ramp_spawn_x` to `merge_end_x`; ramp traffic may move
/// over into lane 0 anywhere in `[merge_start_x, merge_end_x]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeZone {
    pub ramp_spawn_x: f64,
    pub merge_start_x: f64,
    pub merge_end_x: f64,
}

/// Straight multi-lane road. Lane 0 is the rightmost lane and ids increase
/// leftward; the centerline of lane `k` sits at `y = k * lane_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoadNetwork {
    pub lane_count: u32,
    pub lane_width: f64,
    pub main_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge: Option<MergeZone>,
    pub speed_limit: f64,
    pub route_end_x: f64,
}

impl Default for RoadNetwork {
    fn default() -> Self {
        Self {
            lane_count: 4,
            lane_width: 4.0,
            main_length: 1000.0,
            merge: None,
            speed_limit: 28.0,
            route_end_x: 1000.0,
        }
    }
}

impl RoadNetwork {
    /// Default geometry plus the ramp joining lane 0 between x=200 and x=280.
    pub fn with_default_merge() -> Self {
        Self {
            merge: Some(MergeZone {
                ramp_spawn_x: 0.0,
                merge_start_x: 200.0,
                merge_end_x: 280.0,
            }),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lane_count < 2 {
            return Err(Error::Road(format!("lane_count must be >= 2, got {}", self.lane_count)));
        }
        if !(self.lane_width > 0.0) {
            return Err(Error::Road("lane_width must be positive".into()));
        }
        if !(self.speed_limit > 0.0) {
            return Err(Error::Road("speed_limit must be positive".into()));
        }
        if !(self.main_length > 0.0) {
            return Err(Error::Road("main_length must be positive".into()));
        }
        if self.route_end_x > self.main_length {
            return Err(Error::Road(format!(
                "route_end_x {} exceeds main_length {}",
                self.route_end_x, self.main_length
            )));
        }
        if let Some(m) = &self.merge {
            let ordered = 0.0 < m.merge_start_x
                && m.merge_start_x < m.merge_end_x
                && m.merge_end_x < self.main_length;
            if !ordered {
                return Err(Error::Road(
                    "merge zone must satisfy 0 < merge_start_x < merge_end_x < main_length".into(),
                ));
            }
            if m.ramp_spawn_x > m.merge_start_x {
                return Err(Error::Road("ramp_spawn_x must not exceed merge_start_x".into()));
            }
        }
        Ok(())
    }

    pub fn leftmost_lane(&self) -> i32 {
        self.lane_count as i32 - 1
    }

    pub fn is_main_lane(&self, lane: i32) -> bool {
        (0..self.lane_count as i32).contains(&lane)
    }

    /// Lateral coordinate of a lane centerline (ramp included).
    pub fn centerline(&self, lane: i32) -> f64 {
        lane as f64 * self.lane_width
    }

    /// True while `x` lies on the stretch where the ramp physically exists.
    pub fn ramp_present_at(&self, x: f64) -> bool {
        self.merge
            .map(|m| x >= m.ramp_spawn_x && x < m.merge_end_x)
            .unwrap_or(false)
    }

    /// Nearest lane to a lateral position. The ramp id is only reachable
    /// where the ramp exists; past `merge_end_x` everything maps to lane 0.
    pub fn lane_at(&self, x: f64, y: f64) -> i32 {
        let lowest = if self.ramp_present_at(x) { RAMP_LANE } else { 0 };
        let nearest = (y / self.lane_width).round() as i32;
        nearest.clamp(lowest, self.leftmost_lane())
    }

    pub fn in_merge_zone(&self, x: f64) -> bool {
        self.merge
            .map(|m| x >= m.merge_start_x && x < m.merge_end_x)
            .unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rightmost_lane_is_zero_and_ids_grow_leftward() {
        let road = RoadNetwork::default();
        assert_eq!(road.lane_at(10.0, 0.0), 0);
        assert_eq!(road.lane_at(10.0, 4.0), 1);
        assert_eq!(road.lane_at(10.0, 12.0), 3);
        assert!(road.centerline(2) > road.centerline(1));
    }

    #[test]
    fn lane_boundary_is_half_a_lane_width() {
        let road = RoadNetwork::default();
        assert_eq!(road.lane_at(0.0, 1.99), 0);
        assert_eq!(road.lane_at(0.0, 2.01), 1);
        assert_eq!(road.lane_at(0.0, -50.0), 0);
        assert_eq!(road.lane_at(0.0, 50.0), 3);
    }

    #[test]
    fn ramp_lane_only_exists_before_merge_end() {
        let road = RoadNetwork::with_default_merge();
        assert_eq!(road.lane_at(150.0, -4.0), RAMP_LANE);
        assert_eq!(road.lane_at(279.0, -4.0), RAMP_LANE);
        assert_eq!(road.lane_at(280.0, -4.0), 0);
        assert!(road.in_merge_zone(240.0));
        assert!(!road.in_merge_zone(199.0));
    }

    #[test]
    fn validation_rejects_bad_geometry() {
        let mut road = RoadNetwork::default();
        road.lane_count = 1;
        assert!(road.validate().is_err());

        let mut road = RoadNetwork::with_default_merge();
        road.merge.as_mut().unwrap().merge_end_x = 150.0;
        assert!(road.validate().is_err());

        let mut road = RoadNetwork::default();
        road.route_end_x = 1200.0;
        assert!(road.validate().is_err());

        assert!(RoadNetwork::with_default_merge().validate().is_ok());
    }
}
