use serde::{Deserialize, Serialize};

use crate::sim::{VehicleId, World, RAMP_LANE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub lane: i32,
    pub lane_count: u32,
    pub x: f64,
    pub distance_to_route_end: f64,
    /// Present only while a merge zone still lies ahead of or around the ego.
    pub distance_to_merge_end: Option<f64>,
    pub on_ramp: bool,
}

pub fn localize(world: &World, ego_id: VehicleId) -> Option<Localization> {
    let ego = &world.get(ego_id)?.state;
    let road = &world.road;
    Some(Localization {
        lane: ego.lane,
        lane_count: road.lane_count,
        x: ego.x,
        distance_to_route_end: (road.route_end_x - ego.x).max(0.0),
        distance_to_merge_end: road
            .merge
            .filter(|m| ego.x < m.merge_end_x)
            .map(|m| m.merge_end_x - ego.x),
        on_ramp: ego.lane == RAMP_LANE,
    })
}
