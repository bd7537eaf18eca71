use serde::{Deserialize, Serialize};

use crate::sim::{ControlTarget, VehicleId, VehicleState, World, RAMP_LANE};

/// One nearby vehicle as seen from the ego.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: VehicleId,
    /// Bumper-to-bumper longitudinal distance, never negative.
    pub gap: f64,
    pub speed: f64,
    /// Neighbour speed minus ego speed.
    pub relative_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneView {
    pub lane: i32,
    pub lead: Option<Neighbor>,
    pub follower: Option<Neighbor>,
    /// Nearest vehicle whose footprint overlaps the ego longitudinally.
    pub alongside: Option<Neighbor>,
}

impl LaneView {
    pub fn lead_gap(&self) -> f64 {
        self.lead.map_or(f64::INFINITY, |n| n.gap)
    }

    pub fn follower_gap(&self) -> f64 {
        self.follower.map_or(f64::INFINITY, |n| n.gap)
    }

    pub fn is_empty(&self) -> bool {
        self.lead.is_none() && self.follower.is_none() && self.alongside.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perception {
    pub ego_lane: i32,
    pub ego_speed: f64,
    /// Controller set-point currently being tracked.
    pub set_point: ControlTarget,
    /// Ego lane, its neighbours and the merge lane where present, ascending.
    pub lanes: Vec<LaneView>,
}

impl Perception {
    pub fn lane(&self, lane: i32) -> Option<&LaneView> {
        self.lanes.iter().find(|l| l.lane == lane)
    }

    pub fn own_lane(&self) -> &LaneView {
        self.lane(self.ego_lane).expect("own lane is always perceived")
    }
}

/// Lead, follower and alongside entries for `lane` relative to `ego`.
/// Vehicles whose bumper gap is not positive are reported as alongside.
pub fn lane_view(vehicles: &[VehicleState], ego: &VehicleState, lane: i32) -> LaneView {
    let mut view = LaneView {
        lane,
        lead: None,
        follower: None,
        alongside: None,
    };
    for v in vehicles {
        if v.id == ego.id || v.lane != lane {
            continue;
        }
        let dx = v.x - ego.x;
        let gap = dx.abs() - (v.length + ego.length) / 2.0;
        let n = Neighbor {
            id: v.id,
            gap: gap.max(0.0),
            speed: v.speed,
            relative_speed: v.speed - ego.speed,
        };
        let slot = if gap <= 0.0 || dx == 0.0 {
            &mut view.alongside
        } else if dx > 0.0 {
            &mut view.lead
        } else {
            &mut view.follower
        };
        let closer = match slot {
            Some(cur) => gap.max(0.0) < cur.gap || (gap.max(0.0) == cur.gap && n.id < cur.id),
            None => true,
        };
        if closer {
            *slot = Some(n);
        }
    }
    view
}

/// Ground-truth perception around `ego_id`; `None` if the vehicle is absent.
pub fn perceive(world: &World, ego_id: VehicleId) -> Option<Perception> {
    let ego_vehicle = world.get(ego_id)?;
    let ego = &ego_vehicle.state;
    let set_point = ControlTarget {
        target_lane: ego_vehicle.target_lane(),
        target_speed: match &ego_vehicle.driver {
            crate::sim::Driver::Ego(t) => t.target_speed,
            crate::sim::Driver::Npc { idm, .. } => idm.desired_speed,
        },
    };
    let road = &world.road;
    let mut lanes: Vec<i32> = vec![ego.lane - 1, ego.lane, ego.lane + 1]
        .into_iter()
        .filter(|l| road.is_main_lane(*l) || *l == ego.lane)
        .collect();
    let merge_visible = road.merge.is_some_and(|m| ego.x < m.merge_end_x);
    if merge_visible && !lanes.contains(&RAMP_LANE) {
        lanes.push(RAMP_LANE);
    }
    lanes.sort_unstable();
    let states = world.states();
    Some(Perception {
        ego_lane: ego.lane,
        ego_speed: ego.speed,
        set_point,
        lanes: lanes.into_iter().map(|l| lane_view(&states, ego, l)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Driver, IdmParams, RoadNetwork, SimConfig, Vehicle, EGO_ID};

    fn world(ego_lane: i32, ego_speed: f64) -> World {
        let mut w = World::new(RoadNetwork::default(), SimConfig::default());
        w.insert(Vehicle {
            state: VehicleState::on_lane(EGO_ID, &w.road, ego_lane, 100.0, ego_speed),
            driver: Driver::Ego(ControlTarget {
                target_lane: ego_lane,
                target_speed: ego_speed,
            }),
        });
        w
    }

    fn add(w: &mut World, id: u32, lane: i32, x: f64, speed: f64) {
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
    fn ego_alone_sees_nothing() {
        let w = world(1, 30.0);
        let p = perceive(&w, EGO_ID).unwrap();
        assert_eq!(p.ego_speed, 30.0);
        assert_eq!(p.lanes.iter().map(|l| l.lane).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(p.lanes.iter().all(LaneView::is_empty));
    }

    #[test]
    fn lead_gap_speed_and_relative_speed() {
        let mut w = world(1, 30.0);
        add(&mut w, 1, 1, 152.5, 25.0);
        let p = perceive(&w, EGO_ID).unwrap();
        let lead = p.own_lane().lead.unwrap();
        assert_eq!(lead.gap, 47.5);
        assert_eq!(lead.speed, 25.0);
        assert_eq!(lead.relative_speed, -5.0);
        assert!(p.own_lane().follower.is_none());
    }

    #[test]
    fn side_by_side_is_alongside_not_lead() {
        let mut w = world(1, 30.0);
        add(&mut w, 1, 2, 100.0, 30.0);
        let p = perceive(&w, EGO_ID).unwrap();
        let left = p.lane(2).unwrap();
        assert!(left.lead.is_none() && left.follower.is_none());
        let a = left.alongside.unwrap();
        assert_eq!(a.gap, 0.0);
        assert_eq!(a.id, VehicleId(1));
    }

    #[test]
    fn nearest_vehicles_win() {
        let mut w = world(1, 30.0);
        add(&mut w, 1, 1, 200.0, 25.0);
        add(&mut w, 2, 1, 140.0, 25.0);
        add(&mut w, 3, 1, 40.0, 25.0);
        add(&mut w, 4, 1, 80.0, 25.0);
        let p = perceive(&w, EGO_ID).unwrap();
        assert_eq!(p.own_lane().lead.unwrap().id, VehicleId(2));
        assert_eq!(p.own_lane().follower.unwrap().id, VehicleId(4));
        assert_eq!(p.own_lane().follower.unwrap().gap, 15.0);
    }

    #[test]
    fn merge_lane_is_reported_before_merge_end() {
        let mut w = World::new(RoadNetwork::with_default_merge(), SimConfig::default());
        w.insert(Vehicle {
            state: VehicleState::on_lane(EGO_ID, &w.road, 1, 100.0, 20.0),
            driver: Driver::Ego(ControlTarget {
                target_lane: 1,
                target_speed: 20.0,
            }),
        });
        add(&mut w, 1, RAMP_LANE, 150.0, 20.0);
        let p = perceive(&w, EGO_ID).unwrap();
        assert_eq!(p.lanes.iter().map(|l| l.lane).collect::<Vec<_>>(), vec![-1, 0, 1, 2]);
        assert_eq!(p.lane(RAMP_LANE).unwrap().lead.unwrap().gap, 45.0);
    }

    #[test]
    fn perceive_does_not_mutate() {
        let mut w = world(1, 30.0);
        add(&mut w, 1, 1, 150.0, 25.0);
        let before = w.state_hash();
        let _ = perceive(&w, EGO_ID);
        assert_eq!(before, w.state_hash());
        assert!(perceive(&w, VehicleId(99)).is_none());
    }
}
