use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::collision::detect_collision;
use super::control::{lateral_control, longitudinal_control, ControllerGains};
use super::idm::{idm_acceleration, IdmParams, Leader};
use super::road::{RoadNetwork, RAMP_LANE};
use super::vehicle::{kinematic_step, ControlTarget, VehicleId, VehicleState, EGO_ID};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Physics step in seconds.
    pub dt: f64,
    /// Seconds between policy decisions.
    pub decision_period: f64,
    pub hard_speed_cap: f64,
    pub gains: ControllerGains,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            decision_period: 1.0,
            hard_speed_cap: 40.0,
            gains: ControllerGains::default(),
        }
    }
}

impl SimConfig {
    /// Physics steps per decision tick.
    pub fn steps_per_decision(&self) -> u64 {
        ((self.decision_period / self.dt).round() as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Driver {
    /// Tracks a meta-action set-point through the two controllers.
    Ego(ControlTarget),
    /// IDM longitudinally, lane keeping laterally. `target_lane` only ever
    /// changes for ramp vehicles moving into lane 0.
    Npc { idm: IdmParams, target_lane: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub state: VehicleState,
    pub driver: Driver,
}

impl Vehicle {
    pub fn target_lane(&self) -> i32 {
        match &self.driver {
            Driver::Ego(t) => t.target_lane,
            Driver::Npc { target_lane, .. } => *target_lane,
        }
    }

    fn occupies(&self, lane: i32) -> bool {
        self.state.lane == lane || self.target_lane() == lane
    }

    fn shares_lane_with(&self, other: &Vehicle) -> bool {
        other.occupies(self.state.lane) || other.occupies(self.target_lane())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorldStatus {
    Running,
    Crashed(VehicleId, VehicleId),
}

/// Fixed-timestep world. Vehicles are kept sorted by id so every sweep
/// visits them in the same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub road: RoadNetwork,
    pub config: SimConfig,
    pub step: u64,
    vehicles: Vec<Vehicle>,
    pub status: WorldStatus,
}

impl World {
    pub fn new(road: RoadNetwork, config: SimConfig) -> Self {
        Self {
            road,
            config,
            step: 0,
            vehicles: Vec::new(),
            status: WorldStatus::Running,
        }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn insert(&mut self, vehicle: Vehicle) {
        let pos = self
            .vehicles
            .binary_search_by_key(&vehicle.state.id, |v| v.state.id)
            .unwrap_or_else(|p| p);
        if self.vehicles.get(pos).map(|v| v.state.id) == Some(vehicle.state.id) {
            self.vehicles[pos] = vehicle;
        } else {
            self.vehicles.insert(pos, vehicle);
        }
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn states(&self) -> Vec<VehicleState> {
        self.vehicles.iter().map(|v| v.state.clone()).collect()
    }

    pub fn get(&self, id: VehicleId) -> Option<&Vehicle> {
        self.vehicles
            .binary_search_by_key(&id, |v| v.state.id)
            .ok()
            .map(|i| &self.vehicles[i])
    }

    pub fn ego(&self) -> Option<&Vehicle> {
        self.get(EGO_ID)
    }

    pub fn ego_target(&self) -> Option<ControlTarget> {
        match self.ego()?.driver {
            Driver::Ego(t) => Some(t),
            Driver::Npc { .. } => None,
        }
    }

    pub fn set_ego_target(&mut self, target: ControlTarget) {
        if let Ok(i) = self.vehicles.binary_search_by_key(&EGO_ID, |v| v.state.id) {
            self.vehicles[i].driver = Driver::Ego(target);
        }
    }

    pub fn is_crashed(&self) -> bool {
        matches!(self.status, WorldStatus::Crashed(..))
    }

    /// Hex SHA-256 over the serialized world.
    pub fn state_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("world serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Advance one physics step: commands for every vehicle are computed from
    /// the pre-step snapshot, then all vehicles integrate, then collisions
    /// are checked.
    pub fn step_world(&mut self) {
        let dt = self.config.dt;
        let gains = self.config.gains;
        let mut next: Vec<Vehicle> = Vec::with_capacity(self.vehicles.len());

        for (i, vehicle) in self.vehicles.iter().enumerate() {
            let mut v = vehicle.clone();
            match &mut v.driver {
                Driver::Ego(target) => {
                    v.state.accel_cmd = longitudinal_control(v.state.speed, target.target_speed, &gains);
                    v.state.steer_cmd = lateral_control(&v.state, target.target_lane, &self.road, &gains);
                }
                Driver::Npc { idm, target_lane } => {
                    if *target_lane == RAMP_LANE && self.ramp_vehicle_may_merge(i) {
                        *target_lane = 0;
                    }
                    let leader = self.leader_of(i, *target_lane);
                    let out = idm_acceleration(v.state.speed, leader, idm);
                    v.state.accel_cmd = out.accel;
                    v.state.steer_cmd = lateral_control(&v.state, *target_lane, &self.road, &gains);
                }
            }
            next.push(v);
        }

        for v in &mut next {
            v.state = kinematic_step(&v.state, dt, &self.road);
        }
        self.vehicles = next;
        self.step += 1;

        if self.status == WorldStatus::Running {
            if let Some((a, b)) = detect_collision(&self.states()) {
                self.status = WorldStatus::Crashed(a, b);
            }
        }
    }

    /// Nearest vehicle ahead sharing a lane (current or targeted) with
    /// vehicle `i`. Ramp vehicles that have not started merging also see the
    /// end of the ramp as a stopped obstacle.
    fn leader_of(&self, i: usize, target_lane: i32) -> Option<Leader> {
        let me = &self.vehicles[i];
        let mut best: Option<Leader> = None;
        for (j, other) in self.vehicles.iter().enumerate() {
            if j == i || other.state.x <= me.state.x {
                continue;
            }
            let shares = other.occupies(me.state.lane)
                || other.occupies(target_lane)
                || me.shares_lane_with(other);
            if !shares {
                continue;
            }
            let gap = other.state.x - me.state.x - (other.state.length + me.state.length) / 2.0;
            if best.is_none_or(|b| gap < b.gap) {
                best = Some(Leader {
                    gap,
                    speed: other.state.speed,
                });
            }
        }
        if target_lane == RAMP_LANE {
            if let Some(m) = self.road.merge {
                let gap = m.merge_end_x - me.state.front_x();
                if best.is_none_or(|b| gap < b.gap) {
                    best = Some(Leader { gap, speed: 0.0 });
                }
            }
        }
        best
    }

    /// Gap acceptance for a ramp vehicle inside the merge zone: the slot in
    /// lane 0 must leave a minimum gap plus half a second of headway on both
    /// sides.
    fn ramp_vehicle_may_merge(&self, i: usize) -> bool {
        let me = &self.vehicles[i].state;
        if !self.road.in_merge_zone(me.x) {
            // Past the ramp end there is nowhere left to be but lane 0.
            return self.road.merge.is_some_and(|m| me.x >= m.merge_end_x);
        }
        let min_gap = match &self.vehicles[i].driver {
            Driver::Npc { idm, .. } => idm.min_gap,
            Driver::Ego(_) => 2.0,
        };
        self.vehicles.iter().enumerate().all(|(j, other)| {
            if j == i || !other.occupies(0) {
                return true;
            }
            let o = &other.state;
            let half = (o.length + me.length) / 2.0;
            if o.x >= me.x {
                o.x - me.x - half >= min_gap + 0.5 * me.speed
            } else {
                let closing = (o.speed - me.speed).max(0.0);
                me.x - o.x - half >= min_gap + 0.5 * o.speed + 1.5 * closing
            }
        })
    }
}
