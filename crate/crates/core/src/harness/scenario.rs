use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::actions::SafetyEnvelope;
use crate::error::{Error, Result};
use crate::policies::RuleConfig;
use crate::prompting::{FewShotStore, PromptMode};
use crate::sim::{
    ControlTarget, Driver, IdmOverrides, IdmParams, RoadNetwork, SimConfig, Vehicle, VehicleId, VehicleState,
    World, EGO_ID, RAMP_LANE,
};
use crate::tools::{CabinStatus, Memory};

const SHIPPED: &[(&str, &str)] = &[
    ("highway_safe_overtake", include_str!("../../scenarios/highway_safe_overtake.toml")),
    ("highway_unsafe_overtake", include_str!("../../scenarios/highway_unsafe_overtake.toml")),
    ("command_response", include_str!("../../scenarios/command_response.toml")),
    ("merge", include_str!("../../scenarios/merge.toml")),
];

/// Lane reference in scenario files: a main-lane index or the string `"ramp"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneRef(pub i32);

impl Serialize for LaneRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == RAMP_LANE {
            s.serialize_str("ramp")
        } else {
            s.serialize_i64(self.0.into())
        }
    }
}

impl<'de> Deserialize<'de> for LaneRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = LaneRef;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a lane index or \"ramp\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<LaneRef, E> {
                i32::try_from(v)
                    .ok()
                    .filter(|l| *l >= 0)
                    .map(LaneRef)
                    .ok_or_else(|| E::custom(format!("lane index {v} out of range")))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<LaneRef, E> {
                self.visit_i64(i64::try_from(v).unwrap_or(-1))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<LaneRef, E> {
                if v == "ramp" {
                    Ok(LaneRef(RAMP_LANE))
                } else {
                    Err(E::custom(format!("unknown lane `{v}`")))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpawn {
    pub lane: i32,
    pub x: f64,
    pub speed: f64,
    /// Initial controller set-point; defaults to the spawn speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_speed: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpcSpawn {
    pub lane: LaneRef,
    pub x: f64,
    pub speed: f64,
    /// Unset `v0` means the vehicle cruises at its spawn speed.
    #[serde(default)]
    pub idm: IdmOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledCommand {
    pub t: f64,
    pub text: String,
}

/// Per-seed perturbation of NPC spawns. All draws come from one generator
/// seeded by the episode seed; the ego spawn is never perturbed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Randomize {
    /// Uniform half-width in metres applied to each NPC's x.
    pub x_jitter: f64,
    /// Uniform half-width in m/s applied to each NPC's speed.
    pub speed_jitter: f64,
    /// Uniform half-width of one offset shared by every NPC.
    pub shared_speed_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub road: RoadNetwork,
    #[serde(default)]
    pub sim: SimConfig,
    pub ego: EgoSpawn,
    #[serde(default)]
    pub npcs: Vec<NpcSpawn>,
    #[serde(default)]
    pub prompt_mode: PromptMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_command: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub commands: Vec<ScheduledCommand>,
    #[serde(default)]
    pub hard_safety: bool,
    #[serde(default)]
    pub envelope: SafetyEnvelope,
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub randomize: Randomize,
    #[serde(default)]
    pub cabin: CabinStatus,
    #[serde(default)]
    pub rules: RuleConfig,
}

fn default_max_time() -> f64 {
    120.0
}

impl Scenario {
    pub fn shipped_names() -> impl Iterator<Item = &'static str> {
        SHIPPED.iter().map(|(n, _)| *n)
    }

    pub fn shipped(name: &str) -> Option<Scenario> {
        let name = name.strip_suffix(".toml").unwrap_or(name);
        SHIPPED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Scenario::from_toml(text).expect("shipped scenarios are valid"))
    }

    pub fn from_toml(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|source| Error::ScenarioParse {
            path: "<inline>".into(),
            source,
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path)?;
        let s: Scenario = toml::from_str(&text).map_err(|source| Error::ScenarioParse {
            path: path.to_path_buf(),
            source,
        })?;
        s.validate()?;
        Ok(s)
    }

    /// A shipped name (with or without `.toml`) or a path to a scenario file.
    pub fn resolve(name_or_path: &str) -> Result<Scenario> {
        if let Some(s) = Scenario::shipped(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if path.is_file() {
            Scenario::load(path)
        } else {
            Err(Error::UnknownScenario(name_or_path.to_string()))
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        let bad = |msg: String| Err(Error::Scenario(format!("{}: {msg}", self.name)));
        if !(self.sim.dt > 0.0 && self.sim.decision_period >= self.sim.dt) {
            return bad("dt must be positive and no longer than the decision period".into());
        }
        if !(self.max_time > 0.0) {
            return bad("max_time must be positive".into());
        }
        if !self.road.is_main_lane(self.ego.lane) {
            return bad(format!("ego lane {} is not a main lane", self.ego.lane));
        }
        let r = self.randomize;
        if [r.x_jitter, r.speed_jitter, r.shared_speed_jitter].iter().any(|j| !(*j >= 0.0)) {
            return bad("jitter half-widths must be non-negative".into());
        }
        for (i, n) in self.npcs.iter().enumerate() {
            let lane = n.lane.0;
            if lane == RAMP_LANE {
                let Some(m) = self.road.merge else {
                    return bad(format!("npc {i} is on the ramp but the road has no merge zone"));
                };
                if n.x < m.ramp_spawn_x || n.x >= m.merge_end_x {
                    return bad(format!("npc {i} ramp spawn x={} lies outside the ramp", n.x));
                }
            } else if !self.road.is_main_lane(lane) {
                return bad(format!("npc {i} lane {lane} does not exist"));
            }
            if !(n.speed >= 0.0) {
                return bad(format!("npc {i} has negative speed"));
            }
            if !n.idm.apply(IdmParams::default()).is_valid() {
                return bad(format!("npc {i} has invalid IDM overrides"));
            }
        }
        // Spawns in one lane must stay apart even after worst-case jitter.
        let length = crate::sim::vehicle::DEFAULT_VEHICLE_LENGTH;
        let mut spawns: Vec<(i32, f64, f64)> = vec![(self.ego.lane, self.ego.x, 0.0)];
        spawns.extend(self.npcs.iter().map(|n| (n.lane.0, n.x, r.x_jitter)));
        for (i, a) in spawns.iter().enumerate() {
            for b in &spawns[i + 1..] {
                if a.0 == b.0 && (a.1 - b.1).abs() < length + a.2 + b.2 {
                    return bad(format!("overlapping spawns in lane {} near x={}", a.0, a.1));
                }
            }
        }
        for c in &self.commands {
            if !(c.t >= 0.0) {
                return bad("command times must be non-negative".into());
            }
        }
        Ok(())
    }

    /// Builds the initial world for `seed`. NPC ids follow list order
    /// starting at 1; the ego is always id 0.
    pub fn instantiate(&self, seed: u64) -> World {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.randomize;
        let mut draw = |half: f64| if half > 0.0 { rng.gen_range(-half..=half) } else { 0.0 };
        let shared = draw(r.shared_speed_jitter);

        let mut world = World::new(self.road.clone(), self.sim);
        world.insert(Vehicle {
            state: VehicleState::on_lane(EGO_ID, &self.road, self.ego.lane, self.ego.x, self.ego.speed),
            driver: Driver::Ego(ControlTarget {
                target_lane: self.ego.lane,
                target_speed: self.ego.target_speed.unwrap_or(self.ego.speed),
            }),
        });
        for (i, n) in self.npcs.iter().enumerate() {
            let x = n.x + draw(r.x_jitter);
            let speed = (n.speed + shared + draw(r.speed_jitter)).max(0.0);
            let base = IdmParams {
                desired_speed: speed,
                ..IdmParams::default()
            };
            let lane = n.lane.0;
            world.insert(Vehicle {
                state: VehicleState::on_lane(VehicleId(i as u32 + 1), &self.road, lane, x, speed),
                driver: Driver::Npc {
                    idm: n.idm.apply(base),
                    target_lane: lane,
                },
            });
        }
        world
    }

    pub fn memory(&self, store: Arc<FewShotStore>) -> Memory {
        let mut m = Memory::new(self.road.speed_limit, store);
        m.home_lane = Some(self.ego.lane);
        m
    }
}
