use proptest::prelude::*;

use drivetalk::prompting::{format_response, parse_response};
use drivetalk::sim::{
    kinematic_step, lateral_control, ControllerGains, Driver, IdmParams, RoadNetwork, SimConfig, Vehicle, VehicleId,
    VehicleState, World, EGO_ID, EMERGENCY_DECEL,
};
use drivetalk::{run_episode, MetaAction, Policy, PolicyKind, Scenario};

fn action() -> impl Strategy<Value = MetaAction> {
    prop::sample::select(MetaAction::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn idm_platoons_never_collide(
        size in 2usize..=10,
        speed in 5.0f64..30.0,
        slack in 0.0f64..20.0,
        leader_v0 in 0.0f64..30.0,
    ) {
        let road = RoadNetwork { main_length: 10_000.0, route_end_x: 10_000.0, ..RoadNetwork::default() };
        let idm = IdmParams::default();
        // Bumper gap at least s0 + vT, plus vehicle length between centers.
        let spacing = idm.min_gap + speed * idm.time_headway + slack + 5.0;
        let mut world = World::new(road.clone(), SimConfig::default());
        for i in 0..size {
            let lead = i + 1 == size;
            let p = IdmParams { desired_speed: if lead { leader_v0 } else { 30.0 }, ..idm };
            world.insert(Vehicle {
                state: VehicleState::on_lane(VehicleId(i as u32 + 1), &road, 2, spacing * i as f64, speed),
                driver: Driver::Npc { idm: p, target_lane: 2 },
            });
        }
        for _ in 0..4000 {
            world.step_world();
            for v in world.vehicles() {
                prop_assert!(v.state.accel_cmd >= -EMERGENCY_DECEL - 1e-9);
            }
        }
        prop_assert!(!world.is_crashed());
        let mut s = world.states();
        s.sort_by(|a, b| a.x.total_cmp(&b.x));
        for w in s.windows(2) {
            prop_assert!(w[1].rear_x() - w[0].front_x() >= idm.min_gap / 2.0);
        }
    }

    #[test]
    fn lateral_offsets_decay_without_large_overshoot(offset in -4.0f64..4.0, speed in 10.0f64..35.0) {
        let road = RoadNetwork::default();
        let gains = ControllerGains::default();
        let target = road.centerline(1);
        let mut s = VehicleState::on_lane(EGO_ID, &road, 1, 0.0, speed);
        s.y = target + offset;
        let mut overshoot: f64 = 0.0;
        for _ in 0..100 {
            s.steer_cmd = lateral_control(&s, 1, &road, &gains);
            prop_assert!(s.steer_cmd.abs() <= gains.steer_max);
            s = kinematic_step(&s, 0.05, &road);
            // Error on the far side of the centerline from where it started.
            overshoot = overshoot.max(-(s.y - target) * offset.signum());
        }
        prop_assert!((s.y - target).abs() < 0.1, "error {}", s.y - target);
        prop_assert!(overshoot <= 0.5, "overshoot {overshoot}");
    }

    #[test]
    fn kinematics_keep_speed_non_negative(speed in 0.0f64..40.0, accel in -20.0f64..5.0, steps in 1usize..200) {
        let road = RoadNetwork::default();
        let mut s = VehicleState::on_lane(EGO_ID, &road, 0, 0.0, speed);
        s.accel_cmd = accel;
        for _ in 0..steps {
            s = kinematic_step(&s, 0.05, &road);
            prop_assert!(s.speed >= 0.0);
        }
    }

    #[test]
    fn lane_ids_follow_centerlines(lane in 0i32..4, dy in -1.9f64..1.9, x in 0.0f64..1000.0) {
        let road = RoadNetwork::default();
        prop_assert_eq!(road.lane_at(x, road.centerline(lane) + dy), lane);
    }

    #[test]
    fn formatted_responses_parse_back(thoughts in "[a-zA-Z0-9 .,;()\n-]{0,160}", a in action()) {
        prop_assume!(!thoughts.to_ascii_lowercase().contains("action"));
        let d = parse_response(&format_response(Some(&thoughts), a)).unwrap();
        prop_assert_eq!(d.action, a);
        let trimmed = thoughts.trim();
        prop_assert_eq!(d.thoughts.as_deref(), (!trimmed.is_empty()).then_some(trimmed));
    }

    #[test]
    fn action_names_and_codes_both_parse(a in action(), lower in any::<bool>()) {
        let name = if lower { a.name().to_ascii_lowercase() } else { a.name().to_string() };
        prop_assert_eq!(parse_response(&format!("Action: {name}")).unwrap().action, a);
        prop_assert_eq!(parse_response(&format!("Action: {}", a.code())).unwrap().action, a);
    }
}

#[test]
fn episode_controls_stay_within_actuator_limits() {
    let gains = ControllerGains::default();
    for name in Scenario::shipped_names() {
        let scenario = Scenario::shipped(name).unwrap();
        for kind in [PolicyKind::RuleAggressive, PolicyKind::RuleNaiveOvertaker] {
            let (trace, _) = run_episode(&scenario, Policy::from_kind(kind, scenario.rules, None).unwrap(), 3).unwrap();
            for f in trace.frames() {
                let ego = f.ego().unwrap();
                assert!(ego.steer_cmd.abs() <= gains.steer_max, "{name} {kind} t={}", f.t);
                assert!((gains.accel_min..=gains.accel_max).contains(&ego.accel_cmd));
                assert!(f.vehicles.iter().all(|v| v.speed >= 0.0));
                assert!(ego.speed <= scenario.sim.hard_speed_cap + 1e-9);
            }
        }
    }
}
