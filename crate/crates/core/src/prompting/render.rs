use std::fmt::Write;

use crate::sim::RAMP_LANE;
use crate::tools::{CabinStatus, LaneView, Localization, Memory, Neighbor, Perception};

/// One-decimal formatting with negative zero folded into `0.0`.
pub fn fmt1(v: f64) -> String {
    let s = format!("{v:.1}");
    if s == "-0.0" {
        "0.0".to_string()
    } else {
        s
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn lane_label(lane: i32) -> String {
    if lane == RAMP_LANE {
        "merge lane".to_string()
    } else {
        format!("lane {lane}")
    }
}

fn neighbor_line(out: &mut String, label: &str, role: &str, n: Option<&Neighbor>, empty: &str) {
    match n {
        Some(n) => writeln!(
            out,
            "{label} {role}: gap {} m, speed {} m/s, relative speed {} m/s",
            fmt1(n.gap),
            fmt1(n.speed),
            fmt1(n.relative_speed)
        ),
        None => writeln!(out, "{label} {role}: {empty}"),
    }
    .expect("writing to a String cannot fail");
}

fn lane_lines(out: &mut String, view: &LaneView, ego_lane: i32) {
    let mut label = lane_label(view.lane);
    if view.lane == ego_lane {
        label.push_str(" (ego lane)");
    }
    neighbor_line(out, &label, "lead", view.lead.as_ref(), "no vehicle ahead");
    neighbor_line(out, &label, "follower", view.follower.as_ref(), "no vehicle behind");
    if let Some(a) = &view.alongside {
        neighbor_line(out, &label, "alongside", Some(a), "");
    }
}

/// Line-oriented observation text. Pure and deterministic: numbers carry
/// one decimal, lanes are listed in ascending id order.
pub fn render_observation(
    perception: &Perception,
    localization: &Localization,
    memory: &Memory,
    cabin: &CabinStatus,
) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        "Lane numbering: lane 0 is the rightmost lane and ids increase to the left; the road has {} lanes (0 to {}).",
        localization.lane_count,
        localization.lane_count.saturating_sub(1)
    );
    let _ = writeln!(
        w,
        "Ego: {}, speed {} m/s, cruise set-point {} m/s toward lane {}, position x {} m{}.",
        lane_label(perception.ego_lane),
        fmt1(perception.ego_speed),
        fmt1(perception.set_point.target_speed),
        perception.set_point.target_lane,
        fmt1(localization.x),
        if localization.on_ramp { " (on ramp)" } else { "" }
    );
    match memory.home_lane {
        Some(h) => {
            let _ = writeln!(w, "Home lane: lane {h} (return here after overtaking).");
        }
        None => {
            let _ = writeln!(w, "Home lane: not set.");
        }
    }
    let _ = writeln!(w, "Speed limit: {} m/s.", fmt1(memory.speed_limit));
    let _ = writeln!(w, "Route end: {} m ahead.", fmt1(localization.distance_to_route_end));
    match localization.distance_to_merge_end {
        Some(d) => {
            let _ = writeln!(w, "Merge: on-ramp joins lane 0, merge zone ends {} m ahead.", fmt1(d));
        }
        None => {
            let _ = writeln!(w, "Merge: none ahead.");
        }
    }
    for view in &perception.lanes {
        lane_lines(w, view, perception.ego_lane);
    }
    let _ = writeln!(w, "Traffic rules: {}", memory.traffic_rules.join(" "));
    let _ = writeln!(
        w,
        "Cabin: driver attentive {}, seatbelt fastened {}.",
        yes_no(cabin.driver_attentive),
        yes_no(cabin.seatbelt_fastened)
    );
    match memory.latest_command() {
        Some(c) => {
            let _ = write!(w, "Driver command: \"{}\" (given at t={} s).", c.text, fmt1(c.time));
        }
        None => {
            let _ = write!(w, "Driver command: none.");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::prompting::FewShotStore;
    use crate::sim::{ControlTarget, VehicleId};

    fn memory() -> Memory {
        let mut m = Memory::new(28.0, Arc::new(FewShotStore::default()));
        m.home_lane = Some(1);
        m
    }

    fn empty_lane(lane: i32) -> LaneView {
        LaneView {
            lane,
            lead: None,
            follower: None,
            alongside: None,
        }
    }

    fn localization() -> Localization {
        Localization {
            lane: 1,
            lane_count: 4,
            x: 100.0,
            distance_to_route_end: 900.0,
            distance_to_merge_end: None,
            on_ramp: false,
        }
    }

    fn perception(lanes: Vec<LaneView>) -> Perception {
        Perception {
            ego_lane: 1,
            ego_speed: 30.0,
            set_point: ControlTarget {
                target_lane: 1,
                target_speed: 30.0,
            },
            lanes,
        }
    }

    #[test]
    fn empty_road_mentions_every_lane() {
        let p = perception(vec![empty_lane(0), empty_lane(1), empty_lane(2)]);
        let text = render_observation(&p, &localization(), &memory(), &CabinStatus::default());
        for lane in ["lane 0", "lane 1 (ego lane)", "lane 2"] {
            assert!(text.contains(&format!("{lane} lead: no vehicle ahead")), "{text}");
        }
        assert_eq!(text, render_observation(&p, &localization(), &memory(), &CabinStatus::default()));
    }

    #[test]
    fn golden_single_lead() {
        let mut own = empty_lane(1);
        own.lead = Some(Neighbor {
            id: VehicleId(1),
            gap: 47.5,
            speed: 25.0,
            relative_speed: -5.0,
        });
        let p = perception(vec![empty_lane(0), own, empty_lane(2)]);
        let text = render_observation(&p, &localization(), &memory(), &CabinStatus::default());
        let golden = "\
Lane numbering: lane 0 is the rightmost lane and ids increase to the left; the road has 4 lanes (0 to 3).
Ego: lane 1, speed 30.0 m/s, cruise set-point 30.0 m/s toward lane 1, position x 100.0 m.
Home lane: lane 1 (return here after overtaking).
Speed limit: 28.0 m/s.
Route end: 900.0 m ahead.
Merge: none ahead.
lane 0 lead: no vehicle ahead
lane 0 follower: no vehicle behind
lane 1 (ego lane) lead: gap 47.5 m, speed 25.0 m/s, relative speed -5.0 m/s
lane 1 (ego lane) follower: no vehicle behind
lane 2 lead: no vehicle ahead
lane 2 follower: no vehicle behind
Traffic rules: Keep right unless overtaking. Overtake on the left. Do not exceed the posted speed limit unless the driver asks for faster driving. Keep a safe following distance.
Cabin: driver attentive yes, seatbelt fastened yes.
Driver command: none.";
        assert_eq!(text, golden);
    }

    #[test]
    fn command_and_merge_lines() {
        let mut m = memory();
        m.record_command("drive more aggressively", 3.0);
        let mut l = localization();
        l.distance_to_merge_end = Some(130.04);
        let mut ramp = empty_lane(RAMP_LANE);
        ramp.alongside = Some(Neighbor {
            id: VehicleId(4),
            gap: 0.0,
            speed: 21.0,
            relative_speed: -0.0,
        });
        let p = perception(vec![ramp, empty_lane(0), empty_lane(1)]);
        let text = render_observation(&p, &l, &m, &CabinStatus::default());
        assert!(text.contains("merge zone ends 130.0 m ahead"));
        assert!(text.contains("merge lane alongside: gap 0.0 m, speed 21.0 m/s, relative speed 0.0 m/s"));
        assert!(text.ends_with("Driver command: \"drive more aggressively\" (given at t=3.0 s)."));
    }

    #[test]
    fn fmt1_folds_negative_zero() {
        assert_eq!(fmt1(-0.04), "0.0");
        assert_eq!(fmt1(-0.06), "-0.1");
        assert_eq!(fmt1(47.5), "47.5");
    }
}
