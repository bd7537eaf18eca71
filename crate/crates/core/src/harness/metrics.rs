use serde::{Deserialize, Serialize};

use super::trace::{Outcome, Trace, TraceEvent};
use crate::error::{Error, Result};
use crate::tools::lane_view;

/// Minimum time a lane id must hold, before and after a transition, for the
/// transition to count as a lane change.
pub const LANE_DWELL: f64 = 1.0;

/// Behavioural statistics for one episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub mean_abs_acceleration: f64,
    pub mean_abs_steering: f64,
    pub max_abs_speed: f64,
    /// `None` when no frame had a same-lane leader.
    pub min_front_gap: Option<f64>,
    pub overall_time: f64,
    pub lane_changes: u32,
    pub outcome: Outcome,
}

/// Statistics over the frames seen so far, for episodes still running.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialMetrics {
    /// Time of the last frame included.
    pub t: f64,
    pub mean_abs_acceleration: f64,
    pub mean_abs_steering: f64,
    pub max_abs_speed: f64,
    pub min_front_gap: Option<f64>,
    pub lane_changes: u32,
}

/// Pure function of the trace: frames give the per-step statistics, the
/// terminal event gives time and outcome.
pub fn compute_metrics(trace: &Trace) -> Result<EpisodeMetrics> {
    compute_metrics_from(&trace.events)
}

pub fn compute_metrics_from(events: &[TraceEvent]) -> Result<EpisodeMetrics> {
    let partial = partial_metrics(events)?;
    let (overall_time, outcome) = events
        .iter()
        .rev()
        .find_map(|e| match e {
            TraceEvent::Terminal { t, outcome } => Some((*t, *outcome)),
            _ => None,
        })
        .ok_or_else(|| Error::TraceFormat {
            line: events.len(),
            reason: "no terminal event".into(),
        })?;
    Ok(EpisodeMetrics {
        mean_abs_acceleration: partial.mean_abs_acceleration,
        mean_abs_steering: partial.mean_abs_steering,
        max_abs_speed: partial.max_abs_speed,
        min_front_gap: partial.min_front_gap,
        overall_time,
        lane_changes: partial.lane_changes,
        outcome,
    })
}

/// Frame statistics without requiring a terminal event.
pub fn partial_metrics(events: &[TraceEvent]) -> Result<PartialMetrics> {
    let mut n = 0usize;
    let mut sum_accel = 0.0;
    let mut sum_steer = 0.0;
    let mut max_speed = 0.0f64;
    let mut min_gap: Option<f64> = None;
    let mut lanes: Vec<(f64, i32)> = Vec::new();

    for (i, e) in events.iter().enumerate() {
        let TraceEvent::Frame(f) = e else { continue };
        let ego = f.ego().ok_or_else(|| Error::TraceFormat {
            line: i + 1,
            reason: "frame has no ego vehicle".into(),
        })?;
        n += 1;
        sum_accel += ego.accel_cmd.abs();
        sum_steer += ego.steer_cmd.abs();
        max_speed = max_speed.max(ego.speed.abs());
        if let Some(lead) = lane_view(&f.vehicles, ego, ego.lane).lead {
            min_gap = Some(min_gap.map_or(lead.gap, |g| g.min(lead.gap)));
        }
        lanes.push((f.t, ego.lane));
    }
    let Some(&(t, _)) = lanes.last() else {
        return Err(Error::EmptyTrace);
    };
    Ok(PartialMetrics {
        t,
        mean_abs_acceleration: sum_accel / n as f64,
        mean_abs_steering: sum_steer / n as f64,
        max_abs_speed: max_speed,
        min_front_gap: min_gap,
        lane_changes: count_lane_changes(&lanes, LANE_DWELL),
    })
}

/// Counts lane-id transitions after discarding runs held for less than
/// `dwell` seconds. A run lasts from the frame where the previous run ended
/// (t = 0 for the first) to its own last frame, so a 20-frame run at
/// dt = 0.05 lasts exactly 1 s. A flicker out and back therefore counts 0,
/// and a quick double change counts 2.
pub fn count_lane_changes(samples: &[(f64, i32)], dwell: f64) -> u32 {
    let mut runs: Vec<(i32, f64, f64)> = Vec::new();
    for &(t, lane) in samples {
        match runs.last_mut() {
            Some(run) if run.0 == lane => run.2 = t,
            Some(run) => {
                let start = run.2;
                runs.push((lane, start, t));
            }
            None => runs.push((lane, 0.0, t)),
        }
    }
    // Tolerance keeps exact-multiple dwell times from losing to rounding.
    let stable: Vec<i32> = runs
        .iter()
        .filter(|(_, start, end)| end - start >= dwell - 1e-9)
        .map(|r| r.0)
        .collect();
    stable.windows(2).map(|w| w[0].abs_diff(w[1])).sum()
}
