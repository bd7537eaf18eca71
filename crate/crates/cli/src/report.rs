//! Fixed-width tables. Output depends only on the rows, never on timing or
//! paths, so it can be diffed against golden files.

use std::fmt::Write;

use drivetalk::harness::{BatchRow, EpisodeMetrics, MetricMeans};

fn gap(g: Option<f64>) -> String {
    g.map_or_else(|| "-".to_string(), |g| format!("{g:.2}"))
}

fn short_hash(h: Option<&str>) -> &str {
    h.map_or("-", |h| &h[..h.len().min(12)])
}

pub fn episode_header() -> String {
    format!(
        "{:>4}  {:<9}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>5}  {}",
        "seed", "outcome", "accel", "steer", "vmax", "gap", "time", "lanes", "trace"
    )
}

pub fn episode_line(seed: u64, m: &EpisodeMetrics, hash: Option<&str>) -> String {
    format!(
        "{:>4}  {:<9}  {:>6.3}  {:>6.4}  {:>6.2}  {:>6}  {:>6.2}  {:>5}  {}",
        seed,
        m.outcome.as_str(),
        m.mean_abs_acceleration,
        m.mean_abs_steering,
        m.max_abs_speed,
        gap(m.min_front_gap),
        m.overall_time,
        m.lane_changes,
        short_hash(hash)
    )
}

/// One line per episode, grouped by label.
pub fn episode_table(rows: &[BatchRow]) -> String {
    let mut out = String::new();
    let mut label = None;
    for r in rows {
        if label != Some(r.label.as_str()) {
            if label.is_some() {
                out.push('\n');
            }
            if r.label == r.policy.as_str() {
                let _ = writeln!(out, "{} / {}", r.scenario, r.label);
            } else {
                let _ = writeln!(out, "{} / {} ({})", r.scenario, r.label, r.policy);
            }
            let _ = writeln!(out, "{}", episode_header());
            label = Some(r.label.as_str());
        }
        match (&r.metrics, &r.error) {
            (Some(m), _) => {
                let _ = writeln!(out, "{}", episode_line(r.seed, m, r.trace_hash.as_deref()));
            }
            (None, err) => {
                let _ = writeln!(out, "{:>4}  error: {}", r.seed, err.as_deref().unwrap_or("unknown"));
            }
        }
    }
    out
}

pub fn means_header() -> String {
    format!(
        "{:<12}  {:<22}  {:>2}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>5}  {:>7}  {:>8}",
        "instruction", "policy", "n", "accel", "steer", "vmax", "gap", "time", "lanes", "crashed", "timeouts"
    )
}

pub fn means_line(instruction: &str, policy: &str, m: &MetricMeans) -> String {
    let gap = if m.min_front_gap.is_finite() {
        format!("{:.2}", m.min_front_gap)
    } else {
        "-".to_string()
    };
    format!(
        "{:<12}  {:<22}  {:>2}  {:>6.3}  {:>6.4}  {:>6.2}  {:>6}  {:>6.2}  {:>5.1}  {:>7}  {:>8}",
        instruction,
        policy,
        m.episodes,
        m.mean_abs_acceleration,
        m.mean_abs_steering,
        m.max_abs_speed,
        gap,
        m.overall_time,
        m.lane_changes,
        m.crashed,
        m.timeouts
    )
}
