use std::fmt;

use serde::{Deserialize, Serialize};

use super::metrics::EpisodeMetrics;
use super::trace::Outcome;

/// Per-label averages over several episodes. A missing front gap (no leader
/// ever seen) counts as an infinitely open road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub episodes: usize,
    pub mean_abs_acceleration: f64,
    pub mean_abs_steering: f64,
    pub max_abs_speed: f64,
    pub min_front_gap: f64,
    pub overall_time: f64,
    pub lane_changes: f64,
    pub crashed: usize,
    pub timeouts: usize,
}

impl MetricMeans {
    pub fn of(rows: &[EpisodeMetrics]) -> Option<MetricMeans> {
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Some(MetricMeans {
            episodes: rows.len(),
            mean_abs_acceleration: mean(&|m| m.mean_abs_acceleration),
            mean_abs_steering: mean(&|m| m.mean_abs_steering),
            max_abs_speed: mean(&|m| m.max_abs_speed),
            min_front_gap: mean(&|m| m.min_front_gap.unwrap_or(f64::INFINITY)),
            overall_time: mean(&|m| m.overall_time),
            lane_changes: mean(&|m| f64::from(m.lane_changes)),
            crashed: rows.iter().filter(|m| m.outcome == Outcome::Crashed).count(),
            timeouts: rows.iter().filter(|m| m.outcome == Outcome::Timeout).count(),
        })
    }

    pub fn all_completed(&self) -> bool {
        self.crashed == 0 && self.timeouts == 0
    }
}

impl From<&EpisodeMetrics> for MetricMeans {
    fn from(m: &EpisodeMetrics) -> Self {
        MetricMeans::of(std::slice::from_ref(m)).expect("one row")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    /// Aggressive above none above conservative.
    AggressiveHigh,
    /// Conservative above none above aggressive.
    ConservativeHigh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub metric: String,
    pub order: Order,
    pub strict: bool,
    /// Values for aggressive, none, conservative.
    pub values: [f64; 3],
    pub passed: bool,
}

impl OrderingCheck {
    pub fn relation(&self) -> String {
        let op = if self.strict { ">" } else { ">=" };
        match self.order {
            Order::AggressiveHigh => format!("A {op} N {op} C"),
            Order::ConservativeHigh => format!("C {op} N {op} A"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorReport {
    /// False when any input episode did not complete.
    pub valid: bool,
    pub checks: Vec<OrderingCheck>,
}

impl BehaviorReport {
    pub fn all_passed(&self) -> bool {
        self.valid && self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &OrderingCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for BehaviorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.valid {
            writeln!(f, "report INVALID: an input episode crashed or timed out")?;
        }
        for c in &self.checks {
            writeln!(
                f,
                "{:<22} {:<12} {}  (A={:.2} N={:.2} C={:.2})",
                c.metric,
                c.relation(),
                if c.passed { "pass" } else { "FAIL" },
                c.values[0],
                c.values[1],
                c.values[2],
            )?;
        }
        Ok(())
    }
}

/// Checks the expected style orderings between aggressive (A), no-command
/// (N) and conservative (C) runs.
pub fn compare_behaviors(a: &MetricMeans, c: &MetricMeans, n: &MetricMeans) -> BehaviorReport {
    let specs: [(&str, fn(&MetricMeans) -> f64, Order, bool); 6] = [
        ("max_abs_speed", |m| m.max_abs_speed, Order::AggressiveHigh, true),
        ("min_front_gap", |m| m.min_front_gap, Order::ConservativeHigh, true),
        ("overall_time", |m| m.overall_time, Order::ConservativeHigh, true),
        ("lane_changes", |m| m.lane_changes, Order::AggressiveHigh, false),
        ("mean_abs_acceleration", |m| m.mean_abs_acceleration, Order::AggressiveHigh, true),
        ("mean_abs_steering", |m| m.mean_abs_steering, Order::AggressiveHigh, false),
    ];
    let checks = specs
        .iter()
        .map(|&(metric, get, order, strict)| {
            let values = [get(a), get(n), get(c)];
            let (hi, mid, lo) = match order {
                Order::AggressiveHigh => (values[0], values[1], values[2]),
                Order::ConservativeHigh => (values[2], values[1], values[0]),
            };
            let passed = if strict { hi > mid && mid > lo } else { hi >= mid && mid >= lo };
            OrderingCheck {
                metric: metric.to_string(),
                order,
                strict,
                values,
                passed,
            }
        })
        .collect();
    BehaviorReport {
        valid: a.all_completed() && c.all_completed() && n.all_completed(),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(accel: f64, steer: f64, speed: f64, gap: f64, time: f64, lanes: u32) -> MetricMeans {
        MetricMeans::from(&EpisodeMetrics {
            mean_abs_acceleration: accel,
            mean_abs_steering: steer,
            max_abs_speed: speed,
            min_front_gap: Some(gap),
            overall_time: time,
            lane_changes: lanes,
            outcome: Outcome::Completed,
        })
    }

    #[test]
    fn published_rows_pass_every_ordering() {
        let a = row(3.10, 0.03, 34.77, 7.17, 24.33, 6);
        let c = row(0.18, 0.01, 20.00, 39.14, 46.20, 1);
        let n = row(1.41, 0.02, 27.43, 24.01, 34.20, 2);
        let r = compare_behaviors(&a, &c, &n);
        assert!(r.all_passed(), "{r}");
        assert_eq!(r.checks.len(), 6);
    }

    #[test]
    fn identical_rows_pass_only_non_strict_checks() {
        let x = row(1.0, 0.02, 25.0, 20.0, 30.0, 2);
        let r = compare_behaviors(&x, &x, &x);
        for c in &r.checks {
            assert_eq!(c.passed, !c.strict, "{}", c.metric);
        }
    }

    #[test]
    fn swapped_speeds_name_the_failing_metric() {
        let a = row(3.10, 0.03, 20.0, 7.17, 24.33, 6);
        let c = row(0.18, 0.01, 34.77, 39.14, 46.20, 1);
        let n = row(1.41, 0.02, 27.43, 24.01, 34.20, 2);
        let r = compare_behaviors(&a, &c, &n);
        let failed: Vec<_> = r.failed().map(|c| c.metric.as_str()).collect();
        assert_eq!(failed, ["max_abs_speed"]);
        assert!(r.to_string().contains("max_abs_speed          A > N > C    FAIL"));
    }

    #[test]
    fn a_crash_invalidates_the_report() {
        let crashed = EpisodeMetrics {
            mean_abs_acceleration: 3.0,
            mean_abs_steering: 0.03,
            max_abs_speed: 35.0,
            min_front_gap: None,
            overall_time: 10.0,
            lane_changes: 6,
            outcome: Outcome::Crashed,
        };
        let a = MetricMeans::of(&[crashed]).unwrap();
        assert_eq!(a.crashed, 1);
        let r = compare_behaviors(&a, &row(0.1, 0.0, 20.0, 40.0, 46.0, 1), &row(1.0, 0.02, 27.0, 24.0, 34.0, 2));
        assert!(!r.valid);
        assert!(!r.all_passed());
    }

    #[test]
    fn means_average_each_column() {
        let m = MetricMeans::of(&[
            EpisodeMetrics {
                mean_abs_acceleration: 1.0,
                mean_abs_steering: 0.0,
                max_abs_speed: 20.0,
                min_front_gap: Some(10.0),
                overall_time: 30.0,
                lane_changes: 1,
                outcome: Outcome::Completed,
            },
            EpisodeMetrics {
                mean_abs_acceleration: 2.0,
                mean_abs_steering: 0.02,
                max_abs_speed: 30.0,
                min_front_gap: Some(20.0),
                overall_time: 40.0,
                lane_changes: 2,
                outcome: Outcome::Timeout,
            },
        ])
        .unwrap();
        assert_eq!(m.mean_abs_acceleration, 1.5);
        assert_eq!(m.max_abs_speed, 25.0);
        assert_eq!(m.min_front_gap, 15.0);
        assert_eq!(m.lane_changes, 1.5);
        assert_eq!(m.timeouts, 1);
        assert!(!m.all_completed());
    }
}
