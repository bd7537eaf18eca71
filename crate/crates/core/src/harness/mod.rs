//! Scenario loading, seeded episode execution, traces and scoring.

pub mod batch;
pub mod compare;
pub mod episode;
pub mod metrics;
pub mod scenario;
pub mod trace;

pub use batch::{matrix, metrics_for, run_batch, BatchJob, BatchOptions, BatchRow};
pub use compare::{compare_behaviors, BehaviorReport, MetricMeans, Order, OrderingCheck};
pub use episode::{replay_setup, replay_trace, run_episode, Episode, StepReport};
pub use metrics::{
    compute_metrics, compute_metrics_from, count_lane_changes, partial_metrics, EpisodeMetrics, PartialMetrics,
    LANE_DWELL,
};
pub use scenario::{EgoSpawn, LaneRef, NpcSpawn, Randomize, Scenario, ScheduledCommand};
pub use trace::{DecisionRecord, FrameRecord, Outcome, Trace, TraceEvent, TraceHeader};
