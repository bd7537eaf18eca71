use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::Episode;
use super::metrics::EpisodeMetrics;
use super::scenario::Scenario;
use crate::error::Result;
use crate::policies::{LlmEndpoint, Policy, PolicyKind};

/// One cell of an experiment matrix. `command` replaces the scenario's
/// initial command when set.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchJob {
    pub scenario: Scenario,
    pub policy: PolicyKind,
    pub seed: u64,
    pub label: String,
    pub command: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    pub endpoint: Option<LlmEndpoint>,
    /// Forces the validator's gap check on or off for every job.
    pub hard_safety: Option<bool>,
    /// Writes `<label>__<seed>.jsonl` per job when set.
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub scenario: String,
    pub label: String,
    pub policy: PolicyKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<EpisodeMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The usual matrix: every policy (labelled by its own name) for every seed.
pub fn matrix(scenario: &Scenario, policies: &[PolicyKind], seeds: &[u64]) -> Vec<BatchJob> {
    policies
        .iter()
        .flat_map(|&policy| {
            seeds.iter().map(move |&seed| BatchJob {
                scenario: scenario.clone(),
                policy,
                seed,
                label: policy.as_str().to_string(),
                command: None,
            })
        })
        .collect()
}

fn run_job(job: &BatchJob, opts: &BatchOptions) -> Result<(EpisodeMetrics, String)> {
    let mut scenario = job.scenario.clone();
    if let Some(c) = &job.command {
        scenario.initial_command = Some(c.clone());
    }
    if let Some(h) = opts.hard_safety {
        scenario.hard_safety = h;
    }
    let policy = Policy::from_kind(job.policy, scenario.rules, opts.endpoint.clone())?;
    let (trace, metrics) = Episode::new(&scenario, policy, job.seed)?.run_to_end()?;
    if let Some(dir) = &opts.trace_dir {
        trace.save(&dir.join(format!("{}__{}.jsonl", job.label, job.seed)))?;
    }
    Ok((metrics, trace.hash()))
}

/// Runs all jobs concurrently. Each job gets one row; a failing job records
/// its error instead of aborting the matrix. Rows are ordered by
/// (scenario, label, seed).
pub fn run_batch(jobs: &[BatchJob], opts: &BatchOptions) -> Vec<BatchRow> {
    let mut rows: Vec<BatchRow> = jobs
        .par_iter()
        .map(|job| {
            let (metrics, trace_hash, error) = match run_job(job, opts) {
                Ok((m, h)) => (Some(m), Some(h), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            BatchRow {
                scenario: job.scenario.name.clone(),
                label: job.label.clone(),
                policy: job.policy,
                seed: job.seed,
                metrics,
                trace_hash,
                error,
            }
        })
        .collect();
    rows.sort_by(|a, b| (&a.scenario, &a.label, a.seed).cmp(&(&b.scenario, &b.label, b.seed)));
    rows
}

/// Metrics of the successful rows carrying `label`, in seed order.
pub fn metrics_for<'a>(rows: &'a [BatchRow], label: &'a str) -> impl Iterator<Item = EpisodeMetrics> + 'a {
    rows.iter().filter(move |r| r.label == label).filter_map(|r| r.metrics)
}
