//! Command-line front end: `run`, `eval`, `replay` and `serve`.

pub mod report;
pub mod seeds;
pub mod service;

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use drivetalk::harness::{
    compute_metrics, metrics_for, replay_setup, replay_trace, run_batch, BatchJob, BatchOptions, BatchRow, MetricMeans,
    Outcome, Trace,
};
use drivetalk::policies::LlmEndpoint;
use drivetalk::{compare_behaviors, PolicyKind, Scenario};

use seeds::SeedSet;
use service::{PolicySpec, ServiceConfig};

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_CRASHED: u8 = 2;

/// Commands used for command-conditioned evaluation of a single policy.
pub const AGGRESSIVE_COMMAND: &str = "drive more aggressively";
pub const CONSERVATIVE_COMMAND: &str = "drive more conservatively";

#[derive(Debug, Parser)]
#[command(name = "drivetalk", version, about = "Closed-loop highway driving with language-model and rule policies")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one policy on one scenario for each seed and print its metrics.
    Run(RunArgs),
    /// Run a policy matrix and compare driving styles.
    Eval(EvalArgs),
    /// Recompute metrics from a trace file, optionally re-running or serving it.
    Replay(ReplayArgs),
    /// Run an episode live and stream it over a websocket.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EndpointArgs {
    /// Chat-completion base URL, e.g. http://localhost:8000/v1.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key; empty sends none.
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub llm_timeout: Option<f64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
}

impl EndpointArgs {
    pub fn endpoint(&self) -> LlmEndpoint {
        let mut e = LlmEndpoint::from_env();
        if let Some(url) = &self.base_url {
            e.base_url = url.clone();
        }
        if let Some(model) = &self.model {
            e.model_name = model.clone();
        }
        if let Some(var) = &self.api_key_env {
            e.api_key_env = (!var.is_empty()).then(|| var.clone());
        }
        if let Some(t) = self.llm_timeout {
            e.timeout = t;
        }
        if let Some(n) = self.max_retries {
            e.max_retries = n;
        }
        e
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Shipped scenario name or path to a scenario TOML file.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub policy: PolicyKind,
    /// Seeds: `7`, `1..10` (inclusive) or a comma list.
    #[arg(long, alias = "seeds", default_value = "0")]
    pub seed: SeedSet,
    /// Driver command given at t=0, replacing the scenario's own.
    #[arg(long)]
    pub command: Option<String>,
    /// Force the validator's gap check on or off.
    #[arg(long)]
    pub hard_safety: Option<bool>,
    /// Trace directory; defaults to ./runs/<timestamp>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 2 if any episode crashed.
    #[arg(long)]
    pub fail_on_crash: bool,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenario: String,
    /// The three style rules compare directly; a single policy is run under
    /// an aggressive command, a conservative command and no command.
    #[arg(long, value_delimiter = ',', default_value = "rule_aggressive,rule_conservative,rule_balanced")]
    pub policies: Vec<PolicyKind>,
    #[arg(long, alias = "seed", default_value = "1..10")]
    pub seeds: SeedSet,
    #[arg(long)]
    pub hard_safety: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub fail_on_crash: bool,
    /// Exit with status 1 if any style ordering fails.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub trace: PathBuf,
    /// Re-simulate from the recorded actions and check the frames match.
    #[arg(long)]
    pub rerun: bool,
    /// Stream the re-simulation live instead.
    #[arg(long)]
    pub serve: bool,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, default_value_t = 1.0)]
    pub pace: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub policy: PolicyKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Simulated seconds per wall-clock second; 0 runs as fast as possible.
    #[arg(long, default_value_t = 1.0)]
    pub pace: f64,
    /// Wait for a resume message before starting.
    #[arg(long)]
    pub paused: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

/// Failure with its exit status.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Crashed(usize),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<drivetalk::Error> for Failure {
    fn from(e: drivetalk::Error) -> Self {
        Failure::Config(e.into())
    }
}

/// `./runs/<timestamp>` with `./runs/latest` pointing at it, or the
/// explicit directory as given.
pub fn output_dir(explicit: Option<&Path>) -> anyhow::Result<PathBuf> {
    if let Some(dir) = explicit {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        return Ok(dir.to_path_buf());
    }
    let root = Path::new("runs");
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S").to_string();
    let mut dir = root.join(&stamp);
    let mut n = 1;
    while dir.exists() {
        dir = root.join(format!("{stamp}-{n}"));
        n += 1;
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let latest = root.join("latest");
    let _ = fs::remove_file(&latest);
    #[cfg(unix)]
    {
        let target = dir.file_name().expect("timestamped name");
        if let Err(e) = std::os::unix::fs::symlink(target, &latest) {
            tracing::warn!(error = %e, "could not update runs/latest");
        }
    }
    Ok(dir)
}

fn load_scenario(name: &str, hard_safety: Option<bool>) -> anyhow::Result<Scenario> {
    let mut s = Scenario::resolve(name).with_context(|| format!("loading scenario `{name}`"))?;
    if let Some(h) = hard_safety {
        s.hard_safety = h;
    }
    Ok(s)
}

fn needs_endpoint(kinds: &[PolicyKind]) -> bool {
    kinds.iter().any(|k| k.prompt_mode().is_some())
}

fn write_rows(dir: &Path, rows: &[BatchRow]) -> anyhow::Result<()> {
    let path = dir.join("rows.json");
    fs::write(&path, serde_json::to_string_pretty(rows)?).with_context(|| format!("writing {}", path.display()))
}

fn crash_check(rows: &[BatchRow], fail_on_crash: bool) -> Result<(), Failure> {
    let crashed = rows
        .iter()
        .filter(|r| r.metrics.is_some_and(|m| m.outcome == Outcome::Crashed))
        .count();
    if fail_on_crash && crashed > 0 {
        return Err(Failure::Crashed(crashed));
    }
    Ok(())
}

fn first_error(rows: &[BatchRow]) -> Result<(), Failure> {
    match rows.iter().find_map(|r| r.error.as_ref().map(|e| (r, e))) {
        Some((r, e)) => Err(Failure::Config(anyhow::anyhow!("{} seed {}: {e}", r.label, r.seed))),
        None => Ok(()),
    }
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let scenario = load_scenario(&args.scenario, args.hard_safety)?;
    let dir = output_dir(args.out.as_deref())?;
    let jobs: Vec<BatchJob> = args
        .seed
        .0
        .iter()
        .map(|&seed| BatchJob {
            scenario: scenario.clone(),
            policy: args.policy,
            seed,
            label: args.policy.as_str().to_string(),
            command: args.command.clone(),
        })
        .collect();
    let opts = BatchOptions {
        endpoint: needs_endpoint(&[args.policy]).then(|| args.endpoint.endpoint()),
        hard_safety: None,
        trace_dir: Some(dir.clone()),
    };
    let rows = run_batch(&jobs, &opts);
    write_rows(&dir, &rows)?;
    write!(out, "{}", report::episode_table(&rows)).context("writing output")?;
    eprintln!("traces: {}", dir.display());
    first_error(&rows)?;
    crash_check(&rows, args.fail_on_crash)
}

/// Labelled jobs for `eval`, with the instruction each label stands for.
pub fn eval_jobs(scenario: &Scenario, policies: &[PolicyKind], seeds: &[u64]) -> anyhow::Result<Vec<(String, String, BatchJob)>> {
    let mut plan: Vec<(String, PolicyKind, Option<&str>)> = Vec::new();
    match policies {
        [single] => {
            for (instruction, command) in [
                ("aggressive", Some(AGGRESSIVE_COMMAND)),
                ("conservative", Some(CONSERVATIVE_COMMAND)),
                ("none", None),
            ] {
                plan.push((instruction.to_string(), *single, command));
            }
        }
        many => {
            for &kind in many {
                let instruction = match kind {
                    PolicyKind::RuleAggressive => "aggressive",
                    PolicyKind::RuleConservative => "conservative",
                    PolicyKind::RuleBalanced => "none",
                    _ => kind.as_str(),
                };
                plan.push((instruction.to_string(), kind, None));
            }
        }
    }
    if policies.is_empty() {
        bail!("no policies given");
    }
    let mut jobs = Vec::new();
    for (instruction, kind, command) in plan {
        for &seed in seeds {
            jobs.push((
                instruction.clone(),
                kind.as_str().to_string(),
                BatchJob {
                    scenario: scenario.clone(),
                    policy: kind,
                    seed,
                    label: format!("{instruction}__{kind}"),
                    command: command.map(str::to_string),
                },
            ));
        }
    }
    Ok(jobs)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let scenario = load_scenario(&args.scenario, args.hard_safety)?;
    let planned = eval_jobs(&scenario, &args.policies, &args.seeds.0)?;
    let dir = output_dir(args.out.as_deref())?;
    let jobs: Vec<BatchJob> = planned.iter().map(|(_, _, j)| j.clone()).collect();
    let opts = BatchOptions {
        endpoint: needs_endpoint(&args.policies).then(|| args.endpoint.endpoint()),
        hard_safety: None,
        trace_dir: Some(dir.clone()),
    };
    let rows = run_batch(&jobs, &opts);
    write_rows(&dir, &rows)?;
    eprintln!("traces: {}", dir.display());
    first_error(&rows)?;

    let mut text = format!("scenario {}  seeds {}\n\n{}\n", scenario.name, args.seeds, report::means_header());
    let mut by_instruction = std::collections::HashMap::new();
    let mut seen = std::collections::HashSet::new();
    for (instruction, policy, job) in &planned {
        if !seen.insert(job.label.clone()) {
            continue;
        }
        let metrics: Vec<_> = metrics_for(&rows, &job.label).collect();
        let Some(means) = MetricMeans::of(&metrics) else { continue };
        text.push_str(&report::means_line(instruction, policy, &means));
        text.push('\n');
        by_instruction.insert(instruction.clone(), means);
    }
    let mut ordering_failed = false;
    if let (Some(a), Some(c), Some(n)) = (
        by_instruction.get("aggressive"),
        by_instruction.get("conservative"),
        by_instruction.get("none"),
    ) {
        let report = compare_behaviors(a, c, n);
        ordering_failed = !report.all_passed();
        text.push('\n');
        text.push_str(&report.to_string());
    }
    write!(out, "{text}").context("writing output")?;
    crash_check(&rows, args.fail_on_crash)?;
    if args.strict && ordering_failed {
        return Err(Failure::Config(anyhow::anyhow!("style orderings failed")));
    }
    Ok(())
}

pub fn cmd_replay(args: &ReplayArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let trace = Trace::load(&args.trace)?;
    let metrics = compute_metrics(&trace)?;
    let header = trace.header();
    let seed = header.map_or(0, |h| h.seed);
    let mut text = String::new();
    if let Some(h) = header {
        text.push_str(&format!("{} / {}\n", h.scenario.name, h.policy));
    }
    text.push_str(&report::episode_header());
    text.push('\n');
    text.push_str(&report::episode_line(seed, &metrics, Some(&trace.hash())));
    text.push('\n');
    if args.rerun {
        let (again, rerun) = replay_trace(&trace)?;
        let same = trace.frames().eq(again.frames());
        text.push_str(&format!(
            "rerun: frames {}, metrics {}\n",
            if same { "identical" } else { "DIFFER" },
            if rerun == metrics { "identical" } else { "DIFFER" }
        ));
        if !same || rerun != metrics {
            write!(out, "{text}").context("writing output")?;
            return Err(Failure::Config(anyhow::anyhow!("re-simulation diverged from the trace")));
        }
    }
    write!(out, "{text}").context("writing output")?;
    if args.serve {
        let (scenario, _, seed) = replay_setup(&trace)?;
        let cfg = ServiceConfig {
            scenario,
            policy: PolicySpec::Replay(trace.decisions().map(|d| d.action).collect()),
            seed,
            endpoint: None,
            pace: args.pace,
            trace_dir: None,
            start_paused: false,
        };
        serve_blocking(cfg, args.addr)?;
    }
    Ok(())
}

fn serve_blocking(cfg: ServiceConfig, addr: SocketAddr) -> anyhow::Result<()> {
    let (state, sim) = service::spawn_simulation(cfg)?;
    let rt = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    let result = rt.block_on(service::serve(state.clone(), addr));
    state.shutdown();
    let _ = sim.join();
    result
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), Failure> {
    let scenario = load_scenario(&args.scenario, None)?;
    let trace_dir = output_dir(args.out.as_deref())?;
    let cfg = ServiceConfig {
        scenario,
        policy: PolicySpec::Kind(args.policy),
        seed: args.seed,
        endpoint: needs_endpoint(&[args.policy]).then(|| args.endpoint.endpoint()),
        pace: args.pace,
        trace_dir: Some(trace_dir),
        start_paused: args.paused,
    };
    serve_blocking(cfg, args.addr)?;
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Parses `argv` and runs the chosen command. Usage errors exit 1, like any
/// other configuration error.
pub fn main_with<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    init_logging(cli.verbose);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, &mut out),
        Command::Eval(a) => cmd_eval(a, &mut out),
        Command::Replay(a) => cmd_replay(a, &mut out),
        Command::Serve(a) => cmd_serve(a),
    };
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Crashed(n)) => {
            eprintln!("{n} episode(s) crashed");
            ExitCode::from(EXIT_CRASHED)
        }
    }
}
