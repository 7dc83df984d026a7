//! Scenario configuration, job templates, metrics and reports.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::allocator::allocate_tasks;
use crate::baselines::{equal_share_plan, schedule_lr};
use crate::engine::{
    generate_arrivals, render_event_log, run_to_completion, EngineConfig, EngineError, JobRecord, LogEntry,
    SchedulerKind, SchedulerState,
};
use crate::jobgraph::{parse_job_config, Job, JobDoc, JobError};
use crate::jrba::{allocate_bandwidth, build_relaxed_lp, candidate_paths, oracle_best_plan, plan, JrbaError};
use crate::perfmodel::job_period;
use crate::topology::{
    enumerate_usable_paths, generate_random_network, EdgeNode, GeneratorParams, Link, Network, NetworkDoc,
    TopologyError, CAPACITY_EPS, DEFAULT_ORACLE_NODE_CAP, DEFAULT_PATH_BUDGET,
};

pub const CSV_HEADER: &str = "scenario,seed,scheduler,nodes,jobs,bw_mean,avg_throughput,avg_wait_s,runtime_ms";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Job(#[from] JobError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Route(#[from] JrbaError),
    #[error("no job records to summarise")]
    EmptyRecordSet,
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl HarnessError {
    /// Short error class name, e.g. `CycleDetected` or `Io`.
    pub fn kind(&self) -> String {
        let debug = match self {
            HarnessError::Topology(e) => format!("{e:?}"),
            HarnessError::Job(e) => format!("{e:?}"),
            HarnessError::Engine(e) => format!("{e:?}"),
            HarnessError::Route(e) => format!("{e:?}"),
            other => format!("{other:?}"),
        };
        debug.chars().take_while(|c| c.is_alphanumeric()).collect()
    }
}

type Result<T> = std::result::Result<T, HarnessError>;

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| HarnessError::Json(e.to_string()))
}

// ---------------------------------------------------------------------------
// Job templates

/// Constants of the ten-stage attribute-recognition pipeline: a frame source
/// stage, an object detector, parallel attribute recognizers and a tracker.
/// Volumes are per batch, workloads in work-units, memory in GB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub input_size: f64,
    pub recognizers: usize,
    pub source_work: f64,
    pub detector_work: f64,
    pub recognizer_work: f64,
    pub tracker_work: f64,
    pub source_mem: f64,
    pub detector_mem: f64,
    pub recognizer_mem: f64,
    pub tracker_mem: f64,
    pub frame_volume: f64,
    pub crop_volume: f64,
    pub attribute_volume: f64,
    pub stream_length: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            input_size: 2.0,
            recognizers: 7,
            source_work: 20.0,
            detector_work: 200.0,
            recognizer_work: 60.0,
            tracker_work: 20.0,
            source_mem: 0.5,
            detector_mem: 2.0,
            recognizer_mem: 0.5,
            tracker_mem: 0.5,
            frame_volume: 1.0,
            crop_volume: 0.1,
            attribute_volume: 0.02,
            stream_length: 100,
        }
    }
}

/// Ten-stage pipeline (with the default seven recognizers).
pub fn attribute_recognition_job(id: &str, source: usize, p: &PipelineParams) -> std::result::Result<Job, JobError> {
    let mut b = Job::builder(id, source, p.input_size)
        .task("source", p.source_work, p.source_mem)
        .task("detector", p.detector_work, p.detector_mem)
        .edge(0, 1, p.frame_volume)
        .stream_length(p.stream_length);
    for r in 0..p.recognizers {
        b = b
            .task(&format!("recognizer{}", r + 1), p.recognizer_work, p.recognizer_mem)
            .edge(1, 2 + r, p.crop_volume);
    }
    let tracker = 2 + p.recognizers;
    b = b.task("tracker", p.tracker_work, p.tracker_mem);
    for r in 0..p.recognizers {
        b = b.edge(2 + r, tracker, p.attribute_volume);
    }
    b.build()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRef {
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinTemplate {
    /// `attribute_recognition` or `motivating`.
    pub builtin: String,
    #[serde(default)]
    pub params: PipelineParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JobEntry {
    File(FileRef),
    Builtin(BuiltinTemplate),
    Inline(JobDoc),
}

impl JobEntry {
    fn load(&self, base: &Path) -> Result<Job> {
        match self {
            JobEntry::File(f) => Ok(parse_job_config(&read_file(&base.join(&f.file))?)?),
            JobEntry::Builtin(b) => match b.builtin.as_str() {
                "attribute_recognition" => Ok(attribute_recognition_job("attribute_recognition", 0, &b.params)?),
                "motivating" => Ok(motivating_job()),
                other => Err(HarnessError::Config(format!("unknown builtin template {other:?}"))),
            },
            JobEntry::Inline(doc) => Ok(doc.clone().into_job()?),
        }
    }
}

// ---------------------------------------------------------------------------
// Scenarios

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateNetwork {
    pub generate: GeneratorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSpec {
    Generate(GenerateNetwork),
    File(FileRef),
    Inline(NetworkDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    pub templates: Vec<JobEntry>,
    pub n_jobs: usize,
    /// Mean arrivals per second.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobsSpec {
    Generate(ArrivalSpec),
    Explicit(Vec<JobEntry>),
}

fn default_scheduler() -> SchedulerKind {
    SchedulerKind::Otfs
}

fn default_k() -> usize {
    DEFAULT_PATH_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub network: NetworkSpec,
    pub jobs: JobsSpec,
    #[serde(default = "default_scheduler")]
    pub scheduler: SchedulerKind,
    #[serde(default = "default_k")]
    pub k_paths: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wait: Option<f64>,
}

/// A scenario with its network built and its jobs drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub network: Network,
    pub jobs: Vec<Job>,
    pub bw_mean: f64,
}

/// Seed of the arrival stream, kept apart from the network seed so the two
/// draws are independent.
fn arrival_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    /// Reads a scenario file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let cfg = Self::from_json(&read_file(path)?)?;
        Ok((cfg, path.parent().unwrap_or(Path::new(".")).to_path_buf()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn instantiate(&self, base: &Path) -> Result<Instance> {
        let (network, configured_bw) = match &self.network {
            NetworkSpec::Generate(g) => (generate_random_network(&g.generate, self.seed)?, Some(g.generate.bw_mean)),
            NetworkSpec::File(f) => (Network::from_json(&read_file(&base.join(&f.file))?)?, None),
            NetworkSpec::Inline(doc) => (Network::from_doc(doc)?, None),
        };
        let bw_mean = configured_bw.unwrap_or_else(|| {
            let links = network.links();
            links.iter().map(|l| l.capacity).sum::<f64>() / links.len().max(1) as f64
        });
        let jobs = match &self.jobs {
            JobsSpec::Explicit(entries) => entries.iter().map(|e| e.load(base)).collect::<Result<Vec<_>>>()?,
            JobsSpec::Generate(a) => {
                let templates = a.templates.iter().map(|e| e.load(base)).collect::<Result<Vec<_>>>()?;
                generate_arrivals(&templates, a.n_jobs, a.lambda, network.node_count(), arrival_seed(self.seed))?
            }
        };
        for job in &jobs {
            if job.source_node >= network.node_count() {
                return Err(EngineError::UnknownSource {
                    job: job.id.clone(),
                    node: job.source_node,
                }
                .into());
            }
        }
        Ok(Instance { network, jobs, bw_mean })
    }
}

// ---------------------------------------------------------------------------
// Runs and metrics

/// Averages over a record set. Unscheduled jobs count with throughput 0 and
/// wait until the last recorded instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub avg_throughput: f64,
    pub avg_wait_s: f64,
    pub jobs: usize,
    pub end_time: f64,
}

pub fn compute_metrics(records: &[JobRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(HarnessError::EmptyRecordSet);
    }
    let end_time = records
        .iter()
        .map(|r| r.finish.unwrap_or(r.arrival).max(r.scheduled.unwrap_or(r.arrival)))
        .fold(0.0, f64::max);
    let n = records.len() as f64;
    Ok(Summary {
        avg_throughput: records.iter().map(JobRecord::achieved_throughput).sum::<f64>() / n,
        avg_wait_s: records.iter().map(|r| r.waiting_time(end_time)).sum::<f64>() / n,
        jobs: records.len(),
        end_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub seed: u64,
    pub scheduler: SchedulerKind,
    pub nodes: usize,
    pub jobs: usize,
    pub bw_mean: f64,
    pub avg_throughput: f64,
    pub avg_wait_s: f64,
    pub runtime_ms: Option<f64>,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{}",
            self.scenario,
            self.seed,
            self.scheduler,
            self.nodes,
            self.jobs,
            self.bw_mean,
            self.avg_throughput,
            self.avg_wait_s,
            self.runtime_ms.map(|r| format!("{r:.3}")).unwrap_or_default()
        )
    }
}

pub fn render_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub row: MetricsRow,
    pub records: Vec<JobRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub log_events: bool,
    /// Measure wall-clock runtime (left empty otherwise so output is reproducible).
    pub timing: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub events: Vec<LogEntry>,
    pub policies: Vec<Value>,
    /// Network after the run; equals the instance's network when every job finished.
    pub network: Network,
}

impl RunOutput {
    pub fn event_log(&self) -> String {
        render_event_log(&self.events)
    }
}

pub fn simulate(
    name: &str,
    seed: u64,
    instance: &Instance,
    config: EngineConfig,
    timing: bool,
) -> Result<RunOutput> {
    let started = timing.then(std::time::Instant::now);
    let mut net = instance.network.clone();
    let scheduler = config.scheduler;
    let mut state = SchedulerState::new(instance.jobs.clone(), config)?;
    let records = run_to_completion(&mut state, &mut net)?;
    let runtime_ms = started.map(|s| s.elapsed().as_secs_f64() * 1e3);
    let summary = if records.is_empty() {
        Summary {
            avg_throughput: 0.0,
            avg_wait_s: 0.0,
            jobs: 0,
            end_time: 0.0,
        }
    } else {
        compute_metrics(&records)?
    };
    Ok(RunOutput {
        report: MetricsReport {
            row: MetricsRow {
                scenario: name.to_string(),
                seed,
                scheduler,
                nodes: net.node_count(),
                jobs: records.len(),
                bw_mean: instance.bw_mean,
                avg_throughput: summary.avg_throughput,
                avg_wait_s: summary.avg_wait_s,
                runtime_ms,
            },
            records,
        },
        events: state.event_log().to_vec(),
        policies: state.policies().to_vec(),
        network: net,
    })
}

pub fn run_scenario(config: &ScenarioConfig, base: &Path, options: RunOptions) -> Result<RunOutput> {
    let instance = config.instantiate(base)?;
    let engine = EngineConfig {
        scheduler: config.scheduler,
        k_paths: config.k_paths,
        max_wait: config.max_wait,
        log_events: options.log_events,
    };
    simulate(&config.name, config.seed, &instance, engine, options.timing)
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Nodes,
    NJobs,
    BwMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseScenario {
    File(String),
    Inline(Box<ScenarioConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    pub base: BaseScenario,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub schedulers: Vec<SchedulerKind>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn base_scenario(&self, base_dir: &Path) -> Result<(ScenarioConfig, PathBuf)> {
        match &self.base {
            BaseScenario::File(f) => ScenarioConfig::load(&base_dir.join(f)),
            BaseScenario::Inline(cfg) => Ok(((**cfg).clone(), base_dir.to_path_buf())),
        }
    }
}

fn axis_label(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::Nodes => "nodes",
        SweepAxis::NJobs => "n_jobs",
        SweepAxis::BwMean => "bw_mean",
    }
}

/// The base scenario with one axis set to `value`.
pub fn apply_axis(base: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    let need_generated = || HarnessError::Config(format!("axis {} needs a generated network", axis_label(axis)));
    match axis {
        SweepAxis::Nodes => match &mut cfg.network {
            NetworkSpec::Generate(g) => g.generate.nodes = value as usize,
            _ => return Err(need_generated()),
        },
        SweepAxis::BwMean => match &mut cfg.network {
            NetworkSpec::Generate(g) => {
                // Keep the coefficient of variation.
                let scale = value / g.generate.bw_mean;
                g.generate.bw_var *= scale * scale;
                g.generate.bw_mean = value;
            }
            _ => return Err(need_generated()),
        },
        SweepAxis::NJobs => match &mut cfg.jobs {
            JobsSpec::Generate(a) => a.n_jobs = value as usize,
            JobsSpec::Explicit(_) => return Err(HarnessError::Config("axis n_jobs needs generated jobs".into())),
        },
    }
    Ok(cfg)
}

/// Runs every value × seed × scheduler cell in parallel. Rows come back in
/// value, seed, scheduler order.
pub fn run_sweep(sweep: &SweepConfig, base_dir: &Path, timing: bool) -> Result<Vec<MetricsRow>> {
    if sweep.values.is_empty() || sweep.seeds.is_empty() || sweep.schedulers.is_empty() {
        return Err(HarnessError::Config("sweep needs values, seeds and schedulers".into()));
    }
    let (base, scenario_dir) = sweep.base_scenario(base_dir)?;
    let mut cells = Vec::new();
    for &value in &sweep.values {
        let cfg = apply_axis(&base, sweep.axis, value)?;
        for &seed in &sweep.seeds {
            for &scheduler in &sweep.schedulers {
                cells.push((value, seed, scheduler, cfg.clone()));
            }
        }
    }
    let rows: Result<Vec<MetricsRow>> = cells
        .into_par_iter()
        .map(|(value, seed, scheduler, mut cfg)| {
            cfg.seed = seed;
            cfg.scheduler = scheduler;
            cfg.name = format!("{}/{}={}", sweep.name, axis_label(sweep.axis), value);
            let out = run_scenario(&cfg, &scenario_dir, RunOptions { log_events: false, timing })?;
            Ok(out.report.row)
        })
        .collect();
    rows
}

// ---------------------------------------------------------------------------
// Motivating example

/// Five nodes e1..e5 (ids 0..4); e4 is the camera-side source. Link weights
/// that are only drawn, not stated, are a reconstruction.
pub fn motivating_network() -> Network {
    Network::new(
        vec![
            EdgeNode::new(0, 200.0, 12.0),
            EdgeNode::new(1, 10.0, 1.0),
            EdgeNode::new(2, 10.0, 1.0),
            EdgeNode::new(3, 20.0, 4.0),
            EdgeNode::new(4, 10.0, 1.0),
        ],
        vec![
            Link::new(3, 1, 10.0),
            Link::new(1, 0, 12.0),
            Link::new(3, 2, 6.0),
            Link::new(2, 0, 8.0),
            Link::new(2, 4, 4.0),
            Link::new(4, 0, 4.0),
        ],
    )
    .expect("motivating network is valid")
}

/// Six-task job a..f with input 5, total workload 55 and total memory 11.
pub fn motivating_job() -> Job {
    Job::builder("motivating", 3, 5.0)
        .task("a", 1.0, 3.0)
        .task("b", 1.0, 2.0)
        .task("c", 1.0, 2.0)
        .task("d", 50.0, 2.0)
        .task("e", 1.0, 1.0)
        .task("f", 1.0, 1.0)
        .edge(0, 1, 2.0)
        .edge(0, 2, 1.0)
        .edge(1, 3, 0.5)
        .edge(2, 3, 0.5)
        .edge(3, 4, 0.5)
        .edge(4, 5, 0.5)
        .build()
        .expect("motivating job is valid")
}

pub fn build_motivating_scenario() -> ScenarioConfig {
    ScenarioConfig {
        name: "motivating".into(),
        seed: 0,
        network: NetworkSpec::Inline(motivating_network().to_doc()),
        jobs: JobsSpec::Explicit(vec![JobEntry::Inline(JobDoc::from_job(&motivating_job()))]),
        scheduler: SchedulerKind::Lr,
        k_paths: DEFAULT_PATH_BUDGET,
        max_wait: None,
    }
}

/// Throughput of the motivating job under four strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyThroughputs {
    /// Whole job on the most-free node, input over the default route.
    pub least_request: f64,
    /// Tasks split, flows on the shortest route sharing links equally.
    pub equal_share: f64,
    /// Same routes, rates proportional to volume.
    pub proportional: f64,
    /// Same placement, best routes found by exhaustive search.
    pub optimal_routing: f64,
}

pub fn motivating_strategies() -> Result<StrategyThroughputs> {
    let job = motivating_job();
    let base = motivating_network();

    let mut net = base.clone();
    let (alloc, lr_plan) = schedule_lr(&mut net, &job).map_err(|e| HarnessError::Config(e.to_string()))?;
    let least_request = job_period(&job, &base, &alloc.placement, &lr_plan.rates_for(&job.id))
        .map_err(|e| HarnessError::Config(e.to_string()))?
        .throughput;

    let mut net = base.clone();
    let split = allocate_tasks(&mut net, &job, DEFAULT_PATH_BUDGET).map_err(|e| HarnessError::Config(e.to_string()))?;
    let tp = |rates| {
        job_period(&job, &net, &split.placement, &rates)
            .map(|b| b.throughput)
            .map_err(|e| HarnessError::Config(e.to_string()))
    };
    let equal = equal_share_plan(&net, &split.flows)?;
    let shortest = split
        .flows
        .iter()
        .map(|f| Ok(enumerate_usable_paths(&net, f.src, f.dst, 1, CAPACITY_EPS)?.remove(0)))
        .collect::<Result<Vec<_>>>()?;
    let proportional = allocate_bandwidth(&net, &split.flows, &shortest)?;
    let optimal = oracle_best_plan(&net, &split.flows)?;
    Ok(StrategyThroughputs {
        least_request,
        equal_share: tp(equal.rates_for(&job.id))?,
        proportional: tp(proportional.rates_for(&job.id))?,
        optimal_routing: tp(optimal.rates_for(&job.id))?,
    })
}

// ---------------------------------------------------------------------------
// Oracle comparison

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub job: String,
    pub flows: usize,
    pub lp_bound: Option<f64>,
    pub oracle_period: Option<f64>,
    pub jrba_period: Option<f64>,
    pub note: String,
    /// Text dump of the relaxed routing program, when one was built.
    #[serde(skip)]
    pub program: Option<String>,
}

pub const ORACLE_HEADER: &str = "job,flows,lp_bound,oracle_period,jrba_period,gap,note";

impl OracleRow {
    pub fn gap(&self) -> Option<f64> {
        match (self.oracle_period, self.jrba_period) {
            (Some(o), Some(j)) if o > 0.0 => Some(j / o - 1.0),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        }
    }

    pub fn csv_line(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.job,
            self.flows,
            f(self.lp_bound),
            f(self.oracle_period),
            f(self.jrba_period),
            f(self.gap()),
            self.note
        )
    }
}

/// Places each job alone on the idle network and compares the rounded plan
/// with the exhaustive optimum. Instances beyond the oracle's size are noted
/// and skipped.
pub fn oracle_report(config: &ScenarioConfig, base: &Path) -> Result<Vec<OracleRow>> {
    let instance = config.instantiate(base)?;
    let mut rows = Vec::new();
    for job in &instance.jobs {
        let mut net = instance.network.clone();
        let mut row = OracleRow {
            job: job.id.clone(),
            flows: 0,
            lp_bound: None,
            oracle_period: None,
            jrba_period: None,
            note: String::new(),
            program: None,
        };
        let alloc = match allocate_tasks(&mut net, job, config.k_paths) {
            Ok(a) => a,
            Err(e) => {
                row.note = format!("unplaceable: {e}");
                rows.push(row);
                continue;
            }
        };
        row.flows = alloc.flows.len();
        if let Ok(pathsets) = candidate_paths(&net, &alloc.flows, config.k_paths) {
            if let Ok((lp, _)) = build_relaxed_lp(&net, &alloc.flows, &pathsets) {
                row.program = Some(lp.to_string());
            }
        }
        if net.node_count() > DEFAULT_ORACLE_NODE_CAP || alloc.flows.len() > crate::jrba::ORACLE_FLOW_CAP {
            row.note = "skipped: too large for exhaustive search".into();
            rows.push(row);
            continue;
        }
        match (plan(&net, &alloc.flows, config.k_paths), oracle_best_plan(&net, &alloc.flows)) {
            (Ok(p), Ok(o)) => {
                row.lp_bound = p.lp_bound;
                row.jrba_period = Some(p.period);
                row.oracle_period = Some(o.period);
                row.note = "ok".into();
            }
            (Err(e), _) | (_, Err(e)) => row.note = format!("infeasible: {e}"),
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn render_oracle_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from(ORACLE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Validation

/// Checks a network, job, scenario or sweep document and returns its kind.
/// Scenarios are fully instantiated, so referenced files must exist.
pub fn validate_document(path: &Path) -> Result<&'static str> {
    let text = read_file(path)?;
    let value: Value = parse_json(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let has = |k: &str| value.get(k).is_some();
    if has("axis") {
        let sweep = SweepConfig::from_json(&text)?;
        let (base, scenario_dir) = sweep.base_scenario(dir)?;
        for &v in &sweep.values {
            apply_axis(&base, sweep.axis, v)?.instantiate(&scenario_dir)?;
        }
        Ok("sweep")
    } else if has("seed") && has("network") {
        ScenarioConfig::from_json(&text)?.instantiate(dir)?;
        Ok("scenario")
    } else if has("tasks") {
        parse_job_config(&text)?;
        Ok("job")
    } else if has("nodes") && has("links") {
        Network::from_json(&text)?;
        Ok("network")
    } else {
        Err(HarnessError::Config("unrecognised document: expected a network, job, scenario or sweep".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(tp: f64, wait: f64) -> JobRecord {
        JobRecord {
            job: "j".into(),
            arrival: 0.0,
            scheduled: Some(wait),
            finish: Some(wait + 10.0),
            history: vec![(wait, tp)],
            remaining_batches: 0.0,
            stream_length: 10,
            dropped: false,
        }
    }

    #[test]
    fn metrics_are_arithmetic_means() {
        let one = compute_metrics(&[record(2.0, 0.0)]).unwrap();
        assert_eq!((one.avg_throughput, one.avg_wait_s), (2.0, 0.0));
        let two = compute_metrics(&[record(2.0, 0.0), record(4.0, 1.0)]).unwrap();
        assert_eq!((two.avg_throughput, two.avg_wait_s), (3.0, 0.5));
        assert!(matches!(compute_metrics(&[]), Err(HarnessError::EmptyRecordSet)));
    }

    #[test]
    fn time_weighted_throughput() {
        // TP 2 for the first 5 batches (2.5 s), TP 1 for the last 5 (5 s).
        let mut r = record(2.0, 0.0);
        r.history = vec![(0.0, 2.0), (2.5, 1.0)];
        r.finish = Some(7.5);
        let m = compute_metrics(&[r]).unwrap();
        assert!((m.avg_throughput - (2.0 * 2.5 + 5.0) / 7.5).abs() < 1e-12);
    }

    #[test]
    fn pipeline_template_shape() {
        let job = attribute_recognition_job("p", 0, &PipelineParams::default()).unwrap();
        assert_eq!(job.task_count(), 10);
        assert_eq!(job.roots(), vec![0]);
        assert_eq!(job.edges.len(), 1 + 7 + 7);
    }

    #[test]
    fn motivating_instance_matches_prose() {
        let job = motivating_job();
        assert_eq!(job.input_size, 5.0);
        assert_eq!(job.tasks.iter().map(|t| t.workload).sum::<f64>(), 55.0);
        assert_eq!(job.total_memory(), 11.0);
        let net = motivating_network();
        assert_eq!(net.node(0).compute_power, 200.0);
        assert_eq!(job.source_node, 3);
    }

    #[test]
    fn motivating_strategies_reproduce() {
        let s = motivating_strategies().unwrap();
        assert!((s.least_request - 2.0).abs() < 1e-9);
        assert!((s.equal_share - 2.5).abs() < 1e-9);
        assert!((s.proportional - 10.0 / 3.0).abs() < 1e-9);
        assert!((s.optimal_routing - 4.0).abs() < 1e-9);
    }

    #[test]
    fn scenario_json_round_trip() {
        let cfg = build_motivating_scenario();
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let inst = back.instantiate(Path::new(".")).unwrap();
        assert_eq!(inst.jobs[0], motivating_job());
    }

    #[test]
    fn csv_row_formatting() {
        let row = MetricsRow {
            scenario: "s".into(),
            seed: 1,
            scheduler: SchedulerKind::Otfa,
            nodes: 5,
            jobs: 1,
            bw_mean: 8.0,
            avg_throughput: 2.0,
            avg_wait_s: 0.0,
            runtime_ms: None,
        };
        assert_eq!(row.csv_line(), "s,1,otfa,5,1,8.000000,2.000000,0.000000,");
    }

    #[test]
    fn error_kind_names_the_variant() {
        let e: HarnessError = JobError::CycleDetected { task: "a".into() }.into();
        assert_eq!(e.kind(), "CycleDetected");
        assert_eq!(HarnessError::EmptyRecordSet.kind(), "EmptyRecordSet");
    }
}
