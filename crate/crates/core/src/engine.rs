//! Event-driven online scheduling.
//!
//! Time jumps between arrival and completion instants. At each instant the
//! resources of finished jobs are released, new arrivals join the waiting
//! queue, and waiting jobs are retried oldest first. OTFS places and routes
//! each job against residual resources; OTFA places jobs first and then
//! re-plans the routes and rates of every running flow at once.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{allocate_tasks_cached, Allocation, RouteCache};
use crate::baselines::{schedule_br, schedule_lr, schedule_tp_cached, ScheduleError};
use crate::jobgraph::Job;
use crate::jrba::{jrba, policy_document, FlowPlan, PlannedFlow};
use crate::perfmodel::{job_period, throughput_of, Placement};
use crate::topology::{Network, TopologyError, CAPACITY_EPS, DEFAULT_PATH_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Lr,
    Br,
    Tp,
    Otfs,
    Otfa,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 5] = [Self::Lr, Self::Br, Self::Tp, Self::Otfs, Self::Otfa];

    pub fn name(self) -> &'static str {
        match self {
            Self::Lr => "lr",
            Self::Br => "br",
            Self::Tp => "tp",
            Self::Otfs => "otfs",
            Self::Otfa => "otfa",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown scheduler {s:?} (expected lr|br|tp|otfs|otfa)"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("duplicate job id {0}")]
    DuplicateJob(String),
    #[error("job {job} has source node {node} outside the network")]
    UnknownSource { job: String, node: usize },
    #[error("internal scheduler error: {0}")]
    Internal(String),
    #[error("invalid arrival parameters: {0}")]
    InvalidArrivals(String),
}

impl From<TopologyError> for EngineError {
    fn from(e: TopologyError) -> Self {
        EngineError::Internal(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub scheduler: SchedulerKind,
    pub k_paths: usize,
    /// Jobs waiting longer than this are dropped; `None` keeps them forever.
    pub max_wait: Option<f64>,
    pub log_events: bool,
}

impl EngineConfig {
    pub fn new(scheduler: SchedulerKind) -> Self {
        Self {
            scheduler,
            k_paths: DEFAULT_PATH_BUDGET,
            max_wait: None,
            log_events: false,
        }
    }
}

/// Outcome of one job.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobRecord {
    pub job: String,
    pub arrival: f64,
    pub scheduled: Option<f64>,
    pub finish: Option<f64>,
    /// Throughput in effect from each listed instant on.
    pub history: Vec<(f64, f64)>,
    pub remaining_batches: f64,
    pub stream_length: u64,
    pub dropped: bool,
}

impl JobRecord {
    /// Scheduling delay; unscheduled jobs count until `end`.
    pub fn waiting_time(&self, end: f64) -> f64 {
        self.scheduled.unwrap_or(end) - self.arrival
    }

    /// Time-weighted mean throughput over the run; 0 if never scheduled.
    pub fn achieved_throughput(&self) -> f64 {
        let (Some(start), Some(last)) = (self.scheduled, self.history.last()) else {
            return 0.0;
        };
        let end = self.finish.unwrap_or(start);
        if end <= start {
            return last.1;
        }
        let mut area = 0.0;
        for (i, &(from, tp)) in self.history.iter().enumerate() {
            let to = self.history.get(i + 1).map_or(end, |h| h.0).min(end);
            if to > from {
                area += tp * (to - from);
            }
        }
        area / (end - start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeDelta {
    pub node: usize,
    pub mem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkDelta {
    pub link: usize,
    pub rate: f64,
}

/// One line of the JSON-lines event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub t: f64,
    pub event: &'static str,
    pub job: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeDelta>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkDelta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

pub fn render_event_log(entries: &[LogEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("log entries serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Completion,
    Arrival,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    job: usize,
    version: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.job.cmp(&other.job))
            .then(self.version.cmp(&other.version))
    }
}

#[derive(Debug, Clone)]
pub struct RunningJob {
    pub placement: Placement,
    pub flows: Vec<PlannedFlow>,
    pub period: f64,
    pub remaining_batches: f64,
    pub start: f64,
    pub finish: f64,
    last_update: f64,
    version: u64,
}

impl RunningJob {
    fn advance(&mut self, now: f64) {
        if self.period > 0.0 && now > self.last_update {
            self.remaining_batches = (self.remaining_batches - (now - self.last_update) / self.period).max(0.0);
        }
        self.last_update = now;
    }
}

/// Queues, clock and pending events of one simulation.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    pub clock: f64,
    jobs: Vec<Job>,
    waiting: Vec<usize>,
    running: BTreeMap<usize, RunningJob>,
    events: BinaryHeap<Reverse<Event>>,
    records: Vec<JobRecord>,
    log: Vec<LogEntry>,
    policies: Vec<serde_json::Value>,
    config: EngineConfig,
}

impl SchedulerState {
    pub fn new(jobs: Vec<Job>, config: EngineConfig) -> Result<Self, EngineError> {
        let mut seen = std::collections::BTreeSet::new();
        for j in &jobs {
            if !seen.insert(j.id.clone()) {
                return Err(EngineError::DuplicateJob(j.id.clone()));
            }
        }
        let events = jobs
            .iter()
            .enumerate()
            .map(|(i, j)| {
                Reverse(Event {
                    time: j.arrival_time,
                    kind: EventKind::Arrival,
                    job: i,
                    version: 0,
                })
            })
            .collect();
        let records = jobs
            .iter()
            .map(|j| JobRecord {
                job: j.id.clone(),
                arrival: j.arrival_time,
                scheduled: None,
                finish: None,
                history: Vec::new(),
                remaining_batches: j.stream_length as f64,
                stream_length: j.stream_length,
                dropped: false,
            })
            .collect();
        Ok(Self {
            clock: 0.0,
            jobs,
            waiting: Vec::new(),
            running: BTreeMap::new(),
            events,
            records,
            log: Vec::new(),
            policies: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn waiting(&self) -> &[usize] {
        &self.waiting
    }

    pub fn running(&self) -> &BTreeMap<usize, RunningJob> {
        &self.running
    }

    pub fn records(&self) -> &[JobRecord] {
        &self.records
    }

    pub fn event_log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Policy documents of every scheduled job, in scheduling order
    /// (collected only when event logging is on).
    pub fn policies(&self) -> &[serde_json::Value] {
        &self.policies
    }

    pub fn has_pending_events(&self) -> bool {
        !self.events.is_empty()
    }

    /// Verifies that every link's allocation equals the rates of the running
    /// flows crossing it and that no capacity is exceeded.
    pub fn check_accounting(&self, net: &Network) -> Result<(), String> {
        let mut expected = vec![0.0; net.link_count()];
        for r in self.running.values() {
            for p in &r.flows {
                for &l in &p.path.links {
                    expected[l] += p.rate;
                }
            }
        }
        for (l, link) in net.links().iter().enumerate() {
            if (link.allocated - expected[l]).abs() > 1e-9 * link.capacity.max(1.0) {
                return Err(format!(
                    "link {l}: allocated {} but running flows sum to {}",
                    link.allocated, expected[l]
                ));
            }
            if link.allocated > link.capacity + CAPACITY_EPS {
                return Err(format!("link {l}: allocated {} exceeds capacity {}", link.allocated, link.capacity));
            }
        }
        for n in net.nodes() {
            if n.reserved() > n.mem_capacity + CAPACITY_EPS || n.mem_available < -CAPACITY_EPS {
                return Err(format!("node {}: memory over-reserved", n.id));
            }
        }
        Ok(())
    }

    fn push_log(&mut self, entry: LogEntry) {
        if self.config.log_events {
            self.log.push(entry);
        }
    }

    fn holdings(net: &Network, owner: &str) -> (Vec<NodeDelta>, Vec<LinkDelta>) {
        let nodes = (0..net.node_count())
            .filter_map(|n| {
                let mem = net.memory_hold(n, owner);
                (mem != 0.0).then_some(NodeDelta { node: n, mem })
            })
            .collect();
        let links = (0..net.link_count())
            .filter_map(|l| {
                let rate = net.bandwidth_hold(l, owner);
                (rate != 0.0).then_some(LinkDelta { link: l, rate })
            })
            .collect();
        (nodes, links)
    }

    /// Pops every event at the next instant, releasing finished jobs and
    /// queueing arrivals. Returns the number of events and whether any job finished.
    fn advance(&mut self, net: &mut Network) -> Result<Option<(usize, bool)>, EngineError> {
        let Some(Reverse(first)) = self.events.pop() else {
            return Ok(None);
        };
        let now = first.time;
        self.clock = now;
        let mut batch = vec![first];
        while let Some(Reverse(e)) = self.events.peek() {
            if e.time != now {
                break;
            }
            batch.push(self.events.pop().expect("peeked").0);
        }
        let mut finished = false;
        for e in &batch {
            match e.kind {
                EventKind::Completion => {
                    let current = self.running.get(&e.job).is_some_and(|r| r.version == e.version);
                    if current {
                        self.complete(e.job, now, net)?;
                        finished = true;
                    }
                }
                EventKind::Arrival => {
                    let job = &self.jobs[e.job];
                    if job.source_node >= net.node_count() {
                        return Err(EngineError::UnknownSource {
                            job: job.id.clone(),
                            node: job.source_node,
                        });
                    }
                    self.waiting.push(e.job);
                    let entry = LogEntry {
                        t: now,
                        event: "arrival",
                        job: job.id.clone(),
                        nodes: vec![],
                        links: vec![],
                        period: None,
                    };
                    self.push_log(entry);
                }
            }
        }
        if let Some(cap) = self.config.max_wait {
            let jobs = &self.jobs;
            let (expired, kept): (Vec<usize>, Vec<usize>) =
                self.waiting.iter().partition(|&&i| now - jobs[i].arrival_time > cap);
            self.waiting = kept;
            for i in expired {
                self.records[i].dropped = true;
                let entry = LogEntry {
                    t: now,
                    event: "dropped",
                    job: self.jobs[i].id.clone(),
                    nodes: vec![],
                    links: vec![],
                    period: None,
                };
                self.push_log(entry);
            }
        }
        // Longest-waiting first; equal waits keep arrival order.
        let jobs = &self.jobs;
        self.waiting
            .sort_by(|&a, &b| jobs[a].arrival_time.total_cmp(&jobs[b].arrival_time).then(a.cmp(&b)));
        Ok(Some((batch.len(), finished)))
    }

    fn complete(&mut self, idx: usize, now: f64, net: &mut Network) -> Result<(), EngineError> {
        let mut run = self.running.remove(&idx).expect("completing a running job");
        run.advance(now);
        let id = self.jobs[idx].id.clone();
        let (nodes, links) = Self::holdings(net, &id);
        if net.holds_memory(&id) {
            net.release_memory(&id)?;
        }
        if net.holds_bandwidth(&id) {
            net.release_bandwidth(&id)?;
        }
        let rec = &mut self.records[idx];
        rec.finish = Some(now);
        rec.remaining_batches = 0.0;
        self.push_log(LogEntry {
            t: now,
            event: "completion",
            job: id,
            nodes: nodes.into_iter().map(|d| NodeDelta { node: d.node, mem: -d.mem }).collect(),
            links: links.into_iter().map(|d| LinkDelta { link: d.link, rate: -d.rate }).collect(),
            period: None,
        });
        Ok(())
    }

    fn period_of(&self, idx: usize, net: &Network, placement: &Placement, plan: &FlowPlan) -> Result<f64, EngineError> {
        let job = &self.jobs[idx];
        job_period(job, net, placement, &plan.rates_for(&job.id))
            .map(|b| b.period)
            .map_err(|e| EngineError::Internal(e.to_string()))
    }

    fn start(&mut self, idx: usize, now: f64, net: &Network, placement: Placement, plan: &FlowPlan) -> Result<(), EngineError> {
        let period = self.period_of(idx, net, &placement, plan)?;
        let job = &self.jobs[idx];
        if self.config.log_events {
            self.policies.push(policy_document(job, &placement, plan));
        }
        let remaining = job.stream_length as f64;
        let finish = now + remaining * period;
        let flows = plan.flows.iter().filter(|p| p.flow.job == job.id).cloned().collect();
        let (nodes, links) = Self::holdings(net, &job.id);
        let id = job.id.clone();
        self.running.insert(
            idx,
            RunningJob {
                placement,
                flows,
                period,
                remaining_batches: remaining,
                start: now,
                finish,
                last_update: now,
                version: 0,
            },
        );
        self.events.push(Reverse(Event {
            time: finish,
            kind: EventKind::Completion,
            job: idx,
            version: 0,
        }));
        let rec = &mut self.records[idx];
        rec.scheduled = Some(now);
        rec.history.push((now, throughput_of(period)));
        self.push_log(LogEntry {
            t: now,
            event: "scheduled",
            job: id,
            nodes,
            links,
            period: Some(period),
        });
        Ok(())
    }

    /// Processes the next instant with jobs scheduled one at a time by
    /// `kind` (any scheduler except OTFA).
    fn step_sequential(&mut self, net: &mut Network, kind: SchedulerKind) -> Result<usize, EngineError> {
        let Some((processed, _)) = self.advance(net)? else {
            return Ok(0);
        };
        let now = self.clock;
        let mut cache = RouteCache::new(self.config.k_paths);
        // Failed attempts leave the network untouched, so an identical job
        // would fail too until something is scheduled.
        let mut failed: Vec<usize> = Vec::new();
        let queue = std::mem::take(&mut self.waiting);
        for idx in queue {
            let job = &self.jobs[idx];
            if failed.iter().any(|&f| same_shape(&self.jobs[f], job)) {
                self.waiting.push(idx);
                continue;
            }
            let outcome: Result<(Allocation, FlowPlan), ScheduleError> = match kind {
                SchedulerKind::Lr => schedule_lr(net, job),
                SchedulerKind::Br => schedule_br(net, job),
                SchedulerKind::Tp => schedule_tp_cached(net, job, &mut cache),
                SchedulerKind::Otfs | SchedulerKind::Otfa => schedule_otfs_cached(net, job, &mut cache),
            };
            match outcome {
                Ok((alloc, plan)) => {
                    self.start(idx, now, net, alloc.placement, &plan)?;
                    cache.clear();
                    failed.clear();
                }
                Err(_) => {
                    self.waiting.push(idx);
                    failed.push(idx);
                }
            }
        }
        Ok(processed)
    }

    /// One OTFS instant: place and route each waiting job against the
    /// residual network.
    pub fn step_otfs(&mut self, net: &mut Network) -> Result<usize, EngineError> {
        self.step_sequential(net, SchedulerKind::Otfs)
    }

    /// One OTFA instant: place every schedulable waiting job, then re-plan
    /// routes and rates of all running and new flows over the full link
    /// capacities. Memory reservations and placements are never moved.
    pub fn step_otfa(&mut self, net: &mut Network) -> Result<usize, EngineError> {
        let Some((processed, finished)) = self.advance(net)? else {
            return Ok(0);
        };
        let now = self.clock;
        let k = self.config.k_paths;
        // Placement only reserves memory, so route estimates stay valid.
        let mut cache = RouteCache::new(k);
        let mut failed: Vec<usize> = Vec::new();
        let queue = std::mem::take(&mut self.waiting);
        let mut placed: Vec<(usize, Allocation)> = Vec::new();
        for idx in queue {
            let job = &self.jobs[idx];
            if failed.iter().any(|&f| same_shape(&self.jobs[f], job)) {
                self.waiting.push(idx);
                continue;
            }
            match allocate_tasks_cached(net, job, &mut cache) {
                Ok(alloc) => {
                    placed.push((idx, alloc));
                    failed.clear();
                }
                Err(_) => {
                    self.waiting.push(idx);
                    failed.push(idx);
                }
            }
        }
        if placed.is_empty() && !finished {
            return Ok(processed);
        }

        let mut before: BTreeMap<usize, Vec<LinkDelta>> = BTreeMap::new();
        let mut flows = Vec::new();
        for (&idx, run) in self.running.iter_mut() {
            run.advance(now);
            before.insert(idx, Self::holdings(net, &self.jobs[idx].id).1);
            flows.extend(run.flows.iter().map(|p| p.flow.clone()));
        }
        for (_, alloc) in &placed {
            flows.extend(alloc.flows.iter().cloned());
        }
        net.release_all_bandwidth();
        let plan = jrba(net, &flows, k).map_err(|e| EngineError::Internal(format!("global re-plan failed: {e}")))?;

        let running: Vec<usize> = self.running.keys().copied().collect();
        for idx in running {
            let placement = self.running[&idx].placement.clone();
            let period = self.period_of(idx, net, &placement, &plan)?;
            let job_id = self.jobs[idx].id.clone();
            let (_, after) = Self::holdings(net, &job_id);
            let run = self.running.get_mut(&idx).expect("running");
            run.flows = plan.flows.iter().filter(|p| p.flow.job == job_id).cloned().collect();
            if period == run.period {
                continue;
            }
            run.period = period;
            run.finish = now + run.remaining_batches * period;
            run.version += 1;
            let event = Event {
                time: run.finish,
                kind: EventKind::Completion,
                job: idx,
                version: run.version,
            };
            self.events.push(Reverse(event));
            self.records[idx].history.push((now, throughput_of(period)));
            let links = link_diff(&before[&idx], &after);
            self.push_log(LogEntry {
                t: now,
                event: "rate_change",
                job: job_id,
                nodes: vec![],
                links,
                period: Some(period),
            });
        }
        for (idx, alloc) in placed {
            self.start(idx, now, net, alloc.placement, &plan)?;
        }
        Ok(processed)
    }

    /// Advances to the next event instant using the configured scheduler.
    /// Returns 0 once no events remain.
    pub fn step(&mut self, net: &mut Network) -> Result<usize, EngineError> {
        match self.config.scheduler {
            SchedulerKind::Otfa => self.step_otfa(net),
            kind => self.step_sequential(net, kind),
        }
    }
}

fn link_diff(before: &[LinkDelta], after: &[LinkDelta]) -> Vec<LinkDelta> {
    let mut delta: BTreeMap<usize, f64> = BTreeMap::new();
    for d in before {
        *delta.entry(d.link).or_insert(0.0) -= d.rate;
    }
    for d in after {
        *delta.entry(d.link).or_insert(0.0) += d.rate;
    }
    delta
        .into_iter()
        .filter(|(_, r)| *r != 0.0)
        .map(|(link, rate)| LinkDelta { link, rate })
        .collect()
}

/// Same tasks, dependencies, input and source node.
fn same_shape(a: &Job, b: &Job) -> bool {
    a.source_node == b.source_node
        && a.input_size == b.input_size
        && a.tasks == b.tasks
        && a.edges == b.edges
        && a.input_split == b.input_split
}

/// OTFS treatment of one job: greedy placement, then routing and bandwidth
/// against the residual network. Memory is returned if routing fails.
pub fn schedule_otfs(net: &mut Network, job: &Job, k: usize) -> Result<(Allocation, FlowPlan), ScheduleError> {
    schedule_otfs_cached(net, job, &mut RouteCache::new(k))
}

fn schedule_otfs_cached(net: &mut Network, job: &Job, cache: &mut RouteCache) -> Result<(Allocation, FlowPlan), ScheduleError> {
    let k = cache.k();
    let alloc = allocate_tasks_cached(net, job, cache)?;
    match jrba(net, &alloc.flows, k) {
        Ok(plan) => Ok((alloc, plan)),
        Err(e) => {
            net.release_memory(&job.id)?;
            Err(e.into())
        }
    }
}

/// Runs until no events remain and returns one record per job.
pub fn run_to_completion(state: &mut SchedulerState, net: &mut Network) -> Result<Vec<JobRecord>, EngineError> {
    run_to_completion_with(state, net, |_, _| {})
}

/// Like [`run_to_completion`], calling `observe` after every instant.
pub fn run_to_completion_with(
    state: &mut SchedulerState,
    net: &mut Network,
    mut observe: impl FnMut(&SchedulerState, &Network),
) -> Result<Vec<JobRecord>, EngineError> {
    while state.step(net)? > 0 {
        observe(state, net);
    }
    Ok(state.records.clone())
}

/// Poisson arrivals: `n_jobs` copies of randomly chosen templates with
/// exponential inter-arrival times of rate `lambda` and uniformly random
/// source nodes among `node_count`.
pub fn generate_arrivals(
    templates: &[Job],
    n_jobs: usize,
    lambda: f64,
    node_count: usize,
    seed: u64,
) -> Result<Vec<Job>, EngineError> {
    if templates.is_empty() {
        return Err(EngineError::InvalidArrivals("no job templates".into()));
    }
    if node_count == 0 {
        return Err(EngineError::InvalidArrivals("no nodes".into()));
    }
    let exp = Exp::new(lambda).map_err(|e| EngineError::InvalidArrivals(format!("lambda {lambda}: {e}")))?;
    if !(lambda > 0.0) {
        return Err(EngineError::InvalidArrivals(format!("lambda {lambda}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0;
    let mut jobs = Vec::with_capacity(n_jobs);
    for i in 0..n_jobs {
        t += exp.sample(&mut rng);
        let template = &templates[rng.random_range(0..templates.len())];
        let mut job = template.clone();
        job.id = format!("job{i:04}");
        job.arrival_time = t;
        job.source_node = rng.random_range(0..node_count);
        jobs.push(job);
    }
    Ok(jobs)
}
