//! Streaming jobs as task DAGs, and the JSON job-configuration format.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{NodeClass, NodeId};

pub type TaskId = usize;

/// Batches processed by a job when its config does not say otherwise.
pub const DEFAULT_STREAM_LENGTH: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JobError {
    #[error("malformed job document: {0}")]
    Json(String),
    #[error("missing field `{field}`{}", task_suffix(.task))]
    MissingField { task: Option<String>, field: String },
    #[error("invalid value {value:?} for `{field}`{}", task_suffix(.task))]
    InvalidValue {
        task: Option<String>,
        field: String,
        value: String,
    },
    #[error("duplicate task id {task}")]
    DuplicateTask { task: String },
    #[error("task {task} lists unknown downstream task {downstream}")]
    UnknownDownstreamTask { task: String, downstream: String },
    #[error("dependency cycle through task {task}")]
    CycleDetected { task: String },
    #[error("unknown task {task}")]
    UnknownTask { task: TaskId },
    #[error("job has no tasks")]
    NoTasks,
}

fn task_suffix(task: &Option<String>) -> String {
    task.as_ref().map(|t| format!(" in task {t}")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, JobError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub name: String,
    /// Work-units per input batch.
    pub workload: f64,
    pub mem_demand: f64,
}

/// Data dependency `from -> to` carrying `volume` data-units per batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Dependency {
    pub from: TaskId,
    pub to: TaskId,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: String,
    pub tasks: Vec<Task>,
    pub edges: Vec<Dependency>,
    /// Node where the raw input stream originates.
    pub source_node: NodeId,
    /// Data-units per batch delivered from the source to each root task.
    pub input_size: f64,
    pub arrival_time: f64,
    pub stream_length: u64,
    pub total_memory_request: Option<f64>,
    /// Per-root share of the input; `None` sends the full input to every root.
    pub input_split: Option<BTreeMap<TaskId, f64>>,
}

impl Job {
    pub fn builder(id: &str, source_node: NodeId, input_size: f64) -> JobBuilder {
        JobBuilder {
            job: Job {
                id: id.to_string(),
                tasks: Vec::new(),
                edges: Vec::new(),
                source_node,
                input_size,
                arrival_time: 0.0,
                stream_length: DEFAULT_STREAM_LENGTH,
                total_memory_request: None,
                input_split: None,
            },
        }
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn total_memory(&self) -> f64 {
        self.tasks.iter().map(|t| t.mem_demand).sum()
    }

    pub fn task_by_name(&self, name: &str) -> Option<TaskId> {
        self.tasks.iter().position(|t| t.name == name)
    }

    /// Tasks without predecessors; they consume the source input.
    pub fn roots(&self) -> Vec<TaskId> {
        let mut has_pred = vec![false; self.tasks.len()];
        for e in &self.edges {
            has_pred[e.to] = true;
        }
        (0..self.tasks.len()).filter(|&t| !has_pred[t]).collect()
    }

    /// Input volume delivered to root task `root` per batch.
    pub fn input_volume(&self, root: TaskId) -> f64 {
        match &self.input_split {
            Some(split) => split.get(&root).copied().unwrap_or(0.0),
            None => self.input_size,
        }
    }

    /// Advisory checks that do not invalidate the job.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(declared) = self.total_memory_request {
            let sum = self.total_memory();
            if (declared - sum).abs() > 1e-9 * declared.abs().max(1.0) {
                out.push(format!(
                    "job {}: total_memory_request {declared} differs from task sum {sum}",
                    self.id
                ));
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(JobError::NoTasks);
        }
        for t in &self.tasks {
            for (field, value) in [("workload", t.workload), ("memory_resource", t.mem_demand)] {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(JobError::InvalidValue {
                        task: Some(t.name.clone()),
                        field: field.into(),
                        value: value.to_string(),
                    });
                }
            }
        }
        for e in &self.edges {
            if e.from >= self.tasks.len() || e.to >= self.tasks.len() {
                return Err(JobError::UnknownTask {
                    task: e.from.max(e.to),
                });
            }
            if !(e.volume >= 0.0) || !e.volume.is_finite() {
                return Err(JobError::InvalidValue {
                    task: Some(self.tasks[e.from].name.clone()),
                    field: "output_size".into(),
                    value: e.volume.to_string(),
                });
            }
        }
        if !(self.input_size >= 0.0) || !self.input_size.is_finite() {
            return Err(JobError::InvalidValue {
                task: None,
                field: "input_size".into(),
                value: self.input_size.to_string(),
            });
        }
        if self.stream_length == 0 {
            return Err(JobError::InvalidValue {
                task: None,
                field: "stream_length".into(),
                value: "0".into(),
            });
        }
        kahn(self).map(|_| ())
    }
}

pub struct JobBuilder {
    job: Job,
}

impl JobBuilder {
    pub fn task(mut self, name: &str, workload: f64, mem_demand: f64) -> Self {
        let id = self.job.tasks.len();
        self.job.tasks.push(Task {
            id,
            name: name.to_string(),
            workload,
            mem_demand,
        });
        self
    }

    pub fn edge(mut self, from: TaskId, to: TaskId, volume: f64) -> Self {
        self.job.edges.push(Dependency { from, to, volume });
        self
    }

    pub fn arrival(mut self, t: f64) -> Self {
        self.job.arrival_time = t;
        self
    }

    pub fn stream_length(mut self, n: u64) -> Self {
        self.job.stream_length = n;
        self
    }

    pub fn build(self) -> Result<Job> {
        self.job.validate()?;
        Ok(self.job)
    }
}

fn kahn(job: &Job) -> Result<Vec<TaskId>> {
    let n = job.tasks.len();
    let mut indegree = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for e in &job.edges {
        indegree[e.to] += 1;
        succ[e.from].push(e.to);
    }
    let mut ready: BinaryHeap<Reverse<TaskId>> = (0..n).filter(|&t| indegree[t] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(t)) = ready.pop() {
        order.push(t);
        for &s in &succ[t] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push(Reverse(s));
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&t| indegree[t] > 0).expect("some task is stuck");
        return Err(JobError::CycleDetected {
            task: job.tasks[stuck].name.clone(),
        });
    }
    Ok(order)
}

/// Kahn topological order, ties broken by ascending task id.
pub fn topological_order(job: &Job) -> Vec<TaskId> {
    kahn(job).expect("validated jobs are acyclic")
}

/// Direct predecessors of `task`, ascending.
pub fn predecessors(job: &Job, task: TaskId) -> Result<Vec<TaskId>> {
    if task >= job.tasks.len() {
        return Err(JobError::UnknownTask { task });
    }
    let mut out: Vec<TaskId> = job.edges.iter().filter(|e| e.to == task).map(|e| e.from).collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Direct successors of `task`, ascending.
pub fn successors(job: &Job, task: TaskId) -> Result<Vec<TaskId>> {
    if task >= job.tasks.len() {
        return Err(JobError::UnknownTask { task });
    }
    let mut out: Vec<TaskId> = job.edges.iter().filter(|e| e.from == task).map(|e| e.to).collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Simulated offline profile: execution time of every task on every device class.
#[derive(Debug, Clone, PartialEq)]
pub struct JobProfile {
    pub classes: Vec<String>,
    /// `times[task][class]` in seconds per batch.
    pub times: Vec<Vec<f64>>,
}

impl JobProfile {
    pub fn build(job: &Job, classes: &[NodeClass]) -> Self {
        Self {
            classes: classes.iter().map(|c| c.name.clone()).collect(),
            times: job
                .tasks
                .iter()
                .map(|t| classes.iter().map(|c| t.workload / c.power).collect())
                .collect(),
        }
    }

    pub fn time(&self, task: TaskId, class: usize) -> f64 {
        self.times[task][class]
    }
}

// ---------------------------------------------------------------------------
// JSON configuration

/// Numbers may be written bare or as strings with a unit suffix ("2GB", "10").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    fn value(&self) -> Option<f64> {
        match self {
            Quantity::Number(v) => Some(*v),
            Quantity::Text(s) => {
                let s = s.trim();
                let end = s
                    .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+' || c == 'e'))
                    .unwrap_or(s.len());
                s[..end].parse().ok()
            }
        }
    }
}

/// Downstream lists may be a JSON array or a bracketed string like `"['task1','task2']"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Downstream {
    List(Vec<String>),
    Text(String),
}

impl Downstream {
    fn names(&self) -> Vec<String> {
        match self {
            Downstream::List(v) => v.clone(),
            Downstream::Text(s) => s
                .split(|c: char| c == ',' || c.is_whitespace())
                .map(|p| p.trim_matches(|c: char| matches!(c, '[' | ']' | '\'' | '"')))
                .filter(|p| !p.is_empty())
                .map(str::to_string)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downstream: Option<Downstream>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_resource: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_size: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_memory_request: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_size: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_length: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_split: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<Vec<TaskDoc>>,
}

fn require<T>(value: Option<T>, task: Option<&str>, field: &str) -> Result<T> {
    value.ok_or_else(|| JobError::MissingField {
        task: task.map(str::to_string),
        field: field.to_string(),
    })
}

fn quantity(q: Option<&Quantity>, task: Option<&str>, field: &str) -> Result<f64> {
    let q = require(q, task, field)?;
    q.value().ok_or_else(|| JobError::InvalidValue {
        task: task.map(str::to_string),
        field: field.to_string(),
        value: format!("{q:?}"),
    })
}

impl JobDoc {
    pub fn into_job(self) -> Result<Job> {
        let name = require(self.job, None, "job")?;
        let source_node = require(self.source, None, "source")?;
        let input_size = quantity(self.input_size.as_ref(), None, "input_size")?;
        let docs = require(self.tasks, None, "tasks")?;

        let mut builder = Job::builder(&name, source_node, input_size);
        let mut ids: BTreeMap<String, TaskId> = BTreeMap::new();
        for (index, doc) in docs.iter().enumerate() {
            let task_name = require(doc.id.clone(), None, "id")?;
            if ids.insert(task_name.clone(), index).is_some() {
                return Err(JobError::DuplicateTask { task: task_name });
            }
            let mem = quantity(doc.memory_resource.as_ref(), Some(&task_name), "memory_resource")?;
            let work = quantity(doc.workload.as_ref(), Some(&task_name), "workload")?;
            builder = builder.task(&task_name, work, mem);
        }
        for doc in &docs {
            let task_name = doc.id.as_deref().expect("checked above");
            let from = ids[task_name];
            for down in doc.downstream.as_ref().map(Downstream::names).unwrap_or_default() {
                let to = *ids.get(&down).ok_or_else(|| JobError::UnknownDownstreamTask {
                    task: task_name.to_string(),
                    downstream: down.clone(),
                })?;
                let volume = doc
                    .output_size
                    .as_ref()
                    .and_then(|m| m.get(&down))
                    .copied()
                    .ok_or_else(|| JobError::MissingField {
                        task: Some(task_name.to_string()),
                        field: format!("output_size.{down}"),
                    })?;
                builder = builder.edge(from, to, volume);
            }
        }
        let mut job = builder.job;
        job.arrival_time = self.arrival_time.unwrap_or(0.0);
        job.stream_length = self.stream_length.unwrap_or(DEFAULT_STREAM_LENGTH);
        job.total_memory_request = match &self.total_memory_request {
            Some(q) => Some(quantity(Some(q), None, "total_memory_request")?),
            None => None,
        };
        if let Some(split) = self.input_split {
            let mut by_id = BTreeMap::new();
            for (task, share) in split {
                let id = *ids.get(&task).ok_or_else(|| JobError::InvalidValue {
                    task: None,
                    field: "input_split".into(),
                    value: task.clone(),
                })?;
                by_id.insert(id, share);
            }
            job.input_split = Some(by_id);
        }
        job.validate()?;
        Ok(job)
    }

    pub fn from_job(job: &Job) -> Self {
        let tasks = job
            .tasks
            .iter()
            .map(|t| {
                let outgoing: Vec<&Dependency> = job.edges.iter().filter(|e| e.from == t.id).collect();
                TaskDoc {
                    id: Some(t.name.clone()),
                    downstream: Some(Downstream::List(
                        outgoing.iter().map(|e| job.tasks[e.to].name.clone()).collect(),
                    )),
                    memory_resource: Some(Quantity::Number(t.mem_demand)),
                    workload: Some(Quantity::Number(t.workload)),
                    output_size: Some(
                        outgoing
                            .iter()
                            .map(|e| (job.tasks[e.to].name.clone(), e.volume))
                            .collect(),
                    ),
                }
            })
            .collect();
        JobDoc {
            job: Some(job.id.clone()),
            total_memory_request: job.total_memory_request.map(Quantity::Number),
            source: Some(job.source_node),
            input_size: Some(Quantity::Number(job.input_size)),
            arrival_time: Some(job.arrival_time),
            stream_length: Some(job.stream_length),
            input_split: job.input_split.as_ref().map(|s| {
                s.iter()
                    .map(|(id, share)| (job.tasks[*id].name.clone(), *share))
                    .collect()
            }),
            tasks: Some(tasks),
        }
    }
}

/// Parses and validates a job configuration document.
pub fn parse_job_config(text: &str) -> Result<Job> {
    let doc: JobDoc = serde_json::from_str(text).map_err(|e| JobError::Json(e.to_string()))?;
    doc.into_job()
}

pub fn render_job_config(job: &Job) -> String {
    serde_json::to_string_pretty(&JobDoc::from_job(job)).expect("job documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAMOND: &str = r#"{
        "job": "test", "total_memory_request": "8GB", "source": 0, "input_size": "10",
        "tasks": [
            {"id": "task0", "downstream": "['task1','task2']", "memory_resource": "2GB",
             "workload": 4, "output_size": {"task1": 3, "task2": 3}},
            {"id": "task1", "downstream": ["task3"], "memory_resource": "2GB",
             "workload": 6, "output_size": {"task3": 1}},
            {"id": "task2", "downstream": ["task3"], "memory_resource": "2GB",
             "workload": 6, "output_size": {"task3": 1}},
            {"id": "task3", "downstream": "", "memory_resource": "2GB", "workload": 2}
        ]
    }"#;

    #[test]
    fn parses_diamond_config() {
        let job = parse_job_config(DIAMOND).unwrap();
        assert_eq!(job.task_count(), 4);
        assert_eq!(job.edges.len(), 4);
        assert_eq!(job.total_memory(), 8.0);
        assert_eq!(job.input_size, 10.0);
        assert_eq!(job.stream_length, DEFAULT_STREAM_LENGTH);
        assert!(job.warnings().is_empty());
        assert_eq!(topological_order(&job), vec![0, 1, 2, 3]);
        assert_eq!(predecessors(&job, 3).unwrap(), vec![1, 2]);
        assert!(predecessors(&job, 0).unwrap().is_empty());
        assert_eq!(job.roots(), vec![0]);
    }

    #[test]
    fn single_task() {
        let job = parse_job_config(
            r#"{"job":"one","source":1,"input_size":2,"tasks":[{"id":"a","memory_resource":1,"workload":1}]}"#,
        )
        .unwrap();
        assert_eq!(job.task_count(), 1);
        assert!(job.edges.is_empty());
    }

    #[test]
    fn two_cycle_detected() {
        let text = r#"{"job":"c","source":0,"input_size":1,"tasks":[
            {"id":"task0","downstream":["task1"],"memory_resource":1,"workload":1,"output_size":{"task1":1}},
            {"id":"task1","downstream":["task0"],"memory_resource":1,"workload":1,"output_size":{"task0":1}}]}"#;
        assert!(matches!(parse_job_config(text), Err(JobError::CycleDetected { .. })));
    }

    #[test]
    fn errors_name_the_task() {
        let unknown = r#"{"job":"u","source":0,"input_size":1,"tasks":[
            {"id":"a","downstream":["zz"],"memory_resource":1,"workload":1,"output_size":{"zz":1}}]}"#;
        assert_eq!(
            parse_job_config(unknown).unwrap_err(),
            JobError::UnknownDownstreamTask {
                task: "a".into(),
                downstream: "zz".into()
            }
        );
        let missing = r#"{"job":"m","source":0,"input_size":1,"tasks":[{"id":"a","memory_resource":1}]}"#;
        assert_eq!(
            parse_job_config(missing).unwrap_err(),
            JobError::MissingField {
                task: Some("a".into()),
                field: "workload".into()
            }
        );
    }

    #[test]
    fn chain_order() {
        let job = Job::builder("chain", 0, 1.0)
            .task("t0", 1.0, 1.0)
            .task("t1", 1.0, 1.0)
            .task("t2", 1.0, 1.0)
            .edge(2, 1, 1.0)
            .edge(1, 0, 1.0)
            .build()
            .unwrap();
        assert_eq!(topological_order(&job), vec![2, 1, 0]);
    }

    #[test]
    fn memory_mismatch_is_a_warning() {
        let text = DIAMOND.replace("\"8GB\"", "\"9GB\"");
        let job = parse_job_config(&text).unwrap();
        assert_eq!(job.warnings().len(), 1);
    }

    #[test]
    fn profile_is_workload_over_power() {
        let job = parse_job_config(DIAMOND).unwrap();
        let classes = vec![NodeClass::new("slow", 2.0, 1.0, 1.0), NodeClass::new("fast", 8.0, 1.0, 1.0)];
        let profile = JobProfile::build(&job, &classes);
        assert_eq!(profile.time(1, 0), 3.0);
        assert_eq!(profile.time(1, 1), 0.75);
    }

    #[test]
    fn render_round_trips() {
        let job = parse_job_config(DIAMOND).unwrap();
        assert_eq!(parse_job_config(&render_job_config(&job)).unwrap(), job);
    }
}
