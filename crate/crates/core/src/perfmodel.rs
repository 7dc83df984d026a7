//! Period and throughput of a placed streaming job.
//!
//! A job runs as a pipeline: every task and every cross-node transfer handles
//! one batch per period, so the period is the slowest of those stages and the
//! throughput is its reciprocal.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jobgraph::{Job, Task, TaskId};
use crate::topology::{EdgeNode, Network, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerfError {
    #[error("transfer {flow} has volume {volume} but no bandwidth")]
    ZeroRate { flow: FlowKey, volume: f64 },
    #[error("no rate supplied for transfer {flow}")]
    MissingRate { flow: FlowKey },
    #[error("placement covers {placed} tasks but the job has {tasks}")]
    IncompletePlacement { placed: usize, tasks: usize },
}

/// Identifies one data transfer of a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowKey {
    /// Raw input from the job's source node to the node at `dst`.
    Input { dst: NodeId },
    /// Intermediate data between two dependent tasks.
    Dep { from: TaskId, to: TaskId },
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowKey::Input { dst } => write!(f, "input->n{dst}"),
            FlowKey::Dep { from, to } => write!(f, "t{from}->t{to}"),
        }
    }
}

/// Task-to-node assignment of one job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub assignment: Vec<NodeId>,
}

impl Placement {
    pub fn new(assignment: Vec<NodeId>) -> Self {
        Self { assignment }
    }

    /// Every task on `node`.
    pub fn colocated(tasks: usize, node: NodeId) -> Self {
        Self::new(vec![node; tasks])
    }

    pub fn node_of(&self, task: TaskId) -> NodeId {
        self.assignment[task]
    }

    /// Indicator form: 1 when `task` runs on `node`.
    pub fn indicator(&self, task: TaskId, node: NodeId) -> u8 {
        u8::from(self.assignment[task] == node)
    }
}

/// A transfer that must cross the network under some placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub key: FlowKey,
    pub src: NodeId,
    pub dst: NodeId,
    pub volume: f64,
}

/// Cross-node transfers implied by a placement, in a fixed order: input
/// transfers by destination node, then dependencies in edge order.
///
/// Roots sharing a node receive the raw input once; with an explicit input
/// split their shares add up instead. Zero-volume transfers are dropped.
pub fn cross_node_transfers(job: &Job, placement: &Placement) -> Vec<Transfer> {
    let mut inputs: BTreeMap<NodeId, f64> = BTreeMap::new();
    for root in job.roots() {
        let dst = placement.node_of(root);
        if dst == job.source_node {
            continue;
        }
        let share = job.input_volume(root);
        let entry = inputs.entry(dst).or_insert(0.0);
        *entry = if job.input_split.is_some() {
            *entry + share
        } else {
            entry.max(share)
        };
    }
    let mut out: Vec<Transfer> = inputs
        .into_iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(dst, volume)| Transfer {
            key: FlowKey::Input { dst },
            src: job.source_node,
            dst,
            volume,
        })
        .collect();
    for e in &job.edges {
        let (src, dst) = (placement.node_of(e.from), placement.node_of(e.to));
        if src != dst && e.volume > 0.0 {
            out.push(Transfer {
                key: FlowKey::Dep { from: e.from, to: e.to },
                src,
                dst,
                volume: e.volume,
            });
        }
    }
    out
}

/// Seconds to process one batch of `task` on `node`.
pub fn compute_time(task: &Task, node: &EdgeNode) -> f64 {
    task.workload / node.compute_power
}

/// Seconds to move `volume` at `rate`; zero volume costs nothing.
pub fn comm_time(volume: f64, rate: f64) -> Result<f64, PerfError> {
    comm_time_for(FlowKey::Input { dst: 0 }, volume, rate)
}

fn comm_time_for(flow: FlowKey, volume: f64, rate: f64) -> Result<f64, PerfError> {
    if volume == 0.0 {
        return Ok(0.0);
    }
    if !(rate > 0.0) {
        return Err(PerfError::ZeroRate { flow, volume });
    }
    Ok(volume / rate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodBreakdown {
    pub compute: Vec<f64>,
    pub comm: Vec<(FlowKey, f64)>,
    pub period: f64,
    pub throughput: f64,
}

/// Period and throughput of `job` under `placement` with the given transfer rates.
pub fn job_period(
    job: &Job,
    net: &Network,
    placement: &Placement,
    rates: &BTreeMap<FlowKey, f64>,
) -> Result<PeriodBreakdown, PerfError> {
    if placement.assignment.len() != job.task_count() {
        return Err(PerfError::IncompletePlacement {
            placed: placement.assignment.len(),
            tasks: job.task_count(),
        });
    }
    let compute: Vec<f64> = job
        .tasks
        .iter()
        .map(|t| compute_time(t, net.node(placement.node_of(t.id))))
        .collect();
    let mut comm = Vec::new();
    for tr in cross_node_transfers(job, placement) {
        let rate = *rates.get(&tr.key).ok_or(PerfError::MissingRate { flow: tr.key })?;
        comm.push((tr.key, comm_time_for(tr.key, tr.volume, rate)?));
    }
    let period = compute
        .iter()
        .copied()
        .chain(comm.iter().map(|(_, t)| *t))
        .fold(0.0, f64::max);
    Ok(PeriodBreakdown {
        compute,
        comm,
        period,
        throughput: throughput_of(period),
    })
}

/// Reciprocal of a period; an empty pipeline has unbounded throughput.
pub fn throughput_of(period: f64) -> f64 {
    if period > 0.0 {
        1.0 / period
    } else {
        f64::INFINITY
    }
}
