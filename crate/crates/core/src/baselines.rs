//! Comparison schedulers: whole-job placement on the least-requested node
//! (LR) or on the node that best balances memory use (BR), and greedy task
//! partitioning with shortest-path, equal-share networking (TP).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::allocator::{allocate_tasks_cached, derive_flows, reserve_placement, AllocError, Allocation, Flow, RouteCache};
use crate::jobgraph::Job;
use crate::jrba::{FlowPlan, JrbaError, PlannedFlow};
use crate::perfmodel::Placement;
use crate::topology::{enumerate_usable_paths, LinkId, Network, NodeId, TopologyError, CAPACITY_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Route(#[from] JrbaError),
}

impl From<TopologyError> for ScheduleError {
    fn from(e: TopologyError) -> Self {
        ScheduleError::Alloc(AllocError::Topology(e))
    }
}

fn whole_job_candidates(net: &Network, job: &Job) -> Vec<NodeId> {
    let demand = job.total_memory();
    net.nodes()
        .iter()
        .filter(|n| n.mem_available + CAPACITY_EPS >= demand)
        .map(|n| n.id)
        .collect()
}

fn insufficient(job: &Job) -> AllocError {
    AllocError::InsufficientResources {
        job: job.id.clone(),
        task: job.tasks.first().map(|t| t.name.clone()).unwrap_or_default(),
    }
}

fn place_whole(net: &mut Network, job: &Job, node: NodeId) -> Result<Allocation, AllocError> {
    let placement = Placement::colocated(job.task_count(), node);
    reserve_placement(net, job, &placement)?;
    let flows = derive_flows(job, &placement);
    Ok(Allocation { placement, flows })
}

/// Whole job on the feasible node with the most free memory (lower id on ties).
pub fn place_least_request(net: &mut Network, job: &Job) -> Result<Allocation, AllocError> {
    let mut best: Option<(f64, NodeId)> = None;
    for id in whole_job_candidates(net, job) {
        let free = net.node(id).mem_available;
        if best.is_none_or(|(b, _)| free > b) {
            best = Some((free, id));
        }
    }
    let (_, node) = best.ok_or_else(|| insufficient(job))?;
    place_whole(net, job, node)
}

/// Population standard deviation of memory utilisation if `extra` were
/// reserved on `target`.
pub fn utilisation_spread(net: &Network, target: NodeId, extra: f64) -> f64 {
    let util: Vec<f64> = net
        .nodes()
        .iter()
        .map(|n| {
            let avail = if n.id == target { n.mem_available - extra } else { n.mem_available };
            if n.mem_capacity > 0.0 {
                (n.mem_capacity - avail) / n.mem_capacity
            } else {
                0.0
            }
        })
        .collect();
    let mean = util.iter().sum::<f64>() / util.len() as f64;
    (util.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / util.len() as f64).sqrt()
}

/// Whole job on the feasible node that leaves memory utilisation most even.
pub fn place_balanced(net: &mut Network, job: &Job) -> Result<Allocation, AllocError> {
    let demand = job.total_memory();
    let mut best: Option<(f64, NodeId)> = None;
    for id in whole_job_candidates(net, job) {
        let spread = utilisation_spread(net, id, demand);
        if best.is_none_or(|(b, _)| spread < b) {
            best = Some((spread, id));
        }
    }
    let (_, node) = best.ok_or_else(|| insufficient(job))?;
    place_whole(net, job, node)
}

/// Default networking: every flow takes its first usable shortest path and
/// each link's residual capacity is split equally among the flows crossing it.
pub fn equal_share_plan(net: &Network, flows: &[Flow]) -> Result<FlowPlan, JrbaError> {
    let mut paths = Vec::with_capacity(flows.len());
    for (i, f) in flows.iter().enumerate() {
        match enumerate_usable_paths(net, f.src, f.dst, 1, CAPACITY_EPS) {
            Ok(mut p) if !p.is_empty() => paths.push(p.remove(0)),
            Ok(_) | Err(TopologyError::NoPath { .. }) => return Err(JrbaError::Infeasible { flow: i }),
            Err(e) => return Err(e.into()),
        }
    }
    let mut crossing: BTreeMap<LinkId, usize> = BTreeMap::new();
    for p in &paths {
        for &l in &p.links {
            *crossing.entry(l).or_insert(0) += 1;
        }
    }
    let mut planned = Vec::with_capacity(flows.len());
    let mut period: f64 = 0.0;
    for (f, p) in flows.iter().zip(paths) {
        let rate = p
            .links
            .iter()
            .map(|l| net.residual(*l) / crossing[l] as f64)
            .fold(f64::INFINITY, f64::min);
        period = period.max(f.volume / rate);
        planned.push(PlannedFlow {
            flow: f.clone(),
            path: p,
            rate,
        });
    }
    Ok(FlowPlan {
        flows: planned,
        period,
        lp_bound: None,
    })
}

fn network_or_rollback(net: &mut Network, job: &Job, alloc: Allocation) -> Result<(Allocation, FlowPlan), ScheduleError> {
    match equal_share_plan(net, &alloc.flows) {
        Ok(plan) => {
            plan.commit(net)?;
            Ok((alloc, plan))
        }
        Err(e) => {
            net.release_memory(&job.id)?;
            Err(e.into())
        }
    }
}

/// LR placement with default networking for its input flow.
pub fn schedule_lr(net: &mut Network, job: &Job) -> Result<(Allocation, FlowPlan), ScheduleError> {
    let alloc = place_least_request(net, job)?;
    network_or_rollback(net, job, alloc)
}

/// BR placement with default networking for its input flow.
pub fn schedule_br(net: &mut Network, job: &Job) -> Result<(Allocation, FlowPlan), ScheduleError> {
    let alloc = place_balanced(net, job)?;
    network_or_rollback(net, job, alloc)
}

/// Greedy task partitioning with default networking.
pub fn schedule_tp(net: &mut Network, job: &Job, k: usize) -> Result<(Allocation, FlowPlan), ScheduleError> {
    schedule_tp_cached(net, job, &mut RouteCache::new(k))
}

pub fn schedule_tp_cached(
    net: &mut Network,
    job: &Job,
    cache: &mut RouteCache,
) -> Result<(Allocation, FlowPlan), ScheduleError> {
    let alloc = allocate_tasks_cached(net, job, cache)?;
    network_or_rollback(net, job, alloc)
}
