//! Greedy task placement: each task, in topological order, goes to the
//! memory-feasible node with the smallest computation-plus-transfer time.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::jobgraph::{topological_order, Job};
use crate::perfmodel::{compute_time, cross_node_transfers, FlowKey, Placement};
use crate::topology::{average_route_bandwidth, Network, NodeId, TopologyError, CAPACITY_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("no node has memory for task {task} of job {job}")]
    InsufficientResources { job: String, task: String },
    #[error("job {job} already holds memory")]
    AlreadyPlaced { job: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Inter-node data transfer produced by a placement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flow {
    pub src: NodeId,
    pub dst: NodeId,
    /// Data-units per batch.
    pub volume: f64,
    /// Owning job id.
    pub job: String,
    pub key: FlowKey,
}

/// Placement of one job together with the flows it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub placement: Placement,
    pub flows: Vec<Flow>,
}

/// Flows for every cross-node transfer of `job` under `placement`.
pub fn derive_flows(job: &Job, placement: &Placement) -> Vec<Flow> {
    cross_node_transfers(job, placement)
        .into_iter()
        .map(|t| Flow {
            src: t.src,
            dst: t.dst,
            volume: t.volume,
            job: job.id.clone(),
            key: t.key,
        })
        .collect()
}

/// Mean route bandwidth per directed node pair. Only valid while link
/// allocations stay unchanged; memory reservations do not affect it.
#[derive(Debug, Clone, Default)]
pub struct RouteCache {
    k: usize,
    bw: HashMap<(NodeId, NodeId), f64>,
}

impl RouteCache {
    pub fn new(k: usize) -> Self {
        Self { k, bw: HashMap::new() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn clear(&mut self) {
        self.bw.clear();
    }

    fn get(&mut self, net: &Network, from: NodeId, to: NodeId) -> Result<f64, TopologyError> {
        if let Some(bw) = self.bw.get(&(from, to)) {
            return Ok(*bw);
        }
        let bw = average_route_bandwidth(net, from, to, self.k)?;
        self.bw.insert((from, to), bw);
        Ok(bw)
    }
}

/// Places every task of `job`, reserving memory under the job's id as it goes.
///
/// Transfer times are estimated with the mean residual bandwidth over the
/// links of the first `k` routes between the two nodes. Ties go to the node
/// with more free memory, then to the lower id. On failure every reservation
/// made for the job is returned.
pub fn allocate_tasks(net: &mut Network, job: &Job, k: usize) -> Result<Allocation, AllocError> {
    allocate_tasks_cached(net, job, &mut RouteCache::new(k))
}

/// [`allocate_tasks`] reusing route estimates from `cache`.
pub fn allocate_tasks_cached(net: &mut Network, job: &Job, cache: &mut RouteCache) -> Result<Allocation, AllocError> {
    if net.holds_memory(&job.id) {
        return Err(AllocError::AlreadyPlaced { job: job.id.clone() });
    }
    let mut placed: Vec<Option<NodeId>> = vec![None; job.task_count()];
    let roots = job.roots();

    for tid in topological_order(job) {
        let task = &job.tasks[tid];
        // Incoming transfers: (producer node, volume per batch).
        let mut inputs: Vec<(NodeId, f64)> = job
            .edges
            .iter()
            .filter(|e| e.to == tid)
            .map(|e| (placed[e.from].expect("producers are placed first"), e.volume))
            .collect();
        if roots.contains(&tid) {
            inputs.push((job.source_node, job.input_volume(tid)));
        }

        let mut best: Option<(f64, f64, NodeId)> = None;
        for node in net.nodes() {
            if node.mem_available + CAPACITY_EPS < task.mem_demand {
                continue;
            }
            let mut t_comm: f64 = 0.0;
            for &(from, volume) in &inputs {
                if from == node.id || volume == 0.0 {
                    continue;
                }
                let bw = cache.get(net, from, node.id)?;
                let t = if bw > 0.0 { volume / bw } else { f64::INFINITY };
                t_comm = t_comm.max(t);
            }
            let t_exec = compute_time(task, node) + t_comm;
            let better = match best {
                None => true,
                Some((bt, bm, _)) => t_exec < bt || (t_exec == bt && node.mem_available > bm),
            };
            if better {
                best = Some((t_exec, node.mem_available, node.id));
            }
        }
        let Some((_, _, chosen)) = best else {
            if net.holds_memory(&job.id) {
                net.release_memory(&job.id)?;
            }
            return Err(AllocError::InsufficientResources {
                job: job.id.clone(),
                task: task.name.clone(),
            });
        };
        net.reserve_memory(chosen, &job.id, task.mem_demand)?;
        placed[tid] = Some(chosen);
    }

    let placement = Placement::new(placed.into_iter().map(|n| n.expect("all placed")).collect());
    let flows = derive_flows(job, &placement);
    Ok(Allocation { placement, flows })
}

/// Reserves memory for a complete placement decided elsewhere.
pub fn reserve_placement(net: &mut Network, job: &Job, placement: &Placement) -> Result<(), AllocError> {
    if net.holds_memory(&job.id) {
        return Err(AllocError::AlreadyPlaced { job: job.id.clone() });
    }
    for task in &job.tasks {
        if let Err(e) = net.reserve_memory(placement.node_of(task.id), &job.id, task.mem_demand) {
            if net.holds_memory(&job.id) {
                net.release_memory(&job.id)?;
            }
            return Err(e.into());
        }
    }
    Ok(())
}

/// Returns every memory unit reserved for `job`. A second call fails.
pub fn rollback(net: &mut Network, job: &Job) -> Result<f64, AllocError> {
    Ok(net.release_memory(&job.id)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{EdgeNode, Link};

    fn star() -> Network {
        // Node 0 is the hub and holds plenty of memory.
        Network::new(
            vec![
                EdgeNode::new(0, 100.0, 10.0),
                EdgeNode::new(1, 10.0, 2.0),
                EdgeNode::new(2, 10.0, 2.0),
            ],
            vec![Link::new(0, 1, 5.0), Link::new(0, 2, 5.0)],
        )
        .unwrap()
    }

    fn chain_job(source: NodeId) -> Job {
        Job::builder("job", source, 1.0)
            .task("a", 10.0, 1.0)
            .task("b", 10.0, 1.0)
            .task("c", 10.0, 1.0)
            .edge(0, 1, 1.0)
            .edge(1, 2, 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn everything_on_the_source_when_it_fits() {
        let mut net = star();
        let alloc = allocate_tasks(&mut net, &chain_job(0), 4).unwrap();
        assert_eq!(alloc.placement.assignment, vec![0, 0, 0]);
        assert!(alloc.flows.is_empty());
        assert_eq!(net.node(0).mem_available, 7.0);
    }

    #[test]
    fn memory_filter_forces_a_split() {
        let mut net = star();
        // Source node 1 only fits the first two tasks; the hub is fast.
        let alloc = allocate_tasks(&mut net, &chain_job(1), 4).unwrap();
        assert!(alloc.placement.assignment.iter().all(|&n| n < 3));
        let per_node = |n| {
            alloc
                .placement
                .assignment
                .iter()
                .zip(&[1.0, 1.0, 1.0])
                .filter(|(a, _)| **a == n)
                .map(|(_, m)| m)
                .sum::<f64>()
        };
        assert!(per_node(1) <= 2.0 && per_node(2) <= 2.0);
        for f in &alloc.flows {
            assert_ne!(f.src, f.dst);
            assert!(f.volume > 0.0);
        }
    }

    #[test]
    fn failure_rolls_back_reservations() {
        let mut net = star();
        let initial = net.clone();
        let job = Job::builder("big", 0, 1.0)
            .task("a", 1.0, 9.0)
            .task("b", 1.0, 9.0)
            .edge(0, 1, 1.0)
            .build()
            .unwrap();
        let err = allocate_tasks(&mut net, &job, 4).unwrap_err();
        assert_eq!(
            err,
            AllocError::InsufficientResources {
                job: "big".into(),
                task: "b".into()
            }
        );
        assert_eq!(net, initial);
    }

    #[test]
    fn rollback_is_identity_and_not_repeatable() {
        let mut net = star();
        let initial = net.clone();
        let job = chain_job(1);
        allocate_tasks(&mut net, &job, 4).unwrap();
        assert_eq!(rollback(&mut net, &job).unwrap(), 3.0);
        assert_eq!(net, initial);
        assert!(rollback(&mut net, &job).is_err());
    }

    #[test]
    fn placing_twice_is_rejected() {
        let mut net = star();
        let job = chain_job(0);
        allocate_tasks(&mut net, &job, 4).unwrap();
        assert!(matches!(allocate_tasks(&mut net, &job, 4), Err(AllocError::AlreadyPlaced { .. })));
    }
}
