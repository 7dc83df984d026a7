//! Joint routing and bandwidth allocation.
//!
//! The route choice of every flow is relaxed into a linear program over
//! candidate paths (variables `TH`, `q_i = TH·b_i`, `m_i^k = q_i·y_i^k`),
//! each flow is rounded onto its heaviest path, and rates are then shared on
//! every link in proportion to flow volume, which is optimal once routes are
//! fixed.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::allocator::Flow;
use crate::jobgraph::Job;
use crate::lpsolver::{solve, LinearProgram, LpError, LpSolution, LpStatus};
use crate::perfmodel::{FlowKey, Placement};
use crate::topology::{
    all_simple_paths, enumerate_usable_paths, LinkId, Network, Path, TopologyError, CAPACITY_EPS,
    DEFAULT_ORACLE_NODE_CAP,
};

/// Largest flow count the exhaustive oracle accepts.
pub const ORACLE_FLOW_CAP: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JrbaError {
    #[error("flow {flow} has no candidate path")]
    EmptyPathSet { flow: usize },
    #[error("flow {flow} has no path with residual bandwidth")]
    Infeasible { flow: usize },
    #[error("link {link} on a chosen path has no residual bandwidth")]
    ZeroCapacity { link: LinkId },
    #[error("relaxed program ended {0:?}")]
    Unsolved(LpStatus),
    #[error("oracle limited to {max_flows} flows on {max_nodes} nodes")]
    TooLarge { max_flows: usize, max_nodes: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedFlow {
    pub flow: Flow,
    pub path: Path,
    /// Data-units per second.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowPlan {
    pub flows: Vec<PlannedFlow>,
    /// `max_i V_i / b_i` over the plan, 0 without flows.
    pub period: f64,
    /// Optimal value of the relaxed program when one was solved.
    pub lp_bound: Option<f64>,
}

impl FlowPlan {
    pub fn empty() -> Self {
        Self {
            flows: Vec::new(),
            period: 0.0,
            lp_bound: Some(0.0),
        }
    }

    /// Rates of the flows owned by `job`.
    pub fn rates_for(&self, job: &str) -> BTreeMap<FlowKey, f64> {
        self.flows
            .iter()
            .filter(|p| p.flow.job == job)
            .map(|p| (p.flow.key, p.rate))
            .collect()
    }

    /// Reserves every planned rate on its links under the owning job's id.
    pub fn commit(&self, net: &mut Network) -> Result<(), TopologyError> {
        for p in &self.flows {
            for &l in &p.path.links {
                net.reserve_bandwidth(l, &p.flow.job, p.rate)?;
            }
        }
        Ok(())
    }
}

/// Variable layout of the relaxed program.
#[derive(Debug, Clone, PartialEq)]
pub struct VarIndex {
    pub th: usize,
    pub q: Vec<usize>,
    /// `m[i][k]` is the column of flow `i` on its `k`-th candidate path.
    pub m: Vec<Vec<usize>>,
    /// Link of each capacity row, in row order.
    pub link_rows: Vec<LinkId>,
}

/// Builds the relaxed routing program for `flows` over `pathsets`, using the
/// residual capacity of each link.
pub fn build_relaxed_lp(
    net: &Network,
    flows: &[Flow],
    pathsets: &[Vec<Path>],
) -> Result<(LinearProgram, VarIndex), JrbaError> {
    assert_eq!(flows.len(), pathsets.len(), "one path set per flow");
    if let Some(flow) = pathsets.iter().position(Vec::is_empty) {
        return Err(JrbaError::EmptyPathSet { flow });
    }
    let n_paths: usize = pathsets.iter().map(Vec::len).sum();
    let n = 1 + flows.len() + n_paths;
    let mut lp = LinearProgram::new(n);
    lp.names[0] = "TH".into();
    lp.objective[0] = 1.0;

    let q: Vec<usize> = (0..flows.len()).map(|i| 1 + i).collect();
    let mut m = Vec::with_capacity(flows.len());
    let mut col = 1 + flows.len();
    for (i, paths) in pathsets.iter().enumerate() {
        lp.names[q[i]] = format!("q{i}");
        lp.lower_bounds[q[i]] = flows[i].volume;
        let cols: Vec<usize> = (col..col + paths.len()).collect();
        for (k, &c) in cols.iter().enumerate() {
            lp.names[c] = format!("m{i}_{k}");
        }
        col += paths.len();
        m.push(cols);
    }

    let used: BTreeSet<LinkId> = pathsets.iter().flatten().flat_map(|p| p.links.iter().copied()).collect();
    let link_rows: Vec<LinkId> = used.into_iter().collect();
    for &l in &link_rows {
        let mut row = vec![0.0; n];
        row[0] = -net.residual(l);
        for (i, paths) in pathsets.iter().enumerate() {
            for (k, p) in paths.iter().enumerate() {
                if p.uses(l) {
                    row[m[i][k]] = 1.0;
                }
            }
        }
        lp.add_le(row, 0.0);
    }
    for i in 0..flows.len() {
        let mut row = vec![0.0; n];
        for &c in &m[i] {
            row[c] = 1.0;
        }
        row[q[i]] = -1.0;
        lp.add_eq(row, 0.0);
    }
    Ok((
        lp,
        VarIndex {
            th: 0,
            q,
            m,
            link_rows,
        },
    ))
}

/// Index of the heaviest path per flow; near-ties go to the earlier path.
pub fn round_routing(solution: &LpSolution, index: &VarIndex) -> Vec<usize> {
    index
        .m
        .iter()
        .map(|cols| {
            let values: Vec<f64> = cols.iter().map(|&c| solution.values[c]).collect();
            let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = 1e-9 * top.abs().max(1.0);
            values.iter().position(|&v| v >= top - slack).unwrap_or(0)
        })
        .collect()
}

/// Volume-proportional rates for fixed routes: on every link each flow gets
/// the residual capacity times its share of the volume crossing that link,
/// and keeps the smallest such share along its path.
pub fn allocate_bandwidth(net: &Network, flows: &[Flow], paths: &[Path]) -> Result<FlowPlan, JrbaError> {
    assert_eq!(flows.len(), paths.len(), "one path per flow");
    let mut load: BTreeMap<LinkId, f64> = BTreeMap::new();
    for (f, p) in flows.iter().zip(paths) {
        for &l in &p.links {
            *load.entry(l).or_insert(0.0) += f.volume;
        }
    }
    let mut planned = Vec::with_capacity(flows.len());
    let mut period: f64 = 0.0;
    for (f, p) in flows.iter().zip(paths) {
        let mut rate = f64::INFINITY;
        for &l in &p.links {
            let residual = net.residual(l);
            if residual <= 0.0 {
                return Err(JrbaError::ZeroCapacity { link: l });
            }
            rate = rate.min(residual * f.volume / load[&l]);
        }
        period = period.max(f.volume / rate);
        planned.push(PlannedFlow {
            flow: f.clone(),
            path: p.clone(),
            rate,
        });
    }
    Ok(FlowPlan {
        flows: planned,
        period,
        lp_bound: None,
    })
}

/// Closed-form period of fixed routes: the most loaded link's `ΣV / B`.
pub fn fixed_route_period(net: &Network, flows: &[Flow], paths: &[Path]) -> f64 {
    let mut load: BTreeMap<LinkId, f64> = BTreeMap::new();
    for (f, p) in flows.iter().zip(paths) {
        for &l in &p.links {
            *load.entry(l).or_insert(0.0) += f.volume;
        }
    }
    load.iter()
        .map(|(&l, v)| v / net.residual(l))
        .fold(0.0, f64::max)
}

/// Candidate routes for every flow: the first `k` paths over links with
/// residual bandwidth.
pub fn candidate_paths(net: &Network, flows: &[Flow], k: usize) -> Result<Vec<Vec<Path>>, JrbaError> {
    flows
        .iter()
        .enumerate()
        .map(|(i, f)| match enumerate_usable_paths(net, f.src, f.dst, k, CAPACITY_EPS) {
            Ok(paths) if !paths.is_empty() => Ok(paths),
            Ok(_) | Err(TopologyError::NoPath { .. }) => Err(JrbaError::Infeasible { flow: i }),
            Err(e) => Err(e.into()),
        })
        .collect()
}

/// Plans routes and rates for `flows` without touching the network.
pub fn plan(net: &Network, flows: &[Flow], k: usize) -> Result<FlowPlan, JrbaError> {
    if flows.is_empty() {
        return Ok(FlowPlan::empty());
    }
    let pathsets = candidate_paths(net, flows, k)?;
    let (lp, index) = build_relaxed_lp(net, flows, &pathsets)?;
    let solution = solve(&lp)?;
    if solution.status != LpStatus::Optimal {
        return Err(JrbaError::Unsolved(solution.status));
    }
    let chosen: Vec<Path> = round_routing(&solution, &index)
        .into_iter()
        .zip(&pathsets)
        .map(|(k, paths)| paths[k].clone())
        .collect();
    let mut plan = allocate_bandwidth(net, flows, &chosen)?;
    plan.lp_bound = Some(solution.objective_value);
    Ok(plan)
}

/// Plans `flows` and commits the rates to the network's links.
pub fn jrba(net: &mut Network, flows: &[Flow], k: usize) -> Result<FlowPlan, JrbaError> {
    let plan = plan(net, flows, k)?;
    plan.commit(net)?;
    Ok(plan)
}

/// Exhaustive search over every combination of simple paths with residual
/// bandwidth; small instances only.
pub fn oracle_best_plan(net: &Network, flows: &[Flow]) -> Result<FlowPlan, JrbaError> {
    if flows.len() > ORACLE_FLOW_CAP || net.node_count() > DEFAULT_ORACLE_NODE_CAP {
        return Err(JrbaError::TooLarge {
            max_flows: ORACLE_FLOW_CAP,
            max_nodes: DEFAULT_ORACLE_NODE_CAP,
        });
    }
    let mut pathsets = Vec::with_capacity(flows.len());
    for (i, f) in flows.iter().enumerate() {
        let usable: Vec<Path> = all_simple_paths(net, f.src, f.dst)?
            .into_iter()
            .filter(|p| p.links.iter().all(|&l| net.residual(l) > CAPACITY_EPS))
            .collect();
        if usable.is_empty() {
            return Err(JrbaError::Infeasible { flow: i });
        }
        pathsets.push(usable);
    }
    oracle_over(net, flows, &pathsets)
}

/// Exhaustive search restricted to the given candidate paths.
pub fn oracle_over(net: &Network, flows: &[Flow], pathsets: &[Vec<Path>]) -> Result<FlowPlan, JrbaError> {
    if flows.is_empty() {
        return Ok(FlowPlan {
            lp_bound: None,
            ..FlowPlan::empty()
        });
    }
    if let Some(flow) = pathsets.iter().position(Vec::is_empty) {
        return Err(JrbaError::EmptyPathSet { flow });
    }
    let mut choice = vec![0usize; flows.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let paths: Vec<Path> = choice.iter().zip(pathsets).map(|(&k, ps)| ps[k].clone()).collect();
        let period = fixed_route_period(net, flows, &paths);
        if best.as_ref().is_none_or(|(b, _)| period < *b) {
            best = Some((period, choice.clone()));
        }
        // Odometer increment over the combinations.
        let mut i = 0;
        loop {
            if i == choice.len() {
                let (_, picks) = best.expect("at least one combination");
                let paths: Vec<Path> = picks.iter().zip(pathsets).map(|(&k, ps)| ps[k].clone()).collect();
                return allocate_bandwidth(net, flows, &paths);
            }
            choice[i] += 1;
            if choice[i] < pathsets[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Scheduling policy of one job in the per-node shape used by edge agents:
/// which tasks a node hosts, where its outputs go, at which rates and routes.
pub fn policy_document(job: &Job, placement: &Placement, plan: &FlowPlan) -> Value {
    let node_name = |n: usize| format!("edge_{n}");
    let mut hosts: Vec<usize> = Vec::new();
    for &n in &placement.assignment {
        if !hosts.contains(&n) {
            hosts.push(n);
        }
    }
    let mut tasks = serde_json::Map::new();
    for (i, &host) in hosts.iter().enumerate() {
        let ids: Vec<String> = job
            .tasks
            .iter()
            .filter(|t| placement.node_of(t.id) == host)
            .map(|t| t.id.to_string())
            .collect();
        let outgoing: Vec<&PlannedFlow> = plan
            .flows
            .iter()
            .filter(|p| p.flow.job == job.id && p.flow.src == host)
            .collect();
        let mut previous: Vec<String> = plan
            .flows
            .iter()
            .filter(|p| p.flow.job == job.id && p.flow.dst == host)
            .map(|p| node_name(p.flow.src))
            .collect();
        previous.dedup();
        let join = |items: Vec<String>, sep: &str| items.join(sep);
        tasks.insert(
            format!("task_{}", i + 1),
            json!({
                "task_id": ids.join(" "),
                "source_node": node_name(host),
                "previous_node": join(previous, " "),
                "next_node": join(outgoing.iter().map(|p| node_name(p.flow.dst)).collect(), " "),
                "bandwidth": join(outgoing.iter().map(|p| format!("{:.6}", p.rate)).collect(), " "),
                "routing": join(
                    outgoing
                        .iter()
                        .filter(|p| p.path.hops() > 1)
                        .map(|p| p.path.nodes.iter().map(|&n| node_name(n)).collect::<Vec<_>>().join(" "))
                        .collect(),
                    "; "
                ),
            }),
        );
    }
    json!({ "job_name": job.id, "tasks": Value::Object(tasks) })
}
