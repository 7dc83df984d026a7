//! Edge network model: heterogeneous nodes joined by undirected links with a
//! single shared capacity, residual accounting and simple-path enumeration.
//!
//! Memory and bandwidth are reserved through named holds (one per owning
//! job). Residual values are always recomputed from the outstanding holds, so
//! releasing every hold restores the initial state exactly.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;
pub type LinkId = usize;

/// Slack allowed when comparing a link's allocated rate against its capacity.
pub const CAPACITY_EPS: f64 = 1e-9;
/// Default number of candidate routes kept per flow.
pub const DEFAULT_PATH_BUDGET: usize = 4;
/// Largest network on which exhaustive path enumeration is allowed.
pub const DEFAULT_ORACLE_NODE_CAP: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("network is disconnected: node {node} unreachable from node 0")]
    Disconnected { node: NodeId },
    #[error("duplicate link between nodes {u} and {v}")]
    DuplicateLink { u: NodeId, v: NodeId },
    #[error("self-loop on node {node}")]
    SelfLoop { node: NodeId },
    #[error("link {link} has non-positive capacity {capacity}")]
    NonPositiveCapacity { link: LinkId, capacity: f64 },
    #[error("node {node} has non-positive compute power {power}")]
    NonPositivePower { node: NodeId, power: f64 },
    #[error("node {node} memory out of range (available {available}, capacity {capacity})")]
    MemoryOutOfRange {
        node: NodeId,
        available: f64,
        capacity: f64,
    },
    #[error("node at position {index} has id {id}; ids must be dense and ordered")]
    NonDenseId { index: usize, id: NodeId },
    #[error("unknown node {node}")]
    UnknownNode { node: NodeId },
    #[error("empty network")]
    Empty,
    #[error("no path from node {src} to node {dst}")]
    NoPath { src: NodeId, dst: NodeId },
    #[error("source and destination are the same node {node}")]
    SameEndpoints { node: NodeId },
    #[error("{nodes} nodes exceed the exhaustive enumeration cap of {cap}")]
    TooLarge { nodes: usize, cap: usize },
    #[error("average degree {avg_degree} is infeasible for {nodes} nodes")]
    InfeasibleDegree { nodes: usize, avg_degree: f64 },
    #[error("invalid generator parameter: {0}")]
    InvalidGenerator(String),
    #[error("node {node} lacks memory: requested {requested}, available {available}")]
    InsufficientMemory {
        node: NodeId,
        requested: f64,
        available: f64,
    },
    #[error("link {link} lacks bandwidth: requested {requested}, residual {residual}")]
    InsufficientBandwidth {
        link: LinkId,
        requested: f64,
        residual: f64,
    },
    #[error("owner {owner} holds no {resource}")]
    NotReserved { owner: String, resource: &'static str },
    #[error("malformed network document: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, TopologyError>;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeNode {
    pub id: NodeId,
    /// Work-units processed per second.
    pub compute_power: f64,
    pub mem_capacity: f64,
    /// Memory free for scheduling; always `base_available - Σ holds`.
    pub mem_available: f64,
    base_available: f64,
    holds: BTreeMap<String, f64>,
}

impl EdgeNode {
    pub fn new(id: NodeId, compute_power: f64, mem_capacity: f64) -> Self {
        Self::with_available(id, compute_power, mem_capacity, mem_capacity)
    }

    pub fn with_available(id: NodeId, compute_power: f64, mem_capacity: f64, available: f64) -> Self {
        Self {
            id,
            compute_power,
            mem_capacity,
            mem_available: available,
            base_available: available,
            holds: BTreeMap::new(),
        }
    }

    pub fn reserved(&self) -> f64 {
        self.holds.values().fold(0.0, |a, b| a + b)
    }

    fn refresh(&mut self) {
        self.mem_available = self.base_available - self.reserved();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub u: NodeId,
    pub v: NodeId,
    /// Data-units per second, shared by both directions.
    pub capacity: f64,
    /// Sum of rates currently committed on the link.
    pub allocated: f64,
    holds: BTreeMap<String, f64>,
}

impl Link {
    pub fn new(u: NodeId, v: NodeId, capacity: f64) -> Self {
        Self {
            u,
            v,
            capacity,
            allocated: 0.0,
            holds: BTreeMap::new(),
        }
    }

    pub fn residual(&self) -> f64 {
        (self.capacity - self.allocated).max(0.0)
    }

    pub fn other(&self, node: NodeId) -> NodeId {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }

    fn refresh(&mut self) {
        self.allocated = self.holds.values().fold(0.0, |a, b| a + b);
    }
}

/// Undirected, connected edge network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<EdgeNode>,
    links: Vec<Link>,
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeDoc {
    pub id: NodeId,
    pub power: f64,
    pub memory: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub available: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinkDoc {
    pub u: NodeId,
    pub v: NodeId,
    pub bandwidth: f64,
}

/// JSON form of a network: `{nodes:[{id,power,memory}], links:[{u,v,bandwidth}]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetworkDoc {
    pub nodes: Vec<NodeDoc>,
    pub links: Vec<LinkDoc>,
}

impl Network {
    /// Builds and validates a network.
    pub fn new(nodes: Vec<EdgeNode>, links: Vec<Link>) -> Result<Self> {
        let net = Self::assemble(nodes, links)?;
        net.validate()?;
        Ok(net)
    }

    fn assemble(nodes: Vec<EdgeNode>, links: Vec<Link>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (id, link) in links.iter().enumerate() {
            for end in [link.u, link.v] {
                if end >= nodes.len() {
                    return Err(TopologyError::UnknownNode { node: end });
                }
            }
            adjacency[link.u].push((link.v, id));
            if link.u != link.v {
                adjacency[link.v].push((link.u, id));
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self {
            nodes,
            links,
            adjacency,
        })
    }

    /// Checks every node/link invariant and connectivity.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(TopologyError::Empty);
        }
        for (index, node) in self.nodes.iter().enumerate() {
            if node.id != index {
                return Err(TopologyError::NonDenseId { index, id: node.id });
            }
            if !(node.compute_power > 0.0) || !node.compute_power.is_finite() {
                return Err(TopologyError::NonPositivePower {
                    node: index,
                    power: node.compute_power,
                });
            }
            if !(node.mem_available >= 0.0 && node.mem_available <= node.mem_capacity) {
                return Err(TopologyError::MemoryOutOfRange {
                    node: index,
                    available: node.mem_available,
                    capacity: node.mem_capacity,
                });
            }
        }
        let mut seen = BTreeSet::new();
        for (id, link) in self.links.iter().enumerate() {
            if link.u == link.v {
                return Err(TopologyError::SelfLoop { node: link.u });
            }
            let key = (link.u.min(link.v), link.u.max(link.v));
            if !seen.insert(key) {
                return Err(TopologyError::DuplicateLink { u: key.0, v: key.1 });
            }
            if !(link.capacity > 0.0) || !link.capacity.is_finite() {
                return Err(TopologyError::NonPositiveCapacity {
                    link: id,
                    capacity: link.capacity,
                });
            }
        }
        let dist = self.hops_from(0, |_| true);
        if let Some(node) = dist.iter().position(|d| *d == usize::MAX) {
            return Err(TopologyError::Disconnected { node });
        }
        Ok(())
    }

    pub fn from_doc(doc: &NetworkDoc) -> Result<Self> {
        let nodes = doc
            .nodes
            .iter()
            .map(|n| EdgeNode::with_available(n.id, n.power, n.memory, n.available.unwrap_or(n.memory)))
            .collect();
        let links = doc.links.iter().map(|l| Link::new(l.u, l.v, l.bandwidth)).collect();
        Self::new(nodes, links)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| TopologyError::Json(e.to_string()))?;
        Self::from_doc(&doc)
    }

    /// Nominal description; outstanding holds are not part of the document.
    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id,
                    power: n.compute_power,
                    memory: n.mem_capacity,
                    available: (n.base_available != n.mem_capacity).then_some(n.base_available),
                })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| LinkDoc {
                    u: l.u,
                    v: l.v,
                    bandwidth: l.capacity,
                })
                .collect(),
        }
    }

    pub fn nodes(&self) -> &[EdgeNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &EdgeNode {
        &self.nodes[id]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[node]
    }

    pub fn link_between(&self, u: NodeId, v: NodeId) -> Option<LinkId> {
        self.adjacency
            .get(u)?
            .iter()
            .find(|(n, _)| *n == v)
            .map(|(_, l)| *l)
    }

    pub fn residual(&self, link: LinkId) -> f64 {
        self.links[link].residual()
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if node < self.nodes.len() {
            Ok(())
        } else {
            Err(TopologyError::UnknownNode { node })
        }
    }

    /// Adds `amount` to `owner`'s memory hold on `node`.
    pub fn reserve_memory(&mut self, node: NodeId, owner: &str, amount: f64) -> Result<()> {
        self.check_node(node)?;
        let n = &mut self.nodes[node];
        if amount > n.mem_available + CAPACITY_EPS {
            return Err(TopologyError::InsufficientMemory {
                node,
                requested: amount,
                available: n.mem_available,
            });
        }
        *n.holds.entry(owner.to_string()).or_insert(0.0) += amount;
        n.refresh();
        Ok(())
    }

    /// Drops every memory hold of `owner`, returning the total released.
    pub fn release_memory(&mut self, owner: &str) -> Result<f64> {
        let mut total = 0.0;
        let mut found = false;
        for n in &mut self.nodes {
            if let Some(amount) = n.holds.remove(owner) {
                found = true;
                total += amount;
                n.refresh();
            }
        }
        if found {
            Ok(total)
        } else {
            Err(TopologyError::NotReserved {
                owner: owner.to_string(),
                resource: "memory",
            })
        }
    }

    pub fn holds_memory(&self, owner: &str) -> bool {
        self.nodes.iter().any(|n| n.holds.contains_key(owner))
    }

    /// Adds `rate` to `owner`'s bandwidth hold on `link`.
    pub fn reserve_bandwidth(&mut self, link: LinkId, owner: &str, rate: f64) -> Result<()> {
        let l = &mut self.links[link];
        let residual = l.capacity - l.allocated;
        if rate > residual + CAPACITY_EPS {
            return Err(TopologyError::InsufficientBandwidth {
                link,
                requested: rate,
                residual,
            });
        }
        *l.holds.entry(owner.to_string()).or_insert(0.0) += rate;
        l.refresh();
        Ok(())
    }

    /// Drops every bandwidth hold of `owner`, returning how many links were touched.
    pub fn release_bandwidth(&mut self, owner: &str) -> Result<usize> {
        let mut touched = 0;
        for l in &mut self.links {
            if l.holds.remove(owner).is_some() {
                touched += 1;
                l.refresh();
            }
        }
        if touched > 0 {
            Ok(touched)
        } else {
            Err(TopologyError::NotReserved {
                owner: owner.to_string(),
                resource: "bandwidth",
            })
        }
    }

    pub fn holds_bandwidth(&self, owner: &str) -> bool {
        self.links.iter().any(|l| l.holds.contains_key(owner))
    }

    pub fn release_all_bandwidth(&mut self) {
        for l in &mut self.links {
            l.holds.clear();
            l.refresh();
        }
    }

    /// Bandwidth held by `owner` on `link`.
    pub fn bandwidth_hold(&self, link: LinkId, owner: &str) -> f64 {
        self.links[link].holds.get(owner).copied().unwrap_or(0.0)
    }

    /// Memory held by `owner` on `node`.
    pub fn memory_hold(&self, node: NodeId, owner: &str) -> f64 {
        self.nodes[node].holds.get(owner).copied().unwrap_or(0.0)
    }

    /// Largest amount by which any link exceeds its capacity (0 when none does).
    pub fn max_overallocation(&self) -> f64 {
        self.links
            .iter()
            .map(|l| l.allocated - l.capacity)
            .fold(0.0, f64::max)
    }

    /// True when no memory or bandwidth hold is outstanding.
    pub fn is_idle(&self) -> bool {
        self.nodes.iter().all(|n| n.holds.is_empty()) && self.links.iter().all(|l| l.holds.is_empty())
    }

    /// BFS hop distances from `root` over links accepted by `usable`.
    fn hops_from(&self, root: NodeId, usable: impl Fn(LinkId) -> bool) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[root] = 0;
        queue.push_back(root);
        while let Some(x) = queue.pop_front() {
            for &(y, l) in &self.adjacency[x] {
                if dist[y] == usize::MAX && usable(l) {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }
}

/// A simple path through the network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
}

impl Path {
    pub fn hops(&self) -> usize {
        self.links.len()
    }

    /// Smallest residual capacity along the path.
    pub fn bottleneck(&self, net: &Network) -> f64 {
        self.links
            .iter()
            .map(|&l| net.residual(l))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn uses(&self, link: LinkId) -> bool {
        self.links.contains(&link)
    }
}

/// Route ordering: fewer hops, then wider residual bottleneck, then node sequence.
pub fn compare_paths(net: &Network, a: &Path, b: &Path) -> Ordering {
    a.hops()
        .cmp(&b.hops())
        .then_with(|| b.bottleneck(net).total_cmp(&a.bottleneck(net)))
        .then_with(|| a.nodes.cmp(&b.nodes))
}

fn check_endpoints(net: &Network, src: NodeId, dst: NodeId) -> Result<()> {
    net.check_node(src)?;
    net.check_node(dst)?;
    if src == dst {
        return Err(TopologyError::SameEndpoints { node: src });
    }
    Ok(())
}

/// Up to `k` simple paths from `src` to `dst` in route order.
pub fn enumerate_paths(net: &Network, src: NodeId, dst: NodeId, k: usize) -> Result<Vec<Path>> {
    enumerate_paths_where(net, src, dst, k, |_| true)
}

/// Like [`enumerate_paths`] but only over links with residual capacity above
/// `min_residual`.
pub fn enumerate_usable_paths(
    net: &Network,
    src: NodeId,
    dst: NodeId,
    k: usize,
    min_residual: f64,
) -> Result<Vec<Path>> {
    enumerate_paths_where(net, src, dst, k, |l| net.residual(l) > min_residual)
}

/// Yen-style deviation search. Every candidate is the best completion of a
/// prefix of an accepted path, so the first `k` accepted paths are exactly
/// the first `k` simple paths in route order.
fn enumerate_paths_where(
    net: &Network,
    src: NodeId,
    dst: NodeId,
    k: usize,
    usable: impl Fn(LinkId) -> bool + Copy,
) -> Result<Vec<Path>> {
    check_endpoints(net, src, dst)?;
    let mut banned_nodes = vec![false; net.node_count()];
    let mut banned_links = vec![false; net.link_count()];
    let Some(first) = best_completion(net, src, dst, usable, &banned_nodes, &banned_links, f64::INFINITY) else {
        return Err(TopologyError::NoPath { src, dst });
    };
    // Each accepted path with the index where it left its parent; spurs
    // before that index were already explored from the parent.
    let mut accepted = vec![(first, 0usize)];
    let mut candidates: Vec<(Path, usize)> = Vec::new();
    while accepted.len() < k {
        let (last, from) = accepted.last().expect("at least one path").clone();
        for i in from..last.links.len() {
            let root_nodes = &last.nodes[..=i];
            let root_links = &last.links[..i];
            for (p, _) in &accepted {
                if p.nodes.len() > i + 1 && p.nodes[..=i] == *root_nodes {
                    banned_links[p.links[i]] = true;
                }
            }
            for &n in &root_nodes[..i] {
                banned_nodes[n] = true;
            }
            let root_width = root_links.iter().map(|&l| net.residual(l)).fold(f64::INFINITY, f64::min);
            let spur = root_nodes[i];
            let tail = best_completion(net, spur, dst, usable, &banned_nodes, &banned_links, root_width);
            banned_links.iter_mut().for_each(|b| *b = false);
            banned_nodes.iter_mut().for_each(|b| *b = false);
            if let Some(tail) = tail {
                let mut nodes = root_nodes.to_vec();
                nodes.extend_from_slice(&tail.nodes[1..]);
                let mut links = root_links.to_vec();
                links.extend_from_slice(&tail.links);
                let path = Path { nodes, links };
                if !accepted.iter().any(|(p, _)| *p == path) && !candidates.iter().any(|(p, _)| *p == path) {
                    candidates.push((path, i));
                }
            }
        }
        let Some(best) =
            (0..candidates.len()).min_by(|&a, &b| compare_paths(net, &candidates[a].0, &candidates[b].0))
        else {
            break;
        };
        accepted.push(candidates.swap_remove(best));
    }
    accepted.truncate(k);
    Ok(accepted.into_iter().map(|(p, _)| p).collect())
}

/// Best path from `from` to `dst` in route order, avoiding banned nodes and
/// links. Widths above `cap` count as equal to `cap`, since a fixed prefix of
/// that width already bounds the full route.
fn best_completion(
    net: &Network,
    from: NodeId,
    dst: NodeId,
    usable: impl Fn(LinkId) -> bool,
    banned_nodes: &[bool],
    banned_links: &[bool],
    cap: f64,
) -> Option<Path> {
    let ok = |l: LinkId, y: NodeId| !banned_links[l] && !banned_nodes[y] && usable(l);
    let m = net.node_count();
    let mut dist = vec![usize::MAX; m];
    let mut order = Vec::with_capacity(m);
    let mut queue = VecDeque::new();
    dist[dst] = 0;
    queue.push_back(dst);
    while let Some(x) = queue.pop_front() {
        order.push(x);
        for &(y, l) in net.neighbors(x) {
            if dist[y] == usize::MAX && ok(l, y) {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    if dist[from] == usize::MAX {
        return None;
    }
    // Widest capped bottleneck to dst along hop-shortest paths.
    let mut width = vec![f64::NEG_INFINITY; m];
    width[dst] = cap;
    for &x in order.iter().skip(1) {
        for &(y, l) in net.neighbors(x) {
            if dist[y] != usize::MAX && dist[y] + 1 == dist[x] && ok(l, y) {
                width[x] = width[x].max(net.residual(l).min(width[y]));
            }
        }
    }
    let target = width[from];
    let mut nodes = vec![from];
    let mut links = Vec::new();
    let mut here = from;
    while here != dst {
        let (next, link) = net
            .neighbors(here)
            .iter()
            .filter(|&&(y, l)| {
                dist[y] != usize::MAX && dist[y] + 1 == dist[here] && ok(l, y) && net.residual(l).min(width[y]) >= target
            })
            .min_by_key(|&&(y, _)| y)
            .copied()
            .expect("a hop-shortest successor reaches the target width");
        nodes.push(next);
        links.push(link);
        here = next;
    }
    Some(Path { nodes, links })
}

/// Every simple path from `src` to `dst`, in route order. Exhaustive, so
/// refused on networks above [`DEFAULT_ORACLE_NODE_CAP`] nodes.
pub fn all_simple_paths(net: &Network, src: NodeId, dst: NodeId) -> Result<Vec<Path>> {
    all_simple_paths_capped(net, src, dst, DEFAULT_ORACLE_NODE_CAP)
}

pub fn all_simple_paths_capped(net: &Network, src: NodeId, dst: NodeId, cap: usize) -> Result<Vec<Path>> {
    if net.node_count() > cap {
        return Err(TopologyError::TooLarge {
            nodes: net.node_count(),
            cap,
        });
    }
    check_endpoints(net, src, dst)?;
    let mut out = Vec::new();
    let mut visited = vec![false; net.node_count()];
    visited[src] = true;
    let mut nodes = vec![src];
    let mut links = Vec::new();
    dfs_all(net, dst, &mut visited, &mut nodes, &mut links, &mut out);
    if out.is_empty() {
        return Err(TopologyError::NoPath { src, dst });
    }
    out.sort_by(|a, b| compare_paths(net, a, b));
    Ok(out)
}

fn dfs_all(
    net: &Network,
    dst: NodeId,
    visited: &mut [bool],
    nodes: &mut Vec<NodeId>,
    links: &mut Vec<LinkId>,
    out: &mut Vec<Path>,
) {
    let here = *nodes.last().expect("path never empty");
    if here == dst {
        out.push(Path {
            nodes: nodes.clone(),
            links: links.clone(),
        });
        return;
    }
    for &(next, link) in net.neighbors(here) {
        if visited[next] {
            continue;
        }
        visited[next] = true;
        nodes.push(next);
        links.push(link);
        dfs_all(net, dst, visited, nodes, links, out);
        links.pop();
        nodes.pop();
        visited[next] = false;
    }
}

/// Mean residual capacity over the distinct links of the first `k` routes
/// between two distinct nodes.
pub fn average_route_bandwidth(net: &Network, src: NodeId, dst: NodeId, k: usize) -> Result<f64> {
    let paths = enumerate_paths(net, src, dst, k)?;
    let links: BTreeSet<LinkId> = paths.iter().flat_map(|p| p.links.iter().copied()).collect();
    if links.is_empty() {
        return Err(TopologyError::NoPath { src, dst });
    }
    let total: f64 = links.iter().map(|&l| net.residual(l)).sum();
    Ok(total / links.len() as f64)
}

/// One device tier of the random generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeClass {
    pub name: String,
    pub power: f64,
    pub memory: f64,
    /// Relative sampling weight.
    pub weight: f64,
}

impl NodeClass {
    pub fn new(name: &str, power: f64, memory: f64, weight: f64) -> Self {
        Self {
            name: name.to_string(),
            power,
            memory,
            weight,
        }
    }
}

/// Device tiers modelled on a Raspberry Pi / Jetson Nano / Jetson Xavier NX /
/// two edge-server testbed. Memory is in GB; power in work-units per second.
pub fn default_node_classes() -> Vec<NodeClass> {
    vec![
        NodeClass::new("raspberry-pi", 10.0, 1.0, 0.30),
        NodeClass::new("jetson-nano", 40.0, 4.0, 0.25),
        NodeClass::new("jetson-xavier-nx", 100.0, 8.0, 0.25),
        NodeClass::new("edge-server-1", 400.0, 64.0, 0.15),
        NodeClass::new("edge-server-2", 800.0, 192.0, 0.05),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub nodes: usize,
    pub avg_degree: f64,
    pub bw_mean: f64,
    pub bw_var: f64,
    #[serde(default = "default_node_classes")]
    pub classes: Vec<NodeClass>,
}

impl GeneratorParams {
    pub fn new(nodes: usize, avg_degree: f64, bw_mean: f64, bw_var: f64) -> Self {
        Self {
            nodes,
            avg_degree,
            bw_mean,
            bw_var,
            classes: default_node_classes(),
        }
    }

    /// Number of links the generator will place.
    pub fn target_links(&self) -> usize {
        let m = self.nodes;
        let wanted = (m as f64 * self.avg_degree / 2.0).round() as usize;
        wanted.clamp(m.saturating_sub(1), m * m.saturating_sub(1) / 2)
    }
}

/// Connected random network: a random spanning tree plus uniformly chosen
/// extra links until the mean degree is reached. Capacities follow a normal
/// law truncated below at a tenth of the mean.
pub fn generate_random_network(params: &GeneratorParams, seed: u64) -> Result<Network> {
    let m = params.nodes;
    if m < 2 {
        return Err(TopologyError::InvalidGenerator(format!("need at least 2 nodes, got {m}")));
    }
    if !(params.avg_degree > 0.0) || params.avg_degree >= m as f64 {
        return Err(TopologyError::InfeasibleDegree {
            nodes: m,
            avg_degree: params.avg_degree,
        });
    }
    if !(params.bw_mean > 0.0) || !(params.bw_var >= 0.0) {
        return Err(TopologyError::InvalidGenerator(format!(
            "bandwidth mean {} / variance {}",
            params.bw_mean, params.bw_var
        )));
    }
    if params.classes.is_empty() {
        return Err(TopologyError::InvalidGenerator("no node classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let weights = WeightedIndex::new(params.classes.iter().map(|c| c.weight))
        .map_err(|e| TopologyError::InvalidGenerator(e.to_string()))?;
    let nodes: Vec<EdgeNode> = (0..m)
        .map(|id| {
            let class = &params.classes[weights.sample(&mut rng)];
            EdgeNode::new(id, class.power, class.memory)
        })
        .collect();

    let mut order: Vec<NodeId> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut present = BTreeSet::new();
    let mut pairs = Vec::with_capacity(params.target_links());
    for i in 1..m {
        let parent = order[rng.random_range(0..i)];
        let key = (order[i].min(parent), order[i].max(parent));
        present.insert(key);
        pairs.push(key);
    }
    let extra = params.target_links() - pairs.len();
    if extra > 0 {
        let mut candidates: Vec<(NodeId, NodeId)> = (0..m)
            .flat_map(|u| (u + 1..m).map(move |v| (u, v)))
            .filter(|p| !present.contains(p))
            .collect();
        let (picked, _) = candidates.partial_shuffle(&mut rng, extra);
        pairs.extend_from_slice(picked);
    }

    let normal = Normal::new(params.bw_mean, params.bw_var.sqrt())
        .map_err(|e| TopologyError::InvalidGenerator(e.to_string()))?;
    let floor = 0.1 * params.bw_mean;
    let links = pairs
        .into_iter()
        .map(|(u, v)| {
            let mut cap = normal.sample(&mut rng);
            let mut tries = 0;
            while cap < floor && tries < 64 {
                cap = normal.sample(&mut rng);
                tries += 1;
            }
            Link::new(u, v, cap.max(floor))
        })
        .collect();
    Network::new(nodes, links)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(caps: &[f64]) -> Network {
        let nodes = (0..=caps.len()).map(|i| EdgeNode::new(i, 1.0, 1.0)).collect();
        let links = caps.iter().enumerate().map(|(i, &c)| Link::new(i, i + 1, c)).collect();
        Network::new(nodes, links).unwrap()
    }

    fn square(caps: [f64; 4]) -> Network {
        let nodes = (0..4).map(|i| EdgeNode::new(i, 1.0, 1.0)).collect();
        let links = vec![
            Link::new(0, 1, caps[0]),
            Link::new(1, 2, caps[1]),
            Link::new(0, 3, caps[2]),
            Link::new(3, 2, caps[3]),
        ];
        Network::new(nodes, links).unwrap()
    }

    fn complete(m: usize) -> Network {
        let nodes = (0..m).map(|i| EdgeNode::new(i, 1.0, 1.0)).collect();
        let links = (0..m)
            .flat_map(|u| (u + 1..m).map(move |v| Link::new(u, v, 1.0)))
            .collect();
        Network::new(nodes, links).unwrap()
    }

    #[test]
    fn validate_accepts_minimal_graph() {
        let net = Network::new(
            vec![EdgeNode::new(0, 1.0, 1.0), EdgeNode::new(1, 1.0, 1.0)],
            vec![Link::new(0, 1, 10.0)],
        );
        assert!(net.is_ok());
    }

    #[test]
    fn validate_rejects_isolated_node() {
        let nodes = (0..3).map(|i| EdgeNode::new(i, 1.0, 1.0)).collect();
        let err = Network::new(nodes, vec![Link::new(0, 1, 1.0)]).unwrap_err();
        assert_eq!(err, TopologyError::Disconnected { node: 2 });
    }

    #[test]
    fn validate_rejects_self_loop_and_duplicates() {
        let nodes = || (0..2).map(|i| EdgeNode::new(i, 1.0, 1.0)).collect::<Vec<_>>();
        let err = Network::new(nodes(), vec![Link::new(0, 0, 1.0), Link::new(0, 1, 1.0)]).unwrap_err();
        assert_eq!(err, TopologyError::SelfLoop { node: 0 });
        let err = Network::new(nodes(), vec![Link::new(0, 1, 1.0), Link::new(1, 0, 2.0)]).unwrap_err();
        assert_eq!(err, TopologyError::DuplicateLink { u: 0, v: 1 });
        let err = Network::new(nodes(), vec![Link::new(0, 1, 0.0)]).unwrap_err();
        assert!(matches!(err, TopologyError::NonPositiveCapacity { link: 0, .. }));
    }

    #[test]
    fn line_has_unique_path() {
        let net = line(&[10.0, 20.0]);
        let paths = enumerate_paths(&net, 0, 2, 4).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].nodes, vec![0, 1, 2]);
        assert_eq!(all_simple_paths(&net, 0, 2).unwrap().len(), 1);
    }

    #[test]
    fn square_ties_break_lexicographically() {
        let net = square([5.0; 4]);
        let paths = enumerate_paths(&net, 0, 2, 4).unwrap();
        let seqs: Vec<_> = paths.iter().map(|p| p.nodes.clone()).collect();
        assert_eq!(seqs, vec![vec![0, 1, 2], vec![0, 3, 2]]);
        assert_eq!(all_simple_paths(&net, 0, 2).unwrap().len(), 2);
    }

    #[test]
    fn wider_bottleneck_first_among_equal_hops() {
        let net = square([2.0, 2.0, 9.0, 9.0]);
        let paths = enumerate_paths(&net, 0, 2, 1).unwrap();
        assert_eq!(paths[0].nodes, vec![0, 3, 2]);
    }

    #[test]
    fn k4_has_five_simple_paths() {
        let net = complete(4);
        let paths = all_simple_paths(&net, 0, 3).unwrap();
        assert_eq!(paths.len(), 5);
        assert_eq!(paths[0].nodes, vec![0, 3]);
        assert_eq!(paths.iter().filter(|p| p.hops() == 2).count(), 2);
        assert_eq!(paths.iter().filter(|p| p.hops() == 3).count(), 2);
    }

    #[test]
    fn exhaustive_enumeration_is_capped() {
        let net = complete(9);
        assert!(matches!(
            all_simple_paths(&net, 0, 1),
            Err(TopologyError::TooLarge { nodes: 9, cap: 8 })
        ));
    }

    #[test]
    fn average_bandwidth_examples() {
        let net = line(&[10.0, 20.0]);
        assert_eq!(average_route_bandwidth(&net, 0, 2, 4).unwrap(), 15.0);

        let mut single = line(&[10.0]);
        single.reserve_bandwidth(0, "j", 4.0).unwrap();
        assert_eq!(average_route_bandwidth(&single, 0, 1, 4).unwrap(), 6.0);

        let sq = square([10.0, 16.0, 4.0, 6.0]);
        assert_eq!(average_route_bandwidth(&sq, 0, 2, 2).unwrap(), 9.0);

        assert!(matches!(
            average_route_bandwidth(&sq, 1, 1, 2),
            Err(TopologyError::SameEndpoints { node: 1 })
        ));
    }

    #[test]
    fn holds_restore_initial_state_exactly() {
        let mut net = square([10.0, 16.0, 4.0, 6.0]);
        let initial = net.clone();
        net.reserve_memory(0, "a", 0.3).unwrap();
        net.reserve_memory(0, "b", 0.1).unwrap();
        net.reserve_bandwidth(1, "a", 16.0 / 3.0).unwrap();
        net.reserve_bandwidth(1, "b", 0.7).unwrap();
        assert!(net.reserve_memory(0, "c", 0.7).is_err());
        net.release_memory("a").unwrap();
        net.release_memory("b").unwrap();
        net.release_bandwidth("b").unwrap();
        net.release_bandwidth("a").unwrap();
        assert_eq!(net, initial);
        assert!(net.release_memory("a").is_err());
        assert!(net.is_idle());
    }

    #[test]
    fn usable_paths_skip_saturated_links() {
        let mut net = square([10.0, 16.0, 4.0, 6.0]);
        net.reserve_bandwidth(0, "x", 10.0).unwrap();
        let paths = enumerate_usable_paths(&net, 0, 2, 4, CAPACITY_EPS).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].nodes, vec![0, 3, 2]);
    }

    #[test]
    fn generator_small_and_deterministic() {
        let tiny = generate_random_network(&GeneratorParams::new(2, 1.0, 5.0, 0.0), 1).unwrap();
        assert_eq!(tiny.link_count(), 1);

        let params = GeneratorParams::new(30, 3.0, 1.0, 0.3);
        let a = generate_random_network(&params, 42).unwrap();
        let b = generate_random_network(&params, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a.to_doc()).unwrap(),
            serde_json::to_string(&b.to_doc()).unwrap()
        );
        assert!((a.link_count() as i64 - 45).abs() <= 1);
        assert!(a.links().iter().all(|l| l.capacity >= 0.1));
        assert_ne!(a, generate_random_network(&params, 43).unwrap());

        assert!(matches!(
            generate_random_network(&GeneratorParams::new(3, 3.0, 1.0, 0.3), 0),
            Err(TopologyError::InfeasibleDegree { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let net = square([10.0, 16.0, 4.0, 6.0]);
        let text = serde_json::to_string(&net.to_doc()).unwrap();
        assert_eq!(Network::from_json(&text).unwrap(), net);
    }
}
