use edgesched::allocator::Flow;
use edgesched::baselines::equal_share_plan;
use edgesched::engine::{EngineConfig, SchedulerKind};
use edgesched::harness::{motivating_strategies, simulate, ScenarioConfig};
use edgesched::jrba::{allocate_bandwidth, FlowPlan};
use edgesched::perfmodel::FlowKey;
use edgesched::topology::{enumerate_paths, EdgeNode, Link, Network};
use serde_json::{json, Value};
use std::path::Path;
use wasm_bindgen::prelude::*;

fn fail(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Throughputs of the five-node example under the four strategies.
#[wasm_bindgen]
pub fn motivating() -> Result<String, JsError> {
    let s = motivating_strategies().map_err(fail)?;
    serde_json::to_string(&s).map_err(fail)
}

/// Flows of the given volumes all crossing one link of `capacity`: rates
/// under equal sharing and under volume-proportional sharing.
#[wasm_bindgen]
pub fn share_link(capacity: f64, volumes: &[f64]) -> Result<String, JsError> {
    let net = Network::new(
        vec![EdgeNode::new(0, 1.0, 1.0), EdgeNode::new(1, 1.0, 1.0)],
        vec![Link::new(0, 1, capacity)],
    )
    .map_err(fail)?;
    let flows: Vec<Flow> = volumes
        .iter()
        .enumerate()
        .map(|(i, &v)| Flow {
            src: 0,
            dst: 1,
            volume: v,
            job: format!("job{i}"),
            key: FlowKey::Input { dst: 1 },
        })
        .collect();
    let path = enumerate_paths(&net, 0, 1, 1).map_err(fail)?.remove(0);
    let paths = vec![path; flows.len()];
    let proportional = allocate_bandwidth(&net, &flows, &paths).map_err(fail)?;
    let equal = equal_share_plan(&net, &flows).map_err(fail)?;
    let rates = |p: &FlowPlan| p.flows.iter().map(|f| f.rate).collect::<Vec<_>>();
    Ok(json!({
        "equal": {"rates": rates(&equal), "period": equal.period},
        "proportional": {"rates": rates(&proportional), "period": proportional.period},
    })
    .to_string())
}

/// Runs every scheduler on one generated scenario and returns the metrics
/// rows plus the network layout.
#[wasm_bindgen]
pub fn compare(nodes: usize, bw_mean: f64, n_jobs: usize, seed: u64) -> Result<String, JsError> {
    let config = ScenarioConfig::from_json(
        &json!({
            "name": "demo",
            "seed": seed,
            "network": {"generate": {"nodes": nodes, "avg_degree": 3.0, "bw_mean": bw_mean, "bw_var": bw_mean / 4.0}},
            "jobs": {"generate": {"templates": [{"builtin": "attribute_recognition"}], "n_jobs": n_jobs, "lambda": 0.5}},
        })
        .to_string(),
    )
    .map_err(fail)?;
    let instance = config.instantiate(Path::new(".")).map_err(fail)?;
    let mut rows = Vec::new();
    for kind in SchedulerKind::ALL {
        let mut engine = EngineConfig::new(kind);
        engine.k_paths = config.k_paths;
        let out = simulate(&config.name, seed, &instance, engine, false).map_err(fail)?;
        rows.push(serde_json::to_value(&out.report.row).map_err(fail)?);
    }
    let links: Vec<Value> = instance
        .network
        .links()
        .iter()
        .map(|l| json!([l.u, l.v, l.capacity]))
        .collect();
    let power: Vec<f64> = instance.network.nodes().iter().map(|n| n.compute_power).collect();
    Ok(json!({"rows": rows, "links": links, "power": power}).to_string())
}
