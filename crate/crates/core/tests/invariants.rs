mod common;

use common::{flow, random_network, rng, state_bits};
use edgesched::allocator::{allocate_tasks, rollback};
use edgesched::engine::{generate_arrivals, run_to_completion_with, EngineConfig, SchedulerKind, SchedulerState};
use edgesched::jobgraph::Job;
use edgesched::jrba::{build_relaxed_lp, candidate_paths, jrba, oracle_over, plan};
use edgesched::lpsolver::{check_feasible, solve, LpStatus};
use proptest::prelude::*;
use rand::Rng;

fn random_flows(seed: u64, nodes: usize, count: usize) -> Vec<edgesched::allocator::Flow> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| {
            let src = r.random_range(0..nodes);
            let mut dst = r.random_range(0..nodes);
            if dst == src {
                dst = (src + 1) % nodes;
            }
            flow(&format!("job{}", i % 3), src, dst, r.random_range(1..=10) as f64 * 0.5)
        })
        .collect()
}

fn small_job(id: &str, source: usize, mem: f64) -> Job {
    Job::builder(id, source, 2.0)
        .task("src", 5.0, mem)
        .task("det", 60.0, mem)
        .task("rec", 30.0, mem)
        .edge(0, 1, 1.0)
        .edge(1, 2, 0.2)
        .stream_length(5)
        .build()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn committing_then_releasing_restores_links_exactly(seed in 0u64..1_000_000, nodes in 3usize..=8, count in 1usize..=6) {
        let mut net = random_network(&mut rng(seed), nodes, nodes);
        let before = state_bits(&net);
        let flows = random_flows(seed ^ 1, nodes, count);
        if jrba(&mut net, &flows, 3).is_ok() {
            prop_assert!(net.max_overallocation() <= 1e-9);
            for owner in ["job0", "job1", "job2"] {
                if net.holds_bandwidth(owner) {
                    net.release_bandwidth(owner).unwrap();
                }
            }
        }
        prop_assert_eq!(state_bits(&net), before);
    }

    #[test]
    fn relaxed_program_solutions_are_feasible_and_bound_the_rounding(seed in 0u64..1_000_000, nodes in 3usize..=7, count in 1usize..=4) {
        let net = random_network(&mut rng(seed), nodes, nodes / 2 + 1);
        let flows = random_flows(seed ^ 7, nodes, count);
        let pathsets = candidate_paths(&net, &flows, 3).unwrap();
        let (lp, _) = build_relaxed_lp(&net, &flows, &pathsets).unwrap();
        let s = solve(&lp).unwrap();
        prop_assert_eq!(s.status, LpStatus::Optimal);
        prop_assert!(check_feasible(&lp, &s.values));
        let rounded = plan(&net, &flows, 3).unwrap();
        let best = oracle_over(&net, &flows, &pathsets).unwrap();
        prop_assert!(s.objective_value <= best.period + 1e-7);
        prop_assert!(best.period <= rounded.period + 1e-7);
    }

    #[test]
    fn placement_rollback_restores_memory_exactly(seed in 0u64..1_000_000, mem in 1usize..=6) {
        let mut net = random_network(&mut rng(seed), 6, 4);
        let before = state_bits(&net);
        let job = small_job("j", (seed % 6) as usize, mem as f64 * 0.75);
        if allocate_tasks(&mut net, &job, 3).is_ok() {
            rollback(&mut net, &job).unwrap();
        }
        prop_assert_eq!(state_bits(&net), before);
    }

    #[test]
    fn engine_keeps_link_accounting_and_returns_everything(seed in 0u64..1_000_000, kind in 0usize..5) {
        let kind = SchedulerKind::ALL[kind];
        let net0 = random_network(&mut rng(seed), 6, 5);
        let templates = [small_job("t", 0, 1.0), small_job("u", 0, 2.5)];
        // Liveness needs one node that fits the largest job whole.
        prop_assume!(net0.nodes().iter().any(|n| n.mem_capacity >= templates[1].total_memory()));
        let jobs = generate_arrivals(&templates, 12, 1.0, 6, seed).unwrap();
        let mut net = net0.clone();
        let mut state = SchedulerState::new(jobs, EngineConfig::new(kind)).unwrap();
        let mut violation = None;
        let records = run_to_completion_with(&mut state, &mut net, |s, n| {
            if violation.is_none() {
                violation = s.check_accounting(n).err();
            }
        })
        .unwrap();
        prop_assert_eq!(violation, None);
        prop_assert!(records.iter().all(|r| r.finish.is_some()));
        for r in &records {
            let (s, f) = (r.scheduled.unwrap(), r.finish.unwrap());
            prop_assert!(r.arrival <= s && s <= f);
        }
        prop_assert_eq!(state_bits(&net), state_bits(&net0));
    }
}
