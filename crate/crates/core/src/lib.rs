//! Joint task placement and flow scheduling for collaborative edge computing.
//!
//! Streaming jobs are DAGs of tasks. A job's tasks are placed greedily on
//! heterogeneous edge nodes, the resulting inter-node flows are routed and
//! given rates by rounding a linear relaxation, and an event-driven simulator
//! runs online schedulers and baselines against Poisson job arrivals.

// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod baselines;
pub mod engine;
pub mod harness;
pub mod jobgraph;
pub mod jrba;
pub mod lpsolver;
pub mod perfmodel;
pub mod topology;

pub use allocator::{allocate_tasks, Allocation, Flow};
pub use engine::{run_to_completion, EngineConfig, JobRecord, SchedulerKind, SchedulerState};
pub use jobgraph::{Job, Task};
pub use jrba::{jrba, FlowPlan};
pub use perfmodel::{job_period, Placement};
pub use topology::{EdgeNode, Link, Network};
