#![allow(dead_code)]

use edgesched::allocator::Flow;
use edgesched::lpsolver::LinearProgram;
use edgesched::perfmodel::FlowKey;
use edgesched::topology::{EdgeNode, Link, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VERTEX_TOL: f64 = 1e-9;

/// Outcome of exhaustive vertex search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexOutcome {
    Optimal(f64),
    Infeasible,
}

/// Solves `n x n` systems by Gaussian elimination with partial pivoting.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum of a bounded-below program over all basic points: every choice of
/// `n` linearly independent constraints (rows or lower bounds) held tight,
/// kept when the solution satisfies everything. Only meaningful when the
/// optimum is finite.
pub fn vertex_enumeration(lp: &LinearProgram) -> VertexOutcome {
    let n = lp.num_vars();
    let mut tight: Vec<(Vec<f64>, f64)> = lp.eq_rows.clone();
    tight.extend(lp.ineq_rows.iter().cloned());
    for (i, lb) in lp.lower_bounds.iter().enumerate() {
        let mut r = vec![0.0; n];
        r[i] = 1.0;
        tight.push((r, *lb));
    }
    let feasible = |x: &[f64]| {
        let dot = |r: &[f64]| r.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let scale = |b: f64| VERTEX_TOL * (1.0 + b.abs());
        lp.ineq_rows.iter().all(|(r, b)| dot(r) <= b + scale(*b))
            && lp.eq_rows.iter().all(|(r, b)| (dot(r) - b).abs() <= scale(*b))
            && x.iter().zip(&lp.lower_bounds).all(|(v, lb)| *v >= lb - scale(*lb))
    };
    let mut best: Option<f64> = None;
    let mut visit = |chosen: &[usize]| {
        let a = chosen.iter().map(|&c| tight[c].0.clone()).collect();
        let b = chosen.iter().map(|&c| tight[c].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let z: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.is_none_or(|bz| z < bz) {
                    best = Some(z);
                }
            }
        }
    };
    combinations(tight.len(), n, 0, &mut Vec::with_capacity(n), &mut visit);
    match best {
        Some(z) => VertexOutcome::Optimal(z),
        None => VertexOutcome::Infeasible,
    }
}

fn combinations(total: usize, k: usize, start: usize, pick: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        visit(pick);
        return;
    }
    for i in start..total {
        if total - i < k - pick.len() {
            break;
        }
        pick.push(i);
        combinations(total, k, i + 1, pick, visit);
        pick.pop();
    }
}

/// Random program with at most `max_vars` variables and `max_rows` rows,
/// kept bounded by a final `Σx ≤ U` row.
pub fn random_lp(rng: &mut ChaCha8Rng, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.random_range(1..=max_vars);
    let mut lp = LinearProgram::new(n);
    for c in &mut lp.objective {
        *c = rng.random_range(-5..=5) as f64;
    }
    for lb in &mut lp.lower_bounds {
        *lb = if rng.random_bool(0.3) { rng.random_range(0..=2) as f64 } else { 0.0 };
    }
    let rows = rng.random_range(1..=max_rows - 1);
    for _ in 0..rows {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=6) as f64).collect();
        let rhs = rng.random_range(-3..=20) as f64;
        match rng.random_range(0..6) {
            0 => lp.add_eq(row, rhs),
            1 => lp.add_ge(row, rhs),
            _ => lp.add_le(row, rhs),
        }
    }
    let total = lp.lower_bounds.iter().sum::<f64>() + rng.random_range(5..=30) as f64;
    lp.add_le(vec![1.0; n], total);
    lp
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn flow(job: &str, src: usize, dst: usize, volume: f64) -> Flow {
    Flow {
        src,
        dst,
        volume,
        job: job.to_string(),
        key: FlowKey::Input { dst },
    }
}

/// Connected graph: a random spanning tree plus extra random links.
pub fn random_network(rng: &mut ChaCha8Rng, nodes: usize, extra: usize) -> Network {
    let node_list = (0..nodes)
        .map(|i| EdgeNode::new(i, rng.random_range(1..=20) as f64 * 5.0, rng.random_range(1..=8) as f64))
        .collect();
    let mut links = Vec::new();
    let mut have = std::collections::BTreeSet::new();
    for v in 1..nodes {
        let u = rng.random_range(0..v);
        have.insert((u, v));
        links.push(Link::new(u, v, rng.random_range(1..=12) as f64));
    }
    for _ in 0..extra {
        let u = rng.random_range(0..nodes);
        let v = rng.random_range(0..nodes);
        let key = (u.min(v), u.max(v));
        if u != v && have.insert(key) {
            links.push(Link::new(key.0, key.1, rng.random_range(1..=12) as f64));
        }
    }
    Network::new(node_list, links).expect("valid random network")
}

/// Snapshot of every mutable quantity of a network, compared bit for bit.
pub fn state_bits(net: &Network) -> Vec<u64> {
    let mut out = Vec::new();
    for n in net.nodes() {
        out.push(n.mem_available.to_bits());
        out.push(n.reserved().to_bits());
    }
    for l in net.links() {
        out.push(l.allocated.to_bits());
        out.push(l.residual().to_bits());
    }
    out
}
