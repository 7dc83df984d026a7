//! Dense two-phase primal simplex.
//!
//! Problems are stated as `min c·x` subject to `A_le x <= b_le`,
//! `A_eq x = b_eq` and `x >= lower_bounds`. Entering and leaving variables are
//! chosen with Bland's rule, so the method terminates on degenerate problems.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest magnitude accepted as a pivot element.
pub const PIVOT_TOL: f64 = 1e-9;
/// Reduced costs above `-OPTIMALITY_TOL` count as non-improving.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Constraint violation tolerated by [`check_feasible`].
pub const FEASIBILITY_TOL: f64 = 1e-7;

const MAX_PIVOTS: usize = 200_000;
/// Pivots between rebuilds of the tableau from the initial rows.
const REFRESH_EVERY: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} has {found} coefficients, expected {expected}")]
    DimensionMismatch {
        row: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Rows `a·x <= b`.
    pub ineq_rows: Vec<(Vec<f64>, f64)>,
    /// Rows `a·x = b`.
    pub eq_rows: Vec<(Vec<f64>, f64)>,
    pub lower_bounds: Vec<f64>,
    pub names: Vec<String>,
}

impl LinearProgram {
    /// `n` variables with zero objective and zero lower bounds.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            ineq_rows: Vec::new(),
            eq_rows: Vec::new(),
            lower_bounds: vec![0.0; n],
            names: (0..n).map(|i| format!("x{i}")).collect(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq_rows.push((row, rhs));
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq_rows.push((row.into_iter().map(|a| -a).collect(), -rhs));
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push((row, rhs));
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) {
            return Err(LpError::NonFinite("objective".into()));
        }
        if self.lower_bounds.len() != n {
            return Err(LpError::DimensionMismatch {
                row: "lower_bounds".into(),
                expected: n,
                found: self.lower_bounds.len(),
            });
        }
        if !finite(&self.lower_bounds) {
            return Err(LpError::NonFinite("lower_bounds".into()));
        }
        let rows = self
            .ineq_rows
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("le{i}"), r))
            .chain(self.eq_rows.iter().enumerate().map(|(i, r)| (format!("eq{i}"), r)));
        for (name, (row, rhs)) in rows {
            if row.len() != n {
                return Err(LpError::DimensionMismatch {
                    row: name,
                    expected: n,
                    found: row.len(),
                });
            }
            if !finite(row) || !rhs.is_finite() {
                return Err(LpError::NonFinite(name));
            }
        }
        Ok(())
    }
}

/// Plain-text tableau dump for triage.
impl fmt::Display for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.names.iter().map(String::len).max().unwrap_or(1).max(10);
        write!(f, "{:>6} ", "")?;
        for name in &self.names {
            write!(f, "{name:>width$} ")?;
        }
        writeln!(f, "| {:>2} {:>width$}", "", "rhs")?;
        let line = |f: &mut fmt::Formatter<'_>, label: &str, row: &[f64], sense: &str, rhs: Option<f64>| {
            write!(f, "{label:>6} ")?;
            for a in row {
                write!(f, "{a:>width$.4} ")?;
            }
            match rhs {
                Some(b) => writeln!(f, "| {sense:>2} {b:>width$.4}"),
                None => writeln!(f, "|"),
            }
        };
        line(f, "min", &self.objective, "", None)?;
        for (i, (row, b)) in self.ineq_rows.iter().enumerate() {
            line(f, &format!("le{i}"), row, "<=", Some(*b))?;
        }
        for (i, (row, b)) in self.eq_rows.iter().enumerate() {
            line(f, &format!("eq{i}"), row, "=", Some(*b))?;
        }
        line(f, "lb", &self.lower_bounds, "", None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
}

impl LpSolution {
    fn without_point(status: LpStatus, n: usize) -> Self {
        let objective_value = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        Self {
            values: vec![f64::NAN; n],
            objective_value,
            status,
        }
    }
}

/// True when `point` satisfies every row and bound of `lp` within [`FEASIBILITY_TOL`].
pub fn check_feasible(lp: &LinearProgram, point: &[f64]) -> bool {
    if point.len() != lp.num_vars() || point.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let dot = |row: &[f64]| row.iter().zip(point).map(|(a, x)| a * x).sum::<f64>();
    lp.lower_bounds
        .iter()
        .zip(point)
        .all(|(lb, x)| *x >= lb - FEASIBILITY_TOL)
        && lp.ineq_rows.iter().all(|(row, b)| dot(row) <= b + FEASIBILITY_TOL)
        && lp
            .eq_rows
            .iter()
            .all(|(row, b)| (dot(row) - b).abs() <= FEASIBILITY_TOL)
}

/// Dense tableau. Row `m` holds reduced costs; its last entry is `-z`.
struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    /// Initial constraint rows, for rebuilding the tableau from the basis.
    original: Vec<f64>,
    /// Initial row behind each current row.
    row_ids: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn cost_row(&self) -> usize {
        self.rows
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let p = self.at(r, q);
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.data.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let factor = row[q];
            if factor != 0.0 {
                for (v, pv) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= factor * pv;
                }
                row[q] = 0.0;
            }
        }
        self.basis[r] = q;
    }

    /// Loads reduced costs for `cost` (indexed by column) given the current basis.
    fn price(&mut self, cost: &[f64]) {
        let w = self.width;
        let m = self.rows;
        let mut z = vec![0.0; w];
        z[..cost.len()].copy_from_slice(cost);
        for r in 0..m {
            let cb = cost.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (zc, v) in z.iter_mut().zip(&self.data[r * w..(r + 1) * w]) {
                    *zc -= cb * v;
                }
            }
        }
        self.data[m * w..(m + 1) * w].copy_from_slice(&z);
    }

    fn drop_row(&mut self, r: usize) {
        let w = self.width;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.row_ids.remove(r);
        self.rows -= 1;
    }

    /// Recomputes the constraint rows for the current basis from the initial
    /// rows, using partial pivoting. Keeps the old rows if the basis looks
    /// singular.
    fn refactor(&mut self) {
        let w = self.width;
        let m = self.rows;
        let mut t: Vec<f64> = Vec::with_capacity(m * w);
        for &id in &self.row_ids {
            t.extend_from_slice(&self.original[id * w..(id + 1) * w]);
        }
        let mut owner = vec![usize::MAX; m];
        for &j in &self.basis {
            let Some(r) = (0..m)
                .filter(|&r| owner[r] == usize::MAX)
                .max_by(|&a, &b| t[a * w + j].abs().total_cmp(&t[b * w + j].abs()))
            else {
                return;
            };
            let p = t[r * w + j];
            if p.abs() < 1e-12 {
                return;
            }
            for v in &mut t[r * w..(r + 1) * w] {
                *v /= p;
            }
            let pivot_row = t[r * w..(r + 1) * w].to_vec();
            for (i, row) in t.chunks_mut(w).enumerate() {
                let factor = row[j];
                if i != r && factor != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= factor * pv;
                    }
                    row[j] = 0.0;
                }
            }
            owner[r] = j;
        }
        self.data[..m * w].copy_from_slice(&t);
        self.basis = owner;
    }

    /// Fresh constraint rows and reduced costs.
    fn refresh(&mut self, cost: &[f64]) {
        self.refactor();
        self.price(cost);
    }

    /// Bland's-rule simplex over columns `< allowed`. Returns false when the
    /// entering column has no pivot row (unbounded).
    ///
    /// The tableau is rebuilt from the initial rows every [`REFRESH_EVERY`]
    /// pivots and before either verdict, so accumulated rounding cannot end a
    /// phase early.
    fn run(&mut self, allowed: usize, cost: &[f64], pivots: &mut usize) -> Result<bool, LpError> {
        let z = self.cost_row();
        let mut fresh = false;
        loop {
            let Some(q) = (0..allowed).find(|&j| self.at(z, j) < -OPTIMALITY_TOL) else {
                if fresh {
                    return Ok(true);
                }
                self.refresh(cost);
                fresh = true;
                continue;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, q);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((best, best_ratio)) => {
                            let tie = (ratio - best_ratio).abs() <= 1e-12 * best_ratio.abs().max(1.0);
                            if ratio < best_ratio && !tie || tie && self.basis[r] < self.basis[best] {
                                Some((r, ratio))
                            } else {
                                Some((best, best_ratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                if fresh {
                    return Ok(false);
                }
                self.refresh(cost);
                fresh = true;
                continue;
            };
            self.pivot(r, q);
            *pivots += 1;
            fresh = false;
            if pivots.is_multiple_of(REFRESH_EVERY) {
                self.refresh(cost);
                fresh = true;
            }
            if *pivots > MAX_PIVOTS {
                return Err(LpError::IterationLimit(MAX_PIVOTS));
            }
        }
    }
}

/// Solves `lp`. Malformed input is rejected; infeasibility and unboundedness
/// are reported through [`LpSolution::status`].
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let shift = |row: &[f64], b: f64| b - row.iter().zip(&lp.lower_bounds).map(|(a, l)| a * l).sum::<f64>();

    let n_le = lp.ineq_rows.len();
    let m = n_le + lp.eq_rows.len();
    // Rows needing an artificial: flipped inequalities and every equality.
    let mut rows: Vec<(Vec<f64>, f64, Option<f64>)> = Vec::with_capacity(m);
    for (row, b) in &lp.ineq_rows {
        let rhs = shift(row, *b);
        if rhs >= 0.0 {
            rows.push((row.clone(), rhs, Some(1.0)));
        } else {
            rows.push((row.iter().map(|a| -a).collect(), -rhs, Some(-1.0)));
        }
    }
    for (row, b) in &lp.eq_rows {
        let rhs = shift(row, *b);
        if rhs >= 0.0 {
            rows.push((row.clone(), rhs, None));
        } else {
            rows.push((row.iter().map(|a| -a).collect(), -rhs, None));
        }
    }
    let needs_art: Vec<bool> = rows
        .iter()
        .map(|(_, _, slack)| !matches!(slack, Some(s) if *s > 0.0))
        .collect();
    let n_art = needs_art.iter().filter(|x| **x).count();
    let art_start = n + n_le;
    let width = art_start + n_art + 1;

    let mut tab = Tableau {
        rows: m,
        width,
        data: vec![0.0; (m + 1) * width],
        basis: vec![0; m],
        original: Vec::new(),
        row_ids: (0..m).collect(),
    };
    let mut next_art = art_start;
    for (r, (row, rhs, slack)) in rows.iter().enumerate() {
        let base = r * width;
        tab.data[base..base + n].copy_from_slice(row);
        if let Some(s) = slack {
            tab.data[base + n + r] = *s;
        }
        tab.data[base + width - 1] = *rhs;
        if needs_art[r] {
            tab.data[base + next_art] = 1.0;
            tab.basis[r] = next_art;
            next_art += 1;
        } else {
            tab.basis[r] = n + r;
        }
    }

    tab.original = tab.data[..m * width].to_vec();

    let mut pivots = 0;
    if n_art > 0 {
        let mut phase1 = vec![0.0; width - 1];
        for c in phase1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        tab.price(&phase1);
        tab.run(width - 1, &phase1, &mut pivots)?;
        let infeasibility = -tab.at(tab.cost_row(), width - 1);
        if infeasibility > FEASIBILITY_TOL {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, n));
        }
        // Drive artificials out of the basis; rows where that is impossible are redundant.
        let mut r = 0;
        while r < tab.rows {
            if tab.basis[r] >= art_start {
                match (0..art_start).find(|&j| tab.at(r, j).abs() > PIVOT_TOL) {
                    Some(q) => tab.pivot(r, q),
                    None => {
                        tab.drop_row(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    let mut cost = vec![0.0; art_start];
    cost[..n].copy_from_slice(&lp.objective);
    tab.price(&cost);
    if !tab.run(art_start, &cost, &mut pivots)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, n));
    }

    let mut values = lp.lower_bounds.clone();
    for r in 0..tab.rows {
        let j = tab.basis[r];
        if j < n {
            values[j] += tab.rhs(r).max(0.0);
        }
    }
    let objective_value = values.iter().zip(&lp.objective).map(|(x, c)| x * c).sum();
    Ok(LpSolution {
        values,
        objective_value,
        status: LpStatus::Optimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lower_bound() {
        // min x s.t. x >= 3
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_ge(vec![1.0], 3.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[0] - 3.0).abs() < 1e-9);
        assert!((sol.objective_value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_equality() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.add_eq(vec![1.0, 1.0], 1.0);
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
        assert!(check_feasible(&lp, &sol.values));
    }

    #[test]
    fn two_dimensional_polytope() {
        // min -x - 2y s.t. x + y <= 4, x <= 2; vertices (0,0),(2,0),(2,2),(0,4).
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -2.0];
        lp.add_le(vec![1.0, 1.0], 4.0);
        lp.add_le(vec![1.0, 0.0], 2.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective_value + 8.0).abs() < 1e-9);
        assert!((sol.values[0]).abs() < 1e-9 && (sol.values[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_le(vec![1.0], -1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, 0.0];
        lp.add_le(vec![-1.0, 1.0], 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn nonzero_lower_bounds_shift_the_problem() {
        // min x + y s.t. x + y >= 1, x >= 2, y >= -0.5
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.lower_bounds = vec![2.0, -0.5];
        lp.add_ge(vec![1.0, 1.0], 1.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective_value - 1.5).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add_eq(vec![1.0, 1.0], 2.0);
        lp.add_eq(vec![2.0, 2.0], 4.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective_value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn feasibility_checks() {
        let mut lp = LinearProgram::new(2);
        lp.add_le(vec![1.0, 1.0], 4.0);
        assert!(check_feasible(&lp, &[0.0, 4.0]));
        assert!(!check_feasible(&lp, &[-1.0, 0.0]));
        assert!(!check_feasible(&lp, &[3.0, 3.0]));
    }

    #[test]
    fn malformed_rows_rejected() {
        let mut lp = LinearProgram::new(2);
        lp.add_le(vec![1.0], 1.0);
        assert!(matches!(solve(&lp), Err(LpError::DimensionMismatch { .. })));
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![f64::NAN];
        assert!(matches!(solve(&lp), Err(LpError::NonFinite(_))));
    }

    #[test]
    fn dump_lists_every_row() {
        let mut lp = LinearProgram::new(2);
        lp.add_le(vec![1.0, 1.0], 4.0);
        lp.add_eq(vec![1.0, -1.0], 0.0);
        let text = lp.to_string();
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("le0") && text.contains("eq0"));
    }
}
