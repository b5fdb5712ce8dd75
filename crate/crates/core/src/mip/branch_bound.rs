//! Branch-and-bound over the bounded-variable simplex.
//!
//! Nodes are fixings of binary variables; each node LP is warm-started
//! from the previous one with the dual simplex and falls back to a cold
//! solve on numerical trouble. Branching picks the most fractional
//! binary (lowest index on ties); node selection dives depth-first
//! until an incumbent exists, then switches to best bound. Every
//! candidate incumbent is re-polished with its binaries fixed exactly
//! and certified by the independent auditor before acceptance.

use alloc::vec;
use alloc::vec::Vec;

use super::audit::audit_assignment;
use super::model::{ConstraintSense, MipModel, ObjectiveSense, VarKind};
use super::simplex::{LpStatus, Simplex};
use crate::error::{solver_err, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relative optimality gap at which a node is pruned.
    pub mip_gap: f64,
    /// Wall-clock budget; only enforced when the `std` feature is on.
    pub time_limit_seconds: f64,
    /// Tolerance used when certifying incumbents.
    pub feasibility_tol: f64,
    /// A binary within this distance of 0 or 1 counts as integral.
    pub int_tol: f64,
    /// Hard cap on explored nodes; exceeded caps report `TimeLimit`.
    pub node_limit: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mip_gap: 1e-4,
            time_limit_seconds: 600.0,
            feasibility_tol: 1e-6,
            int_tol: 1e-6,
            node_limit: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    /// Proven optimal (no node was discarded by the gap cutoff).
    Optimal,
    /// Feasible and within `mip_gap` of optimal.
    FeasibleGap,
    Infeasible,
    /// Stopped on the time or node budget; the incumbent, if any, is
    /// feasible but unproven.
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub status: SolveStatus,
    /// Objective in the model's own sense; NaN when no feasible point
    /// was found.
    pub objective: f64,
    pub assignment: Vec<f64>,
    /// Achieved relative gap (0 when proven optimal).
    pub gap: f64,
    pub nodes: u64,
    pub simplex_iterations: u64,
    pub wall_time_seconds: f64,
}

/// Per-binary fixing: 0 = free (original bounds), 1 = fixed to 0,
/// 2 = fixed to 1.
type NodeState = Vec<u8>;

struct Node {
    state: NodeState,
    /// Parent LP objective (minimization sense): a lower bound.
    bound: f64,
    seq: u64,
}

struct Clock {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }
    fn elapsed(&self) -> f64 {
        #[cfg(feature = "std")]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

struct Searcher<'a> {
    model: &'a MipModel,
    config: &'a SolverConfig,
    simplex: Simplex,
    binaries: Vec<usize>,
    orig_bounds: Vec<(f64, f64)>,
    current: NodeState,
    maximize: bool,
    incumbent: Option<(f64, Vec<f64>)>, // (min-sense objective, assignment)
    /// Tightest bound among nodes discarded by the gap cutoff while
    /// still below the incumbent; drives the reported gap.
    discarded_bound: Option<f64>,
    /// Root LP point, reduced costs, and bound for reduced-cost fixing.
    root_x: Vec<f64>,
    root_dj: Vec<f64>,
    root_bound: f64,
    /// Permanent fixings proven by root reduced costs against the current
    /// cutoff: a nonbasic binary whose reduced cost exceeds the remaining
    /// objective headroom can never flip in an improving solution. Same
    /// encoding as `NodeState`; overrides every node's state.
    forced: Vec<u8>,
    /// Per-binary sparse column (row index, coefficient) and min-sense
    /// objective coefficient, for the incumbent local search.
    bin_cols: Vec<Vec<(usize, f64)>>,
    bin_cost: Vec<f64>,
}

fn row_within(sense: ConstraintSense, activity: f64, rhs: f64, tol: f64) -> bool {
    match sense {
        ConstraintSense::Le => activity <= rhs + tol,
        ConstraintSense::Ge => activity >= rhs - tol,
        ConstraintSense::Eq => (activity - rhs).abs() <= tol,
    }
}

impl<'a> Searcher<'a> {
    fn gap_slack(&self, inc: f64) -> f64 {
        self.config.mip_gap * inc.abs().max(1.0)
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((inc, _)) => inc - self.gap_slack(*inc),
            None => f64::INFINITY,
        }
    }

    fn note_discard(&mut self, bound: f64) {
        if let Some((inc, _)) = &self.incumbent {
            if bound < *inc {
                let better = self.discarded_bound.map_or(true, |b| bound < b);
                if better {
                    self.discarded_bound = Some(bound);
                }
            }
        }
    }

    /// Moves the simplex to `state` (with proven fixings overriding),
    /// touching only bindings that differ.
    fn apply_state(&mut self, state: &NodeState) {
        let mut effective = state.clone();
        for (e, &f) in effective.iter_mut().zip(self.forced.iter()) {
            if f != 0 {
                *e = f;
            }
        }
        for (k, (&new, &old)) in effective.iter().zip(self.current.iter()).enumerate() {
            if new == old {
                continue;
            }
            let j = self.binaries[k];
            let (lo, hi) = match new {
                0 => self.orig_bounds[k],
                1 => (0.0, 0.0),
                _ => (1.0, 1.0),
            };
            self.simplex.set_var_bounds(j, lo, hi);
        }
        self.current = effective;
    }

    /// Re-derive the permanent fixings from the root solution: any
    /// feasible point pays at least the root bound plus each nonbasic
    /// variable's reduced cost per unit moved off its bound, so a binary
    /// whose move costs more than the distance to the cutoff is settled.
    fn refresh_forced(&mut self) {
        let Some((inc, _)) = &self.incumbent else {
            return;
        };
        let margin = (inc - self.gap_slack(*inc)) - self.root_bound;
        for (k, &j) in self.binaries.iter().enumerate() {
            if self.forced[k] != 0 {
                continue;
            }
            let dj = self.root_dj[j];
            if self.root_x[j] <= self.config.int_tol && dj > margin + 1e-9 {
                self.forced[k] = 1;
            } else if self.root_x[j] >= 1.0 - self.config.int_tol && -dj > margin + 1e-9 {
                self.forced[k] = 2;
            }
        }
    }

    /// First-improvement local search on the binary block of a feasible
    /// point: drop/add single binaries, then exchange an expensive set
    /// binary for a cheaper unset one, accepting only moves that keep
    /// every row inside its bounds (continuous variables stay put).
    /// Deterministic: candidates are scanned in index / ascending-cost
    /// order. Deep dives tend to produce incumbents with redundant set
    /// binaries, and pruning alone never repairs those.
    fn polish_binaries(&self, x: &mut [f64]) {
        let tol = self.config.feasibility_tol;
        let rows = &self.model.constraints;
        let mut act: Vec<f64> = rows
            .iter()
            .map(|c| c.terms.iter().map(|&(j, a)| a * x[j.0]).sum())
            .collect();
        let nb = self.binaries.len();
        // Unset binaries in ascending cost order, for the exchange scan.
        let mut by_cost: Vec<usize> = (0..nb).collect();
        by_cost.sort_by(|&a, &b| {
            self.bin_cost[a]
                .partial_cmp(&self.bin_cost[b])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut delta = vec![0.0f64; rows.len()];
        for _pass in 0..30 {
            let mut improved = false;
            for k in 0..nb {
                let j = self.binaries[k];
                let d = if x[j] > 0.5 { -1.0 } else { 1.0 };
                if d * self.bin_cost[k] >= -1e-9 {
                    continue;
                }
                let ok = self.bin_cols[k]
                    .iter()
                    .all(|&(i, a)| row_within(rows[i].sense, act[i] + d * a, rows[i].rhs, tol));
                if ok {
                    x[j] += d;
                    for &(i, a) in &self.bin_cols[k] {
                        act[i] += d * a;
                    }
                    improved = true;
                }
            }
            'outer: for k in 0..nb {
                if x[self.binaries[k]] < 0.5 {
                    continue;
                }
                for &l in &by_cost {
                    if self.bin_cost[l] >= self.bin_cost[k] - 1e-9 {
                        break;
                    }
                    if x[self.binaries[l]] > 0.5 {
                        continue;
                    }
                    for &(i, a) in &self.bin_cols[k] {
                        delta[i] -= a;
                    }
                    for &(i, a) in &self.bin_cols[l] {
                        delta[i] += a;
                    }
                    let ok = self
                        .bin_cols[k]
                        .iter()
                        .chain(self.bin_cols[l].iter())
                        .all(|&(i, _)| row_within(rows[i].sense, act[i] + delta[i], rows[i].rhs, tol));
                    if ok {
                        for &(i, _) in self.bin_cols[k].iter().chain(self.bin_cols[l].iter()) {
                            act[i] += delta[i];
                            delta[i] = 0.0;
                        }
                        x[self.binaries[k]] = 0.0;
                        x[self.binaries[l]] = 1.0;
                        improved = true;
                        continue 'outer;
                    }
                    for &(i, _) in self.bin_cols[k].iter().chain(self.bin_cols[l].iter()) {
                        delta[i] = 0.0;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }

    fn evaluate_current(&mut self) -> Result<LpStatus> {
        match self.simplex.reoptimize_dual() {
            // Infeasibility prunes a whole subtree, so never trust it from
            // a warm start alone: confirm with a from-scratch solve.
            Ok(LpStatus::Infeasible) => self.simplex.solve_fresh(),
            Ok(s) => Ok(s),
            // Stalled warm start: rebuild from scratch under the same bounds.
            Err(_) => self.simplex.solve_fresh(),
        }
    }

    fn fractional_branch_var(&self) -> Option<usize> {
        let x = self.simplex.assignment();
        let mut best: Option<(usize, f64)> = None;
        for (k, &j) in self.binaries.iter().enumerate() {
            let f = x[j].clamp(0.0, 1.0);
            let frac = f.min(1.0 - f);
            if frac > self.config.int_tol && best.map_or(true, |(_, bf)| frac > bf) {
                best = Some((k, frac));
            }
        }
        best.map(|(k, _)| k)
    }

    /// Fixes the binaries of the current LP point exactly, re-solves for
    /// the continuous variables, audits, and installs the incumbent if it
    /// wins. Leaves `self.current` at the fixed state.
    fn try_incumbent(&mut self, snapped: NodeState) -> Result<()> {
        self.apply_state(&snapped);
        let status = self.evaluate_current()?;
        if status != LpStatus::Optimal {
            return Ok(());
        }
        let mut assignment = self.simplex.assignment().to_vec();
        for (k, &j) in self.binaries.iter().enumerate() {
            assignment[j] = match snapped[k] {
                1 => 0.0,
                2 => 1.0,
                _ => assignment[j],
            };
        }
        if !audit_assignment(self.model, &assignment, self.config.feasibility_tol).is_empty() {
            return Ok(());
        }
        let before = assignment.clone();
        self.polish_binaries(&mut assignment);
        if assignment != before
            && !audit_assignment(self.model, &assignment, self.config.feasibility_tol).is_empty()
        {
            assignment = before;
        }
        let raw = self.model.objective_value(&assignment);
        let min_obj = if self.maximize { -raw } else { raw };
        let better = match &self.incumbent {
            Some((inc, _)) => min_obj < *inc - 1e-12,
            None => true,
        };
        if better {
            self.incumbent = Some((min_obj, assignment));
            self.refresh_forced();
        }
        Ok(())
    }

    fn snapped_state(&self) -> NodeState {
        let x = self.simplex.assignment();
        self.binaries
            .iter()
            .map(|&j| if x[j] < 0.5 { 1u8 } else { 2u8 })
            .collect()
    }
}

/// Solves a mixed-binary linear program to the configured gap.
pub fn solve(model: &MipModel, config: &SolverConfig) -> Result<MipSolution> {
    model.validate()?;
    let clock = Clock::start();
    let maximize = model.objective_sense == ObjectiveSense::Maximize;
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let orig_bounds: Vec<(f64, f64)> = binaries
        .iter()
        .map(|&j| (model.variables[j].lower, model.variables[j].upper))
        .collect();
    let mut simplex = Simplex::new(model)?;
    let root_status = simplex.solve_fresh()?;
    let mut nodes: u64 = 1;
    match root_status {
        LpStatus::Infeasible => {
            return Ok(MipSolution {
                status: SolveStatus::Infeasible,
                objective: f64::NAN,
                assignment: Vec::new(),
                gap: 0.0,
                nodes,
                simplex_iterations: simplex.iterations,
                wall_time_seconds: clock.elapsed(),
            });
        }
        LpStatus::Unbounded => {
            return Err(solver_err!("LP relaxation is unbounded"));
        }
        LpStatus::Optimal => {}
    }
    let root_bound = simplex.min_objective();
    let root_x = simplex.assignment().to_vec();
    let root_dj = simplex.reduced_costs().to_vec();
    let n_bin = binaries.len();
    let mut bin_pos = vec![usize::MAX; model.num_vars()];
    for (k, &j) in binaries.iter().enumerate() {
        bin_pos[j] = k;
    }
    let mut bin_cols = vec![Vec::new(); n_bin];
    for (i, c) in model.constraints.iter().enumerate() {
        for &(j, a) in &c.terms {
            if bin_pos[j.0] != usize::MAX {
                bin_cols[bin_pos[j.0]].push((i, a));
            }
        }
    }
    let mut bin_cost = vec![0.0; n_bin];
    for &(j, c) in &model.objective {
        if bin_pos[j.0] != usize::MAX {
            bin_cost[bin_pos[j.0]] += if maximize { -c } else { c };
        }
    }
    let mut s = Searcher {
        model,
        config,
        simplex,
        binaries,
        orig_bounds,
        current: vec![0u8; n_bin],
        maximize,
        incumbent: None,
        discarded_bound: None,
        root_x,
        root_dj,
        root_bound,
        forced: vec![0u8; n_bin],
        bin_cols,
        bin_cost,
    };

    if n_bin == 0 {
        let assignment = s.simplex.assignment().to_vec();
        let objective = s.simplex.objective();
        return Ok(MipSolution {
            status: SolveStatus::Optimal,
            objective,
            assignment,
            gap: 0.0,
            nodes,
            simplex_iterations: s.simplex.iterations,
            wall_time_seconds: clock.elapsed(),
        });
    }

    // Rounding heuristic: fix every binary to its rounded root-LP value
    // and see whether the restricted LP yields a feasible point.
    let rounded = s.snapped_state();
    s.try_incumbent(rounded)?;

    let mut pool: Vec<Node> = vec![Node {
        state: vec![0u8; n_bin],
        bound: root_bound,
        seq: 0,
    }];
    let mut seq: u64 = 1;
    let mut hit_limit = false;

    while !pool.is_empty() {
        if clock.elapsed() > config.time_limit_seconds || nodes >= config.node_limit {
            hit_limit = true;
            break;
        }
        // Depth-first dive until an incumbent exists, then best bound.
        // Ties on bound go to the most recently created node.
        let pick = if s.incumbent.is_none() {
            let mut best = 0usize;
            for i in 1..pool.len() {
                if pool[i].seq > pool[best].seq {
                    best = i;
                }
            }
            best
        } else {
            let mut best = 0usize;
            for i in 1..pool.len() {
                let (a, b) = (&pool[i], &pool[best]);
                if a.bound < b.bound || (a.bound == b.bound && a.seq > b.seq) {
                    best = i;
                }
            }
            best
        };
        let node = pool.swap_remove(pick);
        if node.bound >= s.cutoff() {
            s.note_discard(node.bound);
            continue;
        }
        s.apply_state(&node.state);
        let status = s.evaluate_current()?;
        nodes += 1;
        if status != LpStatus::Optimal {
            continue;
        }
        let obj = s.simplex.min_objective();
        if obj >= s.cutoff() {
            s.note_discard(obj);
            continue;
        }
        match s.fractional_branch_var() {
            None => {
                let snapped = s.snapped_state();
                s.try_incumbent(snapped)?;
            }
            Some(k) => {
                let x = s.simplex.assignment()[s.binaries[k]];
                let preferred: u8 = if x < 0.5 { 1 } else { 2 };
                let other: u8 = if preferred == 1 { 2 } else { 1 };
                for fix in [other, preferred] {
                    let mut state = node.state.clone();
                    state[k] = fix;
                    pool.push(Node {
                        state,
                        bound: obj,
                        seq,
                    });
                    seq += 1;
                }
            }
        }
    }
    let wall = clock.elapsed();
    let iterations = s.simplex.iterations;
    match s.incumbent {
        Some((min_obj, assignment)) => {
            let objective = if maximize { -min_obj } else { min_obj };
            let mut best_open = s.discarded_bound;
            if hit_limit {
                for n in &pool {
                    if n.bound < min_obj && best_open.map_or(true, |b| n.bound < b) {
                        best_open = Some(n.bound);
                    }
                }
            }
            let gap = best_open
                .map(|b| ((min_obj - b) / min_obj.abs().max(1.0)).max(0.0))
                .unwrap_or(0.0);
            let status = if hit_limit {
                SolveStatus::TimeLimit
            } else if gap > 0.0 {
                SolveStatus::FeasibleGap
            } else {
                SolveStatus::Optimal
            };
            Ok(MipSolution {
                status,
                objective,
                assignment,
                gap,
                nodes,
                simplex_iterations: iterations,
                wall_time_seconds: wall,
            })
        }
        None => Ok(MipSolution {
            status: if hit_limit {
                SolveStatus::TimeLimit
            } else {
                SolveStatus::Infeasible
            },
            objective: f64::NAN,
            assignment: Vec::new(),
            gap: f64::INFINITY,
            nodes,
            simplex_iterations: iterations,
            wall_time_seconds: wall,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::model::{ConstraintSense, VarId};
    use crate::mip::simplex::{solve_lp_relaxation, LpOutcome};
    use crate::rng;
    use alloc::format;

    fn assert_optimal(sol: &MipSolution) {
        assert!(
            matches!(sol.status, SolveStatus::Optimal | SolveStatus::FeasibleGap),
            "status {:?}",
            sol.status
        );
    }

    #[test]
    fn knapsack_matches_brute_force() {
        // max value subject to one capacity row; 10 items.
        let values = [9.0, 14.0, 5.0, 8.0, 3.0, 11.0, 7.0, 12.0, 6.0, 4.0];
        let weights = [4.0, 7.0, 2.0, 5.0, 1.0, 6.0, 3.0, 7.0, 4.0, 2.0];
        let cap = 17.0;
        let mut m = MipModel::new();
        let xs: Vec<VarId> = (0..10).map(|i| m.add_binary(format!("x{i}"))).collect();
        m.add_constraint(
            "cap",
            xs.iter().zip(weights).map(|(&x, w)| (x, w)).collect(),
            ConstraintSense::Le,
            cap,
        );
        m.set_objective(
            ObjectiveSense::Maximize,
            xs.iter().zip(values).map(|(&x, v)| (x, v)).collect(),
        );
        let sol = solve(&m, &SolverConfig::default()).unwrap();
        assert_optimal(&sol);
        let mut best = 0.0f64;
        for mask in 0u32..1 << 10 {
            let w: f64 = (0..10)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| weights[i])
                .sum();
            if w <= cap {
                let v: f64 = (0..10)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| values[i])
                    .sum();
                best = best.max(v);
            }
        }
        assert!((sol.objective - best).abs() < 1e-6, "{} vs {best}", sol.objective);
        assert!(audit_assignment(&m, &sol.assignment, 1e-6).is_empty());
    }

    #[test]
    fn lp_feasible_ip_infeasible() {
        // 2a + 2b = 3 admits a fractional point but no binary one.
        let mut m = MipModel::new();
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("odd", vec![(a, 2.0), (b, 2.0)], ConstraintSense::Eq, 3.0);
        m.set_objective(ObjectiveSense::Minimize, vec![(a, 1.0), (b, 1.0)]);
        assert!(matches!(
            solve_lp_relaxation(&m).unwrap(),
            LpOutcome::Optimal { .. }
        ));
        let sol = solve(&m, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn pure_lp_model_passes_through() {
        let mut m = MipModel::new();
        let x = m.add_continuous("x", 0.0, 4.0);
        m.add_constraint("r", vec![(x, 1.0)], ConstraintSense::Ge, 1.5);
        m.set_objective(ObjectiveSense::Minimize, vec![(x, 2.0)]);
        let sol = solve(&m, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert_eq!(sol.gap, 0.0);
    }

    /// Oracle for small mixed-binary models: enumerate all binary
    /// patterns, solve the continuous remainder as an LP, keep the best.
    fn enumerate_optimum(m: &MipModel) -> Option<f64> {
        let bins: Vec<usize> = m
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
            .collect();
        assert!(bins.len() <= 16);
        let mut best: Option<f64> = None;
        for mask in 0u32..1 << bins.len() {
            let mut fixed = m.clone();
            for (k, &j) in bins.iter().enumerate() {
                let v = if mask >> k & 1 == 1 { 1.0 } else { 0.0 };
                fixed.variables[j].lower = v;
                fixed.variables[j].upper = v;
            }
            if let LpOutcome::Optimal { objective, .. } = solve_lp_relaxation(&fixed).unwrap() {
                let better = match (best, m.objective_sense) {
                    (None, _) => true,
                    (Some(b), ObjectiveSense::Minimize) => objective < b,
                    (Some(b), ObjectiveSense::Maximize) => objective > b,
                };
                if better {
                    best = Some(objective);
                }
            }
        }
        best
    }

    #[test]
    fn random_mixed_models_match_enumeration() {
        let mut stream = rng::stream(555_000_1);
        for case in 0..25 {
            let n_bin = 4 + rng::uniform_index(&mut stream, 5); // 4..=8
            let n_cont = rng::uniform_index(&mut stream, 3); // 0..=2
            let mut m = MipModel::new();
            let mut vars: Vec<VarId> = (0..n_bin)
                .map(|i| m.add_binary(format!("b{i}")))
                .collect();
            for i in 0..n_cont {
                vars.push(m.add_continuous(format!("x{i}"), 0.0, 3.0));
            }
            let n_rows = 2 + rng::uniform_index(&mut stream, 4);
            for r in 0..n_rows {
                let terms: Vec<(VarId, f64)> = vars
                    .iter()
                    .map(|&v| (v, -2.0 + 4.0 * rng::uniform(&mut stream)))
                    .collect();
                let sense = match rng::uniform_index(&mut stream, 3) {
                    0 => ConstraintSense::Le,
                    1 => ConstraintSense::Ge,
                    _ => ConstraintSense::Le,
                };
                m.add_constraint(
                    format!("r{r}"),
                    terms,
                    sense,
                    -2.0 + 5.0 * rng::uniform(&mut stream),
                );
            }
            let sense = if case % 2 == 0 {
                ObjectiveSense::Minimize
            } else {
                ObjectiveSense::Maximize
            };
            m.set_objective(
                sense,
                vars.iter()
                    .map(|&v| (v, -2.0 + 4.0 * rng::uniform(&mut stream)))
                    .collect(),
            );
            let oracle = enumerate_optimum(&m);
            let sol = solve(&m, &SolverConfig::default()).unwrap();
            match oracle {
                None => assert_eq!(sol.status, SolveStatus::Infeasible, "case {case}"),
                Some(best) => {
                    assert_optimal(&sol);
                    assert!(
                        (sol.objective - best).abs() < 1e-5 * (1.0 + best.abs()),
                        "case {case}: {} vs oracle {best}",
                        sol.objective
                    );
                    assert!(
                        audit_assignment(&m, &sol.assignment, 1e-6).is_empty(),
                        "case {case}: incumbent fails audit"
                    );
                }
            }
        }
    }

    #[test]
    fn covering_instance_like_stealing() {
        // min sum w_j c_j with per-sentence covering rows; brute force 2^12.
        let mut stream = rng::stream(99);
        let n_tok = 12;
        let mut m = MipModel::new();
        let cs: Vec<VarId> = (0..n_tok).map(|j| m.add_binary(format!("c_{j}"))).collect();
        let weights: Vec<f64> = (0..n_tok).map(|_| 0.2 + rng::uniform(&mut stream)).collect();
        for r in 0..6 {
            let terms: Vec<(VarId, f64)> = cs
                .iter()
                .map(|&c| (c, rng::uniform_index(&mut stream, 4) as f64))
                .collect();
            m.add_constraint(format!("g{r}"), terms, ConstraintSense::Ge, 6.0);
        }
        m.add_constraint(
            "budget",
            cs.iter().map(|&c| (c, 1.0)).collect(),
            ConstraintSense::Le,
            6.0,
        );
        m.set_objective(
            ObjectiveSense::Minimize,
            cs.iter().zip(&weights).map(|(&c, &w)| (c, w)).collect(),
        );
        let sol = solve(&m, &SolverConfig::default()).unwrap();
        let mut best: Option<f64> = None;
        for mask in 0u32..1 << n_tok {
            let x: Vec<f64> = (0..n_tok).map(|j| (mask >> j & 1) as f64).collect();
            if audit_assignment(&m, &x, 1e-9).is_empty() {
                let obj = m.objective_value(&x);
                if best.map_or(true, |b| obj < b) {
                    best = Some(obj);
                }
            }
        }
        match best {
            None => assert_eq!(sol.status, SolveStatus::Infeasible),
            Some(b) => {
                assert_optimal(&sol);
                assert!((sol.objective - b).abs() < 1e-6, "{} vs {b}", sol.objective);
            }
        }
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let build = || {
            let mut m = MipModel::new();
            let xs: Vec<VarId> = (0..8).map(|i| m.add_binary(format!("x{i}"))).collect();
            let y = m.add_continuous("y", 0.0, 2.0);
            m.add_constraint(
                "r0",
                xs.iter().map(|&x| (x, 1.0)).chain([(y, 1.0)]).collect(),
                ConstraintSense::Ge,
                3.5,
            );
            m.add_constraint(
                "r1",
                xs.iter().enumerate().map(|(i, &x)| (x, 1.0 + i as f64 * 0.3)).collect(),
                ConstraintSense::Le,
                9.0,
            );
            m.set_objective(
                ObjectiveSense::Minimize,
                xs.iter()
                    .enumerate()
                    .map(|(i, &x)| (x, 1.0 + libm::sin(i as f64 * 0.7)))
                    .chain([(y, 0.4)])
                    .collect(),
            );
            m
        };
        let a = solve(&build(), &SolverConfig::default()).unwrap();
        let b = solve(&build(), &SolverConfig::default()).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.nodes, b.nodes);
        let ab: Vec<u64> = a.assignment.iter().map(|v| v.to_bits()).collect();
        let bb: Vec<u64> = b.assignment.iter().map(|v| v.to_bits()).collect();
        assert_eq!(ab, bb);
    }

    #[test]
    fn node_limit_reports_time_limit_status() {
        let mut stream = rng::stream(4242);
        let mut m = MipModel::new();
        let xs: Vec<VarId> = (0..14).map(|i| m.add_binary(format!("x{i}"))).collect();
        for r in 0..6 {
            let terms: Vec<(VarId, f64)> = xs
                .iter()
                .map(|&x| (x, 0.5 + rng::uniform(&mut stream)))
                .collect();
            m.add_constraint(format!("r{r}"), terms, ConstraintSense::Ge, 3.0);
        }
        m.set_objective(
            ObjectiveSense::Minimize,
            xs.iter()
                .map(|&x| (x, 0.5 + rng::uniform(&mut stream)))
                .collect(),
        );
        let config = SolverConfig {
            node_limit: 2,
            ..SolverConfig::default()
        };
        let sol = solve(&m, &config).unwrap();
        assert_eq!(sol.status, SolveStatus::TimeLimit);
    }
}
