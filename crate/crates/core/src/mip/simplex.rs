//! Bounded-variable primal and dual simplex on a dense tableau.
//!
//! Columns are structural variables, one slack per row, and one
//! (normally disabled) artificial per row used during phase 1. Nonbasic
//! variables rest at a finite bound (or at zero when free); the tableau
//! stores `B^-1 A` for every column and is updated in place on each
//! pivot. All tie-breaks are by lowest index, so runs are deterministic;
//! with the `parallel` feature the row elimination is split across
//! threads in a way that keeps results bit-identical.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{ConstraintSense, MipModel, ObjectiveSense};
use crate::error::{solver_err, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const DUAL_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VStat {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic with both bounds infinite, resting at zero.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// LP relaxation result for external callers.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { objective: f64, assignment: Vec<f64> },
    Infeasible,
    Unbounded,
}

pub(crate) struct Simplex {
    rows: usize,
    cols: usize,
    n_struct: usize,
    /// Original constraint matrix over structural + slack columns,
    /// row-major with `n_struct + rows` columns; kept for fresh rebuilds.
    a_orig: Vec<f64>,
    rhs: Vec<f64>,
    /// Current tableau `B^-1 A`, row-major, `cols` columns per row.
    tab: Vec<f64>,
    /// Reduced costs for the objective currently being optimized.
    dj: Vec<f64>,
    /// Minimization costs (structural objective; slacks/artificials 0).
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    vstat: Vec<VStat>,
    maximize: bool,
    /// True only when the tableau/x/vstat state is a clean optimal basis
    /// that warm restarts may build on. Phase-1 infeasible or aborted
    /// solves leave internal state (sign-flipped rows, live artificials)
    /// that must not seed a dual reoptimization.
    warm_ok: bool,
    /// Columns the pivots touch: everything during phase 1, structural +
    /// slack afterwards. A frozen artificial still basic in a redundant
    /// row keeps a unit column that no later pivot can alter, so leaving
    /// the artificial block stale is sound.
    live: usize,
    /// Devex reference weights for primal pricing. Dantzig's rule walks
    /// absurdly long paths on these sliver-shaped covering polytopes;
    /// approximate steepest edge keeps the pivot count civil.
    devex: Vec<f64>,
    pub(crate) iterations: u64,
}

impl Simplex {
    pub(crate) fn new(model: &MipModel) -> Result<Self> {
        model.validate()?;
        let n_struct = model.num_vars();
        let rows = model.constraints.len();
        let cols = n_struct + 2 * rows;
        let mut a_orig = vec![0.0; rows * (n_struct + rows)];
        let mut rhs = vec![0.0; rows];
        let mut lower = vec![0.0; cols];
        let mut upper = vec![0.0; cols];
        for (j, v) in model.variables.iter().enumerate() {
            lower[j] = v.lower;
            upper[j] = v.upper;
        }
        let a_cols = n_struct + rows;
        for (i, c) in model.constraints.iter().enumerate() {
            for &(j, coeff) in &c.terms {
                a_orig[i * a_cols + j] += coeff;
            }
            a_orig[i * a_cols + n_struct + i] = 1.0;
            rhs[i] = c.rhs;
            let s = n_struct + i;
            match c.sense {
                ConstraintSense::Le => {
                    lower[s] = 0.0;
                    upper[s] = f64::INFINITY;
                }
                ConstraintSense::Ge => {
                    lower[s] = f64::NEG_INFINITY;
                    upper[s] = 0.0;
                }
                ConstraintSense::Eq => {
                    lower[s] = 0.0;
                    upper[s] = 0.0;
                }
            }
        }
        // Artificial columns start disabled (fixed at zero).
        for j in n_struct + rows..cols {
            lower[j] = 0.0;
            upper[j] = 0.0;
        }
        let maximize = model.objective_sense == ObjectiveSense::Maximize;
        let mut cost = vec![0.0; cols];
        for &(j, c) in &model.objective {
            cost[j] = if maximize { -c } else { c };
        }
        Ok(Self {
            rows,
            cols,
            n_struct,
            a_orig,
            rhs,
            tab: vec![0.0; rows * cols],
            dj: vec![0.0; cols],
            cost,
            lower,
            upper,
            x: vec![0.0; cols],
            basis: vec![0; rows],
            vstat: vec![VStat::AtLower; cols],
            maximize,
            warm_ok: false,
            live: cols,
            devex: vec![1.0; cols],
            iterations: 0,
        })
    }

    pub(crate) fn assignment(&self) -> &[f64] {
        &self.x[..self.n_struct]
    }

    /// Reduced costs of the structural variables, minimization sense.
    pub(crate) fn reduced_costs(&self) -> &[f64] {
        &self.dj[..self.n_struct]
    }

    /// Objective in the model's own sense.
    pub(crate) fn objective(&self) -> f64 {
        let v: f64 = (0..self.n_struct).map(|j| self.cost[j] * self.x[j]).sum();
        if self.maximize {
            -v
        } else {
            v
        }
    }

    /// Objective in internal minimization sense.
    pub(crate) fn min_objective(&self) -> f64 {
        (0..self.n_struct).map(|j| self.cost[j] * self.x[j]).sum()
    }

    fn rest_value(&self, j: usize) -> (f64, VStat) {
        if self.lower[j].is_finite() {
            (self.lower[j], VStat::AtLower)
        } else if self.upper[j].is_finite() {
            (self.upper[j], VStat::AtUpper)
        } else {
            (0.0, VStat::Free)
        }
    }

    /// Full cold start. The covering-style LPs this solver sees are
    /// heavily degenerate (integral data, many variables at bounds), and
    /// plain Dantzig pricing can spend hundreds of thousands of pivots
    /// making zero-length steps. So the cold solve first relaxes every
    /// inequality row by a tiny deterministic amount, which makes the
    /// vertices generic and each pivot strictly improving, then restores
    /// the exact right-hand sides and repairs the few resulting bound
    /// violations with the dual simplex. Any numerical trouble falls back
    /// to an unperturbed solve.
    pub(crate) fn solve_fresh(&mut self) -> Result<LpStatus> {
        let mut pert = vec![0.0; self.rows];
        for i in 0..self.rows {
            let s = self.n_struct + i;
            // Sense is encoded in the slack bounds; equalities stay exact.
            let dir = if self.upper[s] == f64::INFINITY {
                1.0
            } else if self.lower[s] == f64::NEG_INFINITY {
                -1.0
            } else {
                continue;
            };
            let u = (crate::rng::splitmix64(i as u64) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            pert[i] = dir * 1e-7 * (1.0 + self.rhs[i].abs()) * (0.5 + u);
        }
        let saved_rhs = self.rhs.clone();
        for i in 0..self.rows {
            self.rhs[i] += pert[i];
        }
        let outcome = self.solve_cold();
        self.rhs = saved_rhs;
        match outcome {
            Ok(LpStatus::Optimal) => {
                // Shift the basic values from the relaxed right-hand sides
                // back to the true ones: the slack columns of the tableau
                // hold B^-1 e_i (row sign flips cancel).
                for (i, &p) in pert.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let s = self.n_struct + i;
                    for r in 0..self.rows {
                        let a = self.tab[r * self.cols + s];
                        if a != 0.0 {
                            let b = self.basis[r];
                            self.x[b] -= p * a;
                        }
                    }
                }
                let violated = (0..self.rows)
                    .any(|r| self.primal_violation(self.basis[r]) > PRIMAL_TOL);
                if !violated {
                    self.warm_ok = true;
                    return Ok(LpStatus::Optimal);
                }
                self.warm_ok = true;
                if let Ok(status) = self.reoptimize_dual() {
                    return Ok(status);
                }
            }
            Ok(status) => return Ok(status),
            Err(_) => {}
        }
        self.warm_ok = false;
        self.solve_cold()
    }

    /// Phase 1 then phase 2 from scratch under the current bounds and
    /// right-hand sides.
    fn solve_cold(&mut self) -> Result<LpStatus> {
        self.warm_ok = false;
        self.live = self.cols;
        let a_cols = self.n_struct + self.rows;
        // Disable all artificials, rest every column at a bound.
        for j in self.n_struct + self.rows..self.cols {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
        }
        for j in 0..self.cols {
            let (v, st) = self.rest_value(j);
            self.x[j] = v;
            self.vstat[j] = st;
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                self.tab[i * self.cols + j] = if j < a_cols {
                    self.a_orig[i * a_cols + j]
                } else {
                    0.0
                };
            }
        }
        // Choose an initial basis row by row: the slack if the residual
        // fits its bounds, otherwise an artificial absorbing the residual.
        let mut need_phase1 = false;
        for i in 0..self.rows {
            let s = self.n_struct + i;
            let act: f64 = (0..self.n_struct)
                .map(|j| self.a_orig[i * a_cols + j] * self.x[j])
                .sum();
            let resid = self.rhs[i] - act;
            if resid >= self.lower[s] - PRIMAL_TOL && resid <= self.upper[s] + PRIMAL_TOL {
                self.x[s] = resid.clamp(self.lower[s], self.upper[s]);
                self.vstat[s] = VStat::Basic(i);
                self.basis[i] = s;
            } else {
                let (sv, sst) = self.rest_value(s);
                self.x[s] = sv;
                self.vstat[s] = sst;
                let art = self.n_struct + self.rows + i;
                let r = resid - sv;
                let sigma = if r >= 0.0 { 1.0 } else { -1.0 };
                if sigma < 0.0 {
                    for j in 0..self.cols {
                        self.tab[i * self.cols + j] = -self.tab[i * self.cols + j];
                    }
                }
                self.tab[i * self.cols + art] = 1.0;
                self.lower[art] = 0.0;
                self.upper[art] = f64::INFINITY;
                self.x[art] = r.abs();
                self.vstat[art] = VStat::Basic(i);
                self.basis[i] = art;
                need_phase1 = true;
            }
        }
        if need_phase1 {
            // Phase-1 reduced costs: unit cost on artificials.
            for j in 0..self.cols {
                self.dj[j] = if j >= self.n_struct + self.rows { 1.0 } else { 0.0 };
            }
            for i in 0..self.rows {
                if self.basis[i] >= self.n_struct + self.rows {
                    for j in 0..self.cols {
                        self.dj[j] -= self.tab[i * self.cols + j];
                    }
                }
            }
            for i in 0..self.rows {
                self.dj[self.basis[i]] = 0.0;
            }
            match self.primal_loop()? {
                LpStatus::Unbounded => {
                    return Err(solver_err!("phase 1 reported unbounded"));
                }
                _ => {}
            }
            let infeas: f64 = (self.n_struct + self.rows..self.cols)
                .map(|j| self.x[j].max(0.0))
                .sum();
            if infeas > PHASE1_TOL {
                return Ok(LpStatus::Infeasible);
            }
            self.evict_basic_artificials();
        }
        // Freeze artificials out of the problem.
        for j in self.n_struct + self.rows..self.cols {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            if !matches!(self.vstat[j], VStat::Basic(_)) {
                self.x[j] = 0.0;
                self.vstat[j] = VStat::AtLower;
            }
        }
        self.live = self.n_struct + self.rows;
        self.rebuild_reduced_costs();
        let status = self.primal_loop()?;
        self.warm_ok = status == LpStatus::Optimal;
        Ok(status)
    }

    /// Pivot out artificials stuck in the basis at zero where possible;
    /// rows with no eligible pivot are redundant and keep a zero-valued
    /// artificial basic forever.
    fn evict_basic_artificials(&mut self) {
        for i in 0..self.rows {
            if self.basis[i] < self.n_struct + self.rows {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_struct + self.rows {
                if matches!(self.vstat[j], VStat::Basic(_)) {
                    continue;
                }
                let a = self.tab[i * self.cols + j];
                if a.abs() > 1e-7 && best.map_or(true, |(_, ba)| a.abs() > ba) {
                    best = Some((j, a.abs()));
                }
            }
            if let Some((q, _)) = best {
                let art = self.basis[i];
                self.x[art] = 0.0;
                self.vstat[art] = VStat::AtLower;
                self.basis[i] = q;
                self.vstat[q] = VStat::Basic(i);
                self.pivot_update(i, q);
            }
        }
    }

    fn rebuild_reduced_costs(&mut self) {
        self.dj.copy_from_slice(&self.cost);
        for i in 0..self.rows {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.cols..(i + 1) * self.cols];
                for j in 0..self.live {
                    self.dj[j] -= cb * row[j];
                }
            }
        }
        for i in 0..self.rows {
            self.dj[self.basis[i]] = 0.0;
        }
    }

    /// Eliminates column `q` everywhere after it enters the basis at row
    /// `r`; also updates the reduced-cost row.
    fn pivot_update(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let live = self.live;
        let piv = self.tab[r * cols + q];
        debug_assert!(piv.abs() > 1e-12);
        let inv = 1.0 / piv;
        for j in 0..live {
            self.tab[r * cols + j] *= inv;
        }
        self.tab[r * cols + q] = 1.0;
        let (before, rest) = self.tab.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        let prow = &prow[..live];
        let eliminate = |chunk: &mut [f64]| {
            let f = chunk[q];
            if f != 0.0 {
                for (t, &p) in chunk[..live].iter_mut().zip(prow.iter()) {
                    *t -= f * p;
                }
                chunk[q] = 0.0;
            }
        };
        #[cfg(feature = "parallel")]
        {
            before.par_chunks_exact_mut(cols).for_each(eliminate);
            after.par_chunks_exact_mut(cols).for_each(eliminate);
        }
        #[cfg(not(feature = "parallel"))]
        {
            before.chunks_exact_mut(cols).for_each(eliminate);
            after.chunks_exact_mut(cols).for_each(eliminate);
        }
        let f = self.dj[q];
        if f != 0.0 {
            for (t, &p) in self.dj[..live].iter_mut().zip(prow.iter()) {
                *t -= f * p;
            }
            self.dj[q] = 0.0;
        }
    }

    /// How strongly column `j` wants to move, under the current reduced
    /// costs; positive means eligible to enter.
    fn price_violation(&self, j: usize) -> f64 {
        if self.lower[j] == self.upper[j] {
            return 0.0;
        }
        match self.vstat[j] {
            VStat::Basic(_) => 0.0,
            VStat::AtLower => -self.dj[j],
            VStat::AtUpper => self.dj[j],
            VStat::Free => self.dj[j].abs(),
        }
    }

    fn price(&self, bland: bool) -> Option<usize> {
        if bland {
            (0..self.live).find(|&j| self.price_violation(j) > DUAL_TOL)
        } else {
            // Devex: largest dj^2 / weight, ties to the lowest index.
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.live {
                let v = self.price_violation(j);
                if v > DUAL_TOL {
                    let score = v * v / self.devex[j];
                    if best.map_or(true, |(_, bs)| score > bs) {
                        best = Some((j, score));
                    }
                }
            }
            best.map(|(j, _)| j)
        }
    }

    /// Devex weight update after a basis change: the pivot row approximates
    /// each nonbasic column's steepest-edge norm relative to the entering
    /// column's. Runaway weights mean the reference framework has drifted
    /// too far; start a fresh one.
    fn devex_update(&mut self, r: usize, q: usize, p: usize) {
        let arq = self.tab[r * self.cols + q];
        let wq = self.devex[q].max(1.0);
        let inv2 = 1.0 / (arq * arq);
        let row = &self.tab[r * self.cols..r * self.cols + self.live];
        let mut peak = 0.0f64;
        for (j, w) in self.devex[..self.live].iter_mut().enumerate() {
            let a = row[j];
            if a != 0.0 && j != q {
                let cand = a * a * inv2 * wq;
                if cand > *w {
                    *w = cand;
                }
                peak = peak.max(*w);
            }
        }
        self.devex[p] = (wq * inv2).max(1.0);
        if peak.max(self.devex[p]) > 1e10 {
            self.devex[..self.live].fill(1.0);
        }
    }

    fn iteration_limit(&self) -> u64 {
        50_000 + 100 * (self.rows as u64 + self.cols as u64)
    }

    /// Primal simplex to optimality on the current reduced-cost row.
    fn primal_loop(&mut self) -> Result<LpStatus> {
        let limit = self.iteration_limit();
        self.devex[..self.live].fill(1.0);
        let mut bland = false;
        let mut stall: usize = 0;
        let stall_limit = 2 * (self.rows + 16);
        let mut iters: u64 = 0;
        loop {
            iters += 1;
            self.iterations += 1;
            if iters > limit {
                return Err(solver_err!(
                    "primal simplex hit the iteration limit ({limit})"
                ));
            }
            let q = match self.price(bland) {
                Some(q) => q,
                None => return Ok(LpStatus::Optimal),
            };
            let dir = match self.vstat[q] {
                VStat::AtLower => 1.0,
                VStat::AtUpper => -1.0,
                VStat::Free => {
                    if self.dj[q] < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                VStat::Basic(_) => unreachable!(),
            };
            // Ratio test: the entering column moves by t >= 0.
            let span = self.upper[q] - self.lower[q];
            let mut best_t = if span.is_finite() { span } else { f64::INFINITY };
            let mut leave: Option<(usize, f64, bool)> = None; // (row, |alpha|, hits_upper)
            for i in 0..self.rows {
                let alpha = self.tab[i * self.cols + q];
                let delta = -dir * alpha; // d x_B(i) / dt
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (limit_t, hits_upper) = if delta > 0.0 {
                    if self.upper[b].is_finite() {
                        ((self.upper[b] - self.x[b]) / delta, true)
                    } else {
                        continue;
                    }
                } else if self.lower[b].is_finite() {
                    ((self.lower[b] - self.x[b]) / delta, false)
                } else {
                    continue;
                };
                let limit_t = limit_t.max(0.0);
                let take = match leave {
                    _ if limit_t < best_t - 1e-10 => true,
                    Some((_, ba, _)) if limit_t <= best_t + 1e-10 => alpha.abs() > ba,
                    None if limit_t <= best_t + 1e-10 => true,
                    _ => false,
                };
                if take {
                    best_t = best_t.min(limit_t);
                    leave = Some((i, alpha.abs(), hits_upper));
                }
            }
            if best_t == f64::INFINITY {
                return Ok(LpStatus::Unbounded);
            }
            let t = best_t.max(0.0);
            if t > 1e-12 {
                // Move the entering variable and every basic variable.
                for i in 0..self.rows {
                    let alpha = self.tab[i * self.cols + q];
                    if alpha != 0.0 {
                        let b = self.basis[i];
                        self.x[b] -= dir * alpha * t;
                    }
                }
                self.x[q] += dir * t;
                stall = 0;
                if bland {
                    bland = false;
                }
            } else {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            }
            match leave {
                Some((r, _, hits_upper)) if t <= span + 1e-10 || !span.is_finite() => {
                    let p = self.basis[r];
                    self.devex_update(r, q, p);
                    self.x[p] = if hits_upper { self.upper[p] } else { self.lower[p] };
                    self.vstat[p] = if hits_upper { VStat::AtUpper } else { VStat::AtLower };
                    self.basis[r] = q;
                    self.vstat[q] = VStat::Basic(r);
                    self.pivot_update(r, q);
                }
                _ => {
                    // Bound flip: the entering variable ran to its other bound.
                    self.vstat[q] = match self.vstat[q] {
                        VStat::AtLower => VStat::AtUpper,
                        VStat::AtUpper => VStat::AtLower,
                        other => other,
                    };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
            }
        }
    }

    fn primal_violation(&self, b: usize) -> f64 {
        let below = self.lower[b] - self.x[b];
        let above = self.x[b] - self.upper[b];
        below.max(above).max(0.0)
    }

    /// Dual simplex: restores primal feasibility after bound changes while
    /// keeping reduced costs dual feasible. Finishes with a primal clean-up
    /// pass. Errors on stall; callers should fall back to `solve_fresh`.
    pub(crate) fn reoptimize_dual(&mut self) -> Result<LpStatus> {
        if !self.warm_ok {
            return Err(solver_err!(
                "no clean basis to warm-start from; solve fresh instead"
            ));
        }
        self.warm_ok = false;
        let limit = self.iteration_limit();
        let mut iters: u64 = 0;
        loop {
            iters += 1;
            self.iterations += 1;
            if iters > limit {
                return Err(solver_err!("dual simplex hit the iteration limit ({limit})"));
            }
            let mut r_best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let v = self.primal_violation(self.basis[i]);
                if v > PRIMAL_TOL && r_best.map_or(true, |(_, bv)| v > bv) {
                    r_best = Some((i, v));
                }
            }
            let r = match r_best {
                Some((r, _)) => r,
                None => {
                    let status = self.primal_loop()?;
                    self.warm_ok = status == LpStatus::Optimal;
                    return Ok(status);
                }
            };
            let p = self.basis[r];
            let need_increase = self.x[p] < self.lower[p];
            // Entering column: movement must push x[p] toward its bound;
            // among eligible columns take the smallest |dj/alpha|.
            let mut q_best: Option<(usize, f64, f64)> = None; // (col, ratio, |alpha|)
            for j in 0..self.live {
                if matches!(self.vstat[j], VStat::Basic(_)) || self.lower[j] == self.upper[j] {
                    continue;
                }
                let alpha = self.tab[r * self.cols + j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let dirs: &[f64] = match self.vstat[j] {
                    VStat::AtLower => &[1.0],
                    VStat::AtUpper => &[-1.0],
                    VStat::Free => &[1.0, -1.0],
                    VStat::Basic(_) => unreachable!(),
                };
                for &dj_dir in dirs {
                    let effect = -dj_dir * alpha; // d x[p] per unit t
                    let ok = if need_increase { effect > 0.0 } else { effect < 0.0 };
                    if !ok {
                        continue;
                    }
                    let ratio = self.dj[j].abs() / alpha.abs();
                    let take = match q_best {
                        None => true,
                        Some((_, br, ba)) => {
                            ratio < br - 1e-12 || (ratio <= br + 1e-12 && alpha.abs() > ba)
                        }
                    };
                    if take {
                        q_best = Some((j, ratio, alpha.abs()));
                    }
                }
            }
            let (q, _, _) = match q_best {
                Some(t) => t,
                None => {
                    // Dual ray: the state stays a consistent dual-feasible
                    // basis, so later warm restarts remain sound.
                    self.warm_ok = true;
                    return Ok(LpStatus::Infeasible);
                }
            };
            let alpha_rq = self.tab[r * self.cols + q];
            let target = if need_increase { self.lower[p] } else { self.upper[p] };
            // x[p] changes by -dir_q * alpha_rq per unit entering movement,
            // so pick dir_q with -dir_q * alpha_rq * want > 0.
            let want = target - self.x[p];
            let dir_q = if alpha_rq * want < 0.0 { 1.0 } else { -1.0 };
            let t = (target - self.x[p]) / (-dir_q * alpha_rq);
            let t = t.max(0.0);
            for i in 0..self.rows {
                let a = self.tab[i * self.cols + q];
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= dir_q * a * t;
                }
            }
            self.x[q] += dir_q * t;
            self.x[p] = target;
            self.vstat[p] = if need_increase { VStat::AtLower } else { VStat::AtUpper };
            self.basis[r] = q;
            self.vstat[q] = VStat::Basic(r);
            self.pivot_update(r, q);
        }
    }

    /// Changes one structural variable's bounds in place, keeping the
    /// tableau consistent. Basic variables may become infeasible; call
    /// `reoptimize_dual` afterwards.
    pub(crate) fn set_var_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        debug_assert!(j < self.n_struct && lo <= hi);
        self.lower[j] = lo;
        self.upper[j] = hi;
        match self.vstat[j] {
            VStat::Basic(_) => {}
            VStat::Free => {
                // A formerly free variable that gains a finite bound must
                // rest on one; pick the bound nearest its current value.
                if lo.is_finite() || hi.is_finite() {
                    let (target, st) = if !hi.is_finite() || (lo.is_finite() && self.x[j] - lo <= hi - self.x[j]) {
                        (lo, VStat::AtLower)
                    } else {
                        (hi, VStat::AtUpper)
                    };
                    let delta = target - self.x[j];
                    if delta != 0.0 {
                        for i in 0..self.rows {
                            let a = self.tab[i * self.cols + j];
                            if a != 0.0 {
                                let b = self.basis[i];
                                self.x[b] -= a * delta;
                            }
                        }
                        self.x[j] = target;
                    }
                    self.vstat[j] = st;
                }
            }
            VStat::AtLower | VStat::AtUpper => {
                let target = if self.vstat[j] == VStat::AtLower { lo } else { hi };
                let delta = target - self.x[j];
                if delta != 0.0 {
                    for i in 0..self.rows {
                        let a = self.tab[i * self.cols + j];
                        if a != 0.0 {
                            let b = self.basis[i];
                            self.x[b] -= a * delta;
                        }
                    }
                    self.x[j] = target;
                }
                // Restore dual feasibility by flipping to the other bound
                // when the reduced-cost sign disagrees with the rest state.
                if lo < hi {
                    let flip = match self.vstat[j] {
                        VStat::AtLower => self.dj[j] < -DUAL_TOL && hi.is_finite(),
                        VStat::AtUpper => self.dj[j] > DUAL_TOL && lo.is_finite(),
                        _ => false,
                    };
                    if flip {
                        let other = if self.vstat[j] == VStat::AtLower { hi } else { lo };
                        let delta = other - self.x[j];
                        for i in 0..self.rows {
                            let a = self.tab[i * self.cols + j];
                            if a != 0.0 {
                                let b = self.basis[i];
                                self.x[b] -= a * delta;
                            }
                        }
                        self.x[j] = other;
                        self.vstat[j] = match self.vstat[j] {
                            VStat::AtLower => VStat::AtUpper,
                            _ => VStat::AtLower,
                        };
                    }
                }
            }
        }
    }
}

/// Solves the LP relaxation of `model` (integrality dropped).
pub fn solve_lp_relaxation(model: &MipModel) -> Result<LpOutcome> {
    let mut s = Simplex::new(model)?;
    match s.solve_fresh()? {
        LpStatus::Optimal => Ok(LpOutcome::Optimal {
            objective: s.objective(),
            assignment: s.assignment().to_vec(),
        }),
        LpStatus::Infeasible => Ok(LpOutcome::Infeasible),
        LpStatus::Unbounded => Ok(LpOutcome::Unbounded),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::audit::audit_assignment;
    use crate::mip::model::{MipModel, VarId};
    use crate::rng;

    fn lp(model: &MipModel) -> LpOutcome {
        solve_lp_relaxation(model).unwrap()
    }

    #[test]
    fn hand_lp_two_vars() {
        // max 3x + 2y, x + y <= 4, x <= 2; optimum (2, 2) value 10.
        let mut m = MipModel::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.add_constraint("sum", vec![(x, 1.0), (y, 1.0)], ConstraintSense::Le, 4.0);
        m.add_constraint("capx", vec![(x, 1.0)], ConstraintSense::Le, 2.0);
        m.set_objective(ObjectiveSense::Maximize, vec![(x, 3.0), (y, 2.0)]);
        match lp(&m) {
            LpOutcome::Optimal { objective, assignment } => {
                assert!((objective - 10.0).abs() < 1e-9);
                assert!((assignment[0] - 2.0).abs() < 1e-9);
                assert!((assignment[1] - 2.0).abs() < 1e-9);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn phase_one_with_ge_and_eq() {
        // min x + y, x + 2y >= 4, x - y = 1, boxes [0,10]; optimum (2,1).
        let mut m = MipModel::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        let y = m.add_continuous("y", 0.0, 10.0);
        m.add_constraint("cover", vec![(x, 1.0), (y, 2.0)], ConstraintSense::Ge, 4.0);
        m.add_constraint("link", vec![(x, 1.0), (y, -1.0)], ConstraintSense::Eq, 1.0);
        m.set_objective(ObjectiveSense::Minimize, vec![(x, 1.0), (y, 1.0)]);
        match lp(&m) {
            LpOutcome::Optimal { objective, assignment } => {
                assert!((objective - 3.0).abs() < 1e-9);
                assert!((assignment[0] - 2.0).abs() < 1e-9);
                assert!((assignment[1] - 1.0).abs() < 1e-9);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn detects_infeasible() {
        let mut m = MipModel::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.add_constraint("hi", vec![(x, 1.0)], ConstraintSense::Ge, 2.0);
        m.add_constraint("lo", vec![(x, 1.0)], ConstraintSense::Le, 1.0);
        m.set_objective(ObjectiveSense::Minimize, vec![(x, 1.0)]);
        assert_eq!(lp(&m), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut m = MipModel::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.add_constraint("r", vec![(x, 1.0), (y, -1.0)], ConstraintSense::Le, 1.0);
        m.set_objective(ObjectiveSense::Maximize, vec![(x, 1.0)]);
        assert_eq!(lp(&m), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_lower_bounds_and_free_vars() {
        // min z, z free, z >= x - 3, x in [-2, 5].
        let mut m = MipModel::new();
        let x = m.add_continuous("x", -2.0, 5.0);
        let z = m.add_continuous("z", f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("lb", vec![(z, 1.0), (x, -1.0)], ConstraintSense::Ge, -3.0);
        m.set_objective(ObjectiveSense::Minimize, vec![(z, 1.0)]);
        match lp(&m) {
            LpOutcome::Optimal { objective, .. } => assert!((objective + 5.0).abs() < 1e-9),
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn survives_beale_cycling_example() {
        // Classic degenerate LP that cycles under naive Dantzig pricing.
        let mut m = MipModel::new();
        let x4 = m.add_continuous("x4", 0.0, f64::INFINITY);
        let x5 = m.add_continuous("x5", 0.0, f64::INFINITY);
        let x6 = m.add_continuous("x6", 0.0, f64::INFINITY);
        let x7 = m.add_continuous("x7", 0.0, f64::INFINITY);
        m.add_constraint(
            "r1",
            vec![(x4, 0.25), (x5, -60.0), (x6, -0.04), (x7, 9.0)],
            ConstraintSense::Le,
            0.0,
        );
        m.add_constraint(
            "r2",
            vec![(x4, 0.5), (x5, -90.0), (x6, -0.02), (x7, 3.0)],
            ConstraintSense::Le,
            0.0,
        );
        m.add_constraint("r3", vec![(x6, 1.0)], ConstraintSense::Le, 1.0);
        m.set_objective(
            ObjectiveSense::Minimize,
            vec![(x4, -0.75), (x5, 150.0), (x6, -0.02), (x7, 6.0)],
        );
        match lp(&m) {
            LpOutcome::Optimal { objective, assignment } => {
                assert!((objective - (-0.05)).abs() < 1e-9, "objective {objective}");
                let v: Vec<f64> = assignment;
                let model = m.clone();
                assert!(audit_assignment(&model, &v, 1e-6).is_empty());
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    // ---- randomized cross-check against a vertex-enumeration oracle ----

    /// Solves dense `n x n` linear systems by Gaussian elimination with
    /// partial pivoting; returns None when singular.
    fn gauss_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[r * n + col].abs() > a[piv * n + col].abs() {
                    piv = r;
                }
            }
            if a[piv * n + col].abs() < 1e-10 {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                }
                b.swap(piv, col);
            }
            for r in 0..n {
                if r != col {
                    let f = a[r * n + col] / a[col * n + col];
                    if f != 0.0 {
                        for j in 0..n {
                            a[r * n + j] -= f * a[col * n + j];
                        }
                        b[r] -= f * b[col];
                    }
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i * n + i]).collect())
    }

    /// Brute-force LP oracle: every vertex of the feasible polytope is
    /// the intersection of n active hyperplanes drawn from constraints
    /// and variable bounds; enumerate all n-subsets, keep feasible
    /// points, return the best objective.
    fn vertex_enumeration_optimum(m: &MipModel) -> Option<f64> {
        let n = m.num_vars();
        // Hyperplanes: (normal, rhs) for each constraint plus both bounds.
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for c in &m.constraints {
            let mut normal = vec![0.0; n];
            for &(j, coeff) in &c.terms {
                normal[j] += coeff;
            }
            planes.push((normal, c.rhs));
        }
        for (j, v) in m.variables.iter().enumerate() {
            for b in [v.lower, v.upper] {
                if b.is_finite() {
                    let mut normal = vec![0.0; n];
                    normal[j] = 1.0;
                    planes.push((normal, b));
                }
            }
        }
        let k = planes.len();
        let mut best: Option<f64> = None;
        let mut subset = vec![0usize; n];
        fn rec(
            planes: &[(Vec<f64>, f64)],
            m: &MipModel,
            n: usize,
            k: usize,
            depth: usize,
            start: usize,
            subset: &mut Vec<usize>,
            best: &mut Option<f64>,
        ) {
            if depth == n {
                let mut a = vec![0.0; n * n];
                let mut b = vec![0.0; n];
                for (r, &p) in subset.iter().enumerate() {
                    a[r * n..(r + 1) * n].copy_from_slice(&planes[p].0);
                    b[r] = planes[p].1;
                }
                if let Some(x) = gauss_solve(&mut a, &mut b, n) {
                    if audit_assignment_relaxed(m, &x) {
                        let obj = m.objective_value(&x);
                        let better = match (*best, m.objective_sense) {
                            (None, _) => true,
                            (Some(bv), ObjectiveSense::Minimize) => obj < bv,
                            (Some(bv), ObjectiveSense::Maximize) => obj > bv,
                        };
                        if better {
                            *best = Some(obj);
                        }
                    }
                }
                return;
            }
            for p in start..k {
                subset[depth] = p;
                rec(planes, m, n, k, depth + 1, p + 1, subset, best);
            }
        }
        rec(&planes, m, n, k, 0, 0, &mut subset, &mut best);
        best
    }

    /// Feasibility check ignoring integrality (LP relaxation).
    fn audit_assignment_relaxed(m: &MipModel, x: &[f64]) -> bool {
        for (j, v) in m.variables.iter().enumerate() {
            if x[j] < v.lower - 1e-7 || x[j] > v.upper + 1e-7 {
                return false;
            }
        }
        for c in &m.constraints {
            let lhs: f64 = c.terms.iter().map(|&(j, coeff)| coeff * x[j]).sum();
            let ok = match c.sense {
                ConstraintSense::Le => lhs <= c.rhs + 1e-7,
                ConstraintSense::Ge => lhs >= c.rhs - 1e-7,
                ConstraintSense::Eq => (lhs - c.rhs).abs() <= 1e-7,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut stream = rng::stream(20_240_817);
        let mut solved = 0;
        for case in 0..40 {
            let n = 2 + rng::uniform_index(&mut stream, 3); // 2..=4 vars
            let n_rows = 1 + rng::uniform_index(&mut stream, 5);
            let mut m = MipModel::new();
            let vars: Vec<VarId> = (0..n)
                .map(|j| {
                    let lo = -2.0 + 4.0 * rng::uniform(&mut stream);
                    let hi = lo + 0.5 + 4.0 * rng::uniform(&mut stream);
                    m.add_continuous(alloc::format!("v{j}"), lo, hi)
                })
                .collect();
            for r in 0..n_rows {
                let terms: Vec<(VarId, f64)> = vars
                    .iter()
                    .map(|&v| (v, -3.0 + 6.0 * rng::uniform(&mut stream)))
                    .collect();
                let sense = if rng::uniform(&mut stream) < 0.5 {
                    ConstraintSense::Le
                } else {
                    ConstraintSense::Ge
                };
                let rhs = -4.0 + 8.0 * rng::uniform(&mut stream);
                m.add_constraint(alloc::format!("r{r}"), terms, sense, rhs);
            }
            let obj: Vec<(VarId, f64)> = vars
                .iter()
                .map(|&v| (v, -3.0 + 6.0 * rng::uniform(&mut stream)))
                .collect();
            let sense = if case % 2 == 0 {
                ObjectiveSense::Minimize
            } else {
                ObjectiveSense::Maximize
            };
            m.set_objective(sense, obj);

            let oracle = vertex_enumeration_optimum(&m);
            match lp(&m) {
                LpOutcome::Optimal { objective, assignment } => {
                    assert!(
                        audit_assignment_relaxed(&m, &assignment),
                        "case {case}: simplex point infeasible"
                    );
                    let oracle = oracle.expect("oracle found no vertex but simplex did");
                    assert!(
                        (objective - oracle).abs() < 1e-6 * (1.0 + oracle.abs()),
                        "case {case}: simplex {objective} vs oracle {oracle}"
                    );
                    solved += 1;
                }
                LpOutcome::Infeasible => {
                    assert!(oracle.is_none(), "case {case}: oracle found a vertex");
                }
                LpOutcome::Unbounded => {
                    // Boxes are finite, so this cannot happen.
                    panic!("case {case}: unbounded with finite boxes");
                }
            }
        }
        assert!(solved >= 10, "too few solvable cases ({solved})");
    }

    #[test]
    fn dual_reoptimize_matches_fresh_solve() {
        let mut stream = rng::stream(7_311);
        for case in 0..20 {
            let n = 3 + rng::uniform_index(&mut stream, 3);
            let mut m = MipModel::new();
            let vars: Vec<VarId> = (0..n)
                .map(|j| m.add_continuous(alloc::format!("v{j}"), 0.0, 5.0))
                .collect();
            for r in 0..n {
                let terms: Vec<(VarId, f64)> = vars
                    .iter()
                    .map(|&v| (v, rng::uniform(&mut stream) * 2.0))
                    .collect();
                m.add_constraint(
                    alloc::format!("r{r}"),
                    terms,
                    ConstraintSense::Le,
                    2.0 + 6.0 * rng::uniform(&mut stream),
                );
            }
            m.set_objective(
                ObjectiveSense::Maximize,
                vars.iter()
                    .map(|&v| (v, 0.5 + rng::uniform(&mut stream)))
                    .collect(),
            );
            let mut s = Simplex::new(&m).unwrap();
            assert_eq!(s.solve_fresh().unwrap(), LpStatus::Optimal);
            // Tighten a variable to a random sub-box and warm start.
            let j = rng::uniform_index(&mut stream, n);
            let hi = 2.0 * rng::uniform(&mut stream);
            s.set_var_bounds(j, 0.0, hi);
            let warm = s.reoptimize_dual().unwrap();
            let mut m2 = m.clone();
            m2.variables[j].upper = hi;
            match (warm, lp(&m2)) {
                (LpStatus::Optimal, LpOutcome::Optimal { objective, .. }) => {
                    assert!(
                        (s.objective() - objective).abs() < 1e-6 * (1.0 + objective.abs()),
                        "case {case}: warm {} vs fresh {objective}",
                        s.objective()
                    );
                }
                (LpStatus::Infeasible, LpOutcome::Infeasible) => {}
                (a, b) => panic!("case {case}: warm {a:?} vs fresh {b:?}"),
            }
        }
    }

    #[test]
    fn no_constraints_reduces_to_bound_selection() {
        let mut m = MipModel::new();
        let x = m.add_continuous("x", -1.0, 2.0);
        let y = m.add_continuous("y", 0.5, 3.0);
        m.set_objective(ObjectiveSense::Minimize, vec![(x, 1.0), (y, -1.0)]);
        match lp(&m) {
            LpOutcome::Optimal { objective, assignment } => {
                assert!((objective - (-1.0 - 3.0)).abs() < 1e-12);
                assert_eq!(assignment, vec![-1.0, 3.0]);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    // A fresh solve that ends infeasible leaves phase-1 wreckage
    // (sign-flipped rows, live artificials) in the tableau; a warm
    // restart from that state used to report bogus statuses and poison
    // whole branch-and-bound subtrees. It must be refused instead.
    #[test]
    fn warm_restart_refused_after_infeasible_fresh_solve() {
        let mut m = MipModel::new();
        let x = m.add_continuous("x", 0.0, 3.0);
        let y = m.add_continuous("y", 0.0, 3.0);
        m.add_constraint("r", alloc::vec![(x, 1.0), (y, 1.0)], ConstraintSense::Ge, 4.0);
        m.set_objective(ObjectiveSense::Minimize, alloc::vec![(x, 1.0), (y, 1.0)]);
        let mut s = Simplex::new(&m).unwrap();
        assert_eq!(s.solve_fresh().unwrap(), LpStatus::Optimal);
        s.set_var_bounds(0, 0.0, 1.0);
        s.set_var_bounds(1, 0.0, 1.0);
        assert_eq!(s.solve_fresh().unwrap(), LpStatus::Infeasible);
        assert!(s.reoptimize_dual().is_err());
        s.set_var_bounds(0, 0.0, 3.0);
        assert_eq!(s.solve_fresh().unwrap(), LpStatus::Optimal);
        assert!((s.objective() - 4.0).abs() < 1e-9);
        // A clean optimal basis accepts warm restarts again.
        s.set_var_bounds(1, 0.0, 2.0);
        assert_eq!(s.reoptimize_dual().unwrap(), LpStatus::Optimal);
        assert!((s.objective() - 4.0).abs() < 1e-9);
    }
}
