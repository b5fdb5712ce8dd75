//! Green-list stealing: every optimization-based formulation plus the
//! shared configuration, result, and evaluation types.
//!
//! Single-key attacks come in four knowledge settings. With detector
//! access (`AS1`): Vanilla (threshold bounds), Oracle (exact per-sentence
//! green counts), and Pro (two-stage, self-estimated bounds). Without
//! detector parameters (`AS2`): two-stage with per-sentence trust gates.
//! The multi-key attack alternates between solving the AS2-style program
//! under a fixed sentence-to-key assignment and reassigning sentences to
//! their best-matching stolen list.

mod as1;
mod as2;
mod multikey;

pub use as1::{
    build_oracle_as1, build_pro_as1_stage1, build_pro_as1_stage2, build_vanilla_as1, steal_oracle,
    steal_pro, steal_vanilla,
};
pub use as2::{build_as2_stage1, build_as2_stage2, build_multikey_stage2, steal_as2};
pub use multikey::steal_multikey;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label};
use crate::error::{config_err, input_err, solver_err, Result};
use crate::mip::{audit_assignment, MipModel, MipSolution, SolveStatus, SolverConfig};
use crate::watermark::GreenRedSplit;

/// Solve one stage to completion: infeasibility and empty-handed budget
/// exhaustion are errors, and the returned point must pass the
/// independent feasibility audit.
pub(crate) fn solve_stage(
    model: &MipModel,
    solver: &SolverConfig,
    stage: &str,
) -> Result<(MipSolution, SolveDiagnostics)> {
    let sol = crate::mip::solve(model, solver)?;
    match sol.status {
        SolveStatus::Infeasible => Err(solver_err!("{stage}: model is infeasible")),
        SolveStatus::TimeLimit if sol.assignment.is_empty() => Err(solver_err!(
            "{stage}: no feasible point found within the solver budget"
        )),
        _ => {
            let violations = audit_assignment(model, &sol.assignment, 1e-6);
            if !violations.is_empty() {
                return Err(solver_err!(
                    "{stage}: solution failed the feasibility audit ({} violations, first: {} {})",
                    violations.len(),
                    violations[0].subject,
                    violations[0].detail
                ));
            }
            let diag = SolveDiagnostics::from_solution(stage, &sol);
            Ok((sol, diag))
        }
    }
}

/// Stolen color code from the `c_j` block at the front of a model's
/// variable vector.
pub(crate) fn extract_color_code(assignment: &[f64], offset: usize, m: usize) -> Vec<bool> {
    assignment[offset..offset + m].iter().map(|&v| v > 0.5).collect()
}

/// Knobs shared by every stealing formulation. AS1 modes additionally
/// need `gamma` and `z_star`; the optional `eta`/`epsilon` rows are
/// meant for corpora with high claimed-label error rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StealConfig {
    /// Green-list fraction; required by the AS1 formulations.
    pub gamma: Option<f64>,
    /// Detector threshold; required by the AS1 formulations.
    pub z_star: Option<f64>,
    /// Stage-2 rescale factor on the watermarked bound sum.
    pub beta_hat: f64,
    /// Stage-2 rescale factor on the natural bound sum.
    pub beta_tilde: f64,
    /// Minimum fraction of each claimed class trusted by the gates.
    pub p_l: f64,
    /// Maximum fraction of each claimed class trusted by the gates.
    pub p_u: f64,
    /// Optional cap on the stolen-list size as a fraction of the
    /// vocabulary (`sum c_j <= eta * m`).
    pub eta: Option<f64>,
    /// Optional margin between the smallest trusted watermarked green
    /// proportion and the largest trusted natural one.
    pub epsilon: Option<f64>,
    /// Per-key stolen-list size floor in the multi-key attack.
    pub mu: usize,
    /// Cap on multi-key reassignment rounds.
    pub max_iterations: usize,
}

impl Default for StealConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            z_star: None,
            beta_hat: 0.95,
            // Tightening the natural-side aggregate below its stage-1
            // optimum makes stage 2 brutally hard for no precision gain,
            // so the natural sum is kept as-is and only the watermarked
            // sum is rescaled.
            beta_tilde: 1.0,
            p_l: 0.98,
            p_u: 0.99,
            eta: None,
            epsilon: None,
            mu: 0,
            max_iterations: 20,
        }
    }
}

impl StealConfig {
    pub fn for_as1(gamma: f64, z_star: f64) -> Self {
        Self {
            gamma: Some(gamma),
            z_star: Some(z_star),
            ..Self::default()
        }
    }

    /// Gate bounds for a corpus with claimed-label error rate `r_c`,
    /// plus the size/separation rows that keep the program honest when
    /// many labels are wrong.
    pub fn for_error_rate(r_c: f64, eta: f64) -> Self {
        Self {
            p_l: (0.8 - r_c).max(0.0),
            p_u: (0.9 - r_c).max(0.05),
            eta: Some(eta),
            epsilon: Some(0.02),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.p_l && self.p_l <= self.p_u && self.p_u <= 1.0) {
            return Err(config_err!(
                "need 0 <= p_l <= p_u <= 1, got p_l={} p_u={}",
                self.p_l,
                self.p_u
            ));
        }
        for (name, beta) in [("beta_hat", self.beta_hat), ("beta_tilde", self.beta_tilde)] {
            if !(0.9..=1.0).contains(&beta) {
                return Err(config_err!("{name} must lie in [0.9, 1], got {beta}"));
            }
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(config_err!("eta must lie in (0, 1], got {eta}"));
            }
        }
        if let Some(eps) = self.epsilon {
            if eps < 0.0 {
                return Err(config_err!("epsilon must be nonnegative, got {eps}"));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(config_err!("gamma must lie in (0, 1), got {g}"));
            }
        }
        if let Some(z) = self.z_star {
            if z <= 0.0 {
                return Err(config_err!("z_star must be positive, got {z}"));
            }
        }
        Ok(())
    }

    pub(crate) fn as1_params(&self) -> Result<(f64, f64)> {
        match (self.gamma, self.z_star) {
            (Some(g), Some(z)) => Ok((g, z)),
            _ => Err(config_err!("this formulation requires gamma and z_star")),
        }
    }
}

/// Stage-1 output handed to stage 2: the per-sentence bounds and, most
/// importantly, their sums (only the sums enter the stage-2 rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOneBounds {
    /// One entry per claimed-watermarked sentence, in record order.
    pub b_hat: Vec<f64>,
    /// One entry per claimed-natural sentence and key, in record-major
    /// order (single-key formulations have one entry per sentence).
    pub b_tilde: Vec<f64>,
    pub b_hat_sum: f64,
    pub b_tilde_sum: f64,
    /// Value of the absolute-deviation linearization variable; zero in
    /// formulations without it.
    pub b_abs: f64,
}

/// Exact per-sentence green counts under the true split, in claimed-class
/// record order. Available to the Oracle attacker and the evaluator only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCounts {
    pub watermarked: Vec<u32>,
    pub natural: Vec<u32>,
}

impl OracleCounts {
    pub fn from_corpus(corpus: &Corpus, split: &GreenRedSplit) -> Self {
        let count = |label| {
            corpus
                .claimed(label)
                .map(|r| r.green_count(split))
                .collect()
        };
        Self {
            watermarked: count(Label::Watermarked),
            natural: count(Label::Natural),
        }
    }
}

/// Per-stage solver summary kept in results (assignment omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub stage: String,
    pub status: SolveStatus,
    pub objective: f64,
    pub gap: f64,
    pub nodes: u64,
    pub simplex_iterations: u64,
    pub wall_time_seconds: f64,
}

impl SolveDiagnostics {
    pub(crate) fn from_solution(stage: &str, sol: &MipSolution) -> Self {
        Self {
            stage: String::from(stage),
            status: sol.status,
            objective: sol.objective,
            gap: sol.gap,
            nodes: sol.nodes,
            simplex_iterations: sol.simplex_iterations,
            wall_time_seconds: sol.wall_time_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StealResult {
    /// One stolen color code per key.
    pub color_codes: Vec<Vec<bool>>,
    /// Per-record trust gate (record id, lambda), AS2-style modes only.
    pub lambda: Option<Vec<(u64, bool)>>,
    /// Final sentence-to-key assignment (record id, key index) for
    /// claimed-watermarked records, multi-key only.
    pub rho: Option<Vec<(u64, usize)>>,
    pub stage1: Option<StageOneBounds>,
    pub diagnostics: Vec<SolveDiagnostics>,
    /// Number of reassignment rounds used (multi-key only).
    pub iterations: Option<usize>,
    /// True iff the multi-key loop reached a fixed point of the
    /// reassignment map before hitting `max_iterations`.
    pub converged: Option<bool>,
}

impl StealResult {
    pub fn single(color_code: Vec<bool>) -> Self {
        Self {
            color_codes: alloc::vec![color_code],
            lambda: None,
            rho: None,
            stage1: None,
            diagnostics: Vec::new(),
            iterations: None,
            converged: None,
        }
    }

    pub fn stolen_split(&self, key: usize) -> GreenRedSplit {
        GreenRedSplit::from_color_code(self.color_codes[key].clone())
    }
}

/// Quality of one stolen list against its matched true list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMetrics {
    /// Index of the true list this stolen list was matched to.
    pub matched_true_key: usize,
    /// Stolen list size.
    pub n_g: usize,
    /// Overlap with the matched true green list.
    pub n_t: usize,
    /// `n_t / n_g`; `None` when the stolen list is empty.
    pub precision: Option<f64>,
    /// `n_t` over the matched true list size; `None` when that list is
    /// empty.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StealMetrics {
    pub per_key: Vec<KeyMetrics>,
}

impl StealMetrics {
    pub fn mean_precision(&self) -> Option<f64> {
        let vals: Vec<f64> = self.per_key.iter().filter_map(|k| k.precision).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

fn intersection(stolen: &[bool], truth: &GreenRedSplit) -> usize {
    stolen
        .iter()
        .enumerate()
        .filter(|&(j, &g)| g && truth.is_green(j as u32))
        .count()
}

/// Score stolen lists against true lists. With several keys the stolen
/// lists are first matched to true lists by the permutation maximizing
/// total overlap (exact search; key counts are small).
pub fn evaluate_steal(
    color_codes: &[Vec<bool>],
    true_splits: &[GreenRedSplit],
) -> Result<StealMetrics> {
    if color_codes.is_empty() || color_codes.len() != true_splits.len() {
        return Err(input_err!(
            "need one true split per stolen list, got {} and {}",
            color_codes.len(),
            true_splits.len()
        ));
    }
    let p = color_codes.len();
    if p > 6 {
        return Err(input_err!("matching supports at most 6 keys, got {p}"));
    }
    // overlap[k][t]: stolen list k against true list t.
    let overlap: Vec<Vec<usize>> = color_codes
        .iter()
        .map(|code| true_splits.iter().map(|s| intersection(code, s)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut best_perm = perm.clone();
    // Start from the identity matching; earlier permutations win ties.
    let mut best_total: usize = (0..p).map(|k| overlap[k][k]).sum();
    permute(&mut perm, 0, &mut |assign| {
        let total: usize = (0..p).map(|k| overlap[k][assign[k]]).sum();
        if total > best_total {
            best_total = total;
            best_perm.copy_from_slice(assign);
        }
    });
    let per_key = (0..p)
        .map(|k| {
            let t = best_perm[k];
            let n_g = color_codes[k].iter().filter(|&&g| g).count();
            let n_t = overlap[k][t];
            let true_size = true_splits[t].green_size();
            KeyMetrics {
                matched_true_key: t,
                n_g,
                n_t,
                precision: (n_g > 0).then(|| n_t as f64 / n_g as f64),
                recall: (true_size > 0).then(|| n_t as f64 / true_size as f64),
            }
        })
        .collect();
    Ok(StealMetrics { per_key })
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}
