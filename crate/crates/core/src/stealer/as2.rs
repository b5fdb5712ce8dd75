//! Stealing without detector parameters: no usable per-sentence
//! threshold exists, so the program learns per-sentence bounds and a
//! binary trust gate `lambda_i` deciding whether each claimed label is
//! taken at face value. The same builder, parameterized by a fixed
//! sentence-to-key assignment, also serves the multi-key attack.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{extract_color_code, SolveDiagnostics, StageOneBounds, StealConfig, StealResult};
use crate::corpus::{Corpus, Label, TokenWeights};
use crate::error::{input_err, solver_err, Result};
use crate::mip::{
    audit_assignment, ConstraintSense, MipModel, MipSolution, ObjectiveSense, SolveStatus,
    SolverConfig, VarId,
};

/// Variable layout of the gated models.
pub(crate) struct GatedLayout {
    pub m: usize,
    pub p: usize,
    /// lambda_t lives at `lam0 + t` for record position t.
    pub lam0: usize,
    /// b_hat for the w-th claimed-watermarked record at `bh0 + w`.
    pub bh0: usize,
    /// b_tilde for the n-th claimed-natural record and key k at
    /// `bt0 + n * p + k`.
    pub bt0: usize,
    pub n_wm: usize,
    pub n_nat: usize,
}

impl GatedLayout {
    fn c(&self, k: usize, j: usize) -> VarId {
        VarId(k * self.m + j)
    }

    pub(crate) fn extract_bounds(&self, assignment: &[f64]) -> StageOneBounds {
        let b_hat: Vec<f64> = (0..self.n_wm).map(|w| assignment[self.bh0 + w]).collect();
        let b_tilde: Vec<f64> = (0..self.n_nat * self.p)
            .map(|i| assignment[self.bt0 + i])
            .collect();
        StageOneBounds {
            b_hat_sum: b_hat.iter().sum(),
            b_tilde_sum: b_tilde.iter().sum(),
            b_abs: 0.0,
            b_hat,
            b_tilde,
        }
    }

    pub(crate) fn extract_lambda(&self, corpus: &Corpus, assignment: &[f64]) -> Vec<(u64, bool)> {
        corpus
            .records
            .iter()
            .enumerate()
            .map(|(t, r)| (r.id, assignment[self.lam0 + t] > 0.5))
            .collect()
    }

    pub(crate) fn extract_codes(&self, assignment: &[f64]) -> Vec<Vec<bool>> {
        (0..self.p)
            .map(|k| extract_color_code(assignment, k * self.m, self.m))
            .collect()
    }
}

/// Core builder: `rho[w]` is the key assigned to the w-th
/// claimed-watermarked record. Stage 2 is stage 1 plus the rescaled
/// aggregate bounds and a size objective (`weights` of `None` means the
/// plain unweighted count, as in the multi-key attack).
fn build_gated(
    corpus: &Corpus,
    config: &StealConfig,
    rho: &[usize],
    p: usize,
    stage2: Option<(&StageOneBounds, Option<&TokenWeights>)>,
) -> Result<(MipModel, GatedLayout)> {
    config.validate()?;
    if p == 0 {
        return Err(input_err!("key count must be at least 1"));
    }
    let m = corpus.m;
    let n = corpus.records.len();
    let n_wm = corpus.claimed_count(Label::Watermarked);
    let n_nat = n - n_wm;
    if rho.len() != n_wm {
        return Err(input_err!(
            "rho assigns {} sentences but the corpus claims {} watermarked",
            rho.len(),
            n_wm
        ));
    }
    if let Some(&bad) = rho.iter().find(|&&k| k >= p) {
        return Err(input_err!("rho references key {bad} but p = {p}"));
    }
    if let Some((_, Some(w))) = stage2 {
        if w.w.len() != m {
            return Err(input_err!("weight vector does not match vocabulary size"));
        }
    }

    let mut model = MipModel::new();
    for k in 0..p {
        for j in 0..m {
            if p == 1 {
                model.add_binary(format!("c_{j}"));
            } else {
                model.add_binary(format!("c{k}_{j}"));
            }
        }
    }
    let lam0 = p * m;
    for r in &corpus.records {
        model.add_binary(format!("lam_{}", r.id));
    }
    let bh0 = lam0 + n;
    for r in corpus.claimed(Label::Watermarked) {
        model.add_continuous(format!("bh_{}", r.id), 0.0, r.length as f64);
    }
    let bt0 = bh0 + n_wm;
    for r in corpus.claimed(Label::Natural) {
        for k in 0..p {
            let name = if p == 1 {
                format!("bt_{}", r.id)
            } else {
                format!("bt{k}_{}", r.id)
            };
            model.add_continuous(name, 0.0, r.length as f64);
        }
    }
    let layout = GatedLayout {
        m,
        p,
        lam0,
        bh0,
        bt0,
        n_wm,
        n_nat,
    };
    let q_pair = config.epsilon.map(|_| {
        let qw = model.add_continuous("qw", 0.0, 1.0);
        let qn = model.add_continuous("qn", 0.0, 1.0);
        (qw, qn)
    });

    let count_terms = |r: &crate::corpus::SentenceRecord, k: usize| -> Vec<(VarId, f64)> {
        r.counts
            .iter()
            .map(|(&j, &c)| (layout.c(k, j as usize), c as f64))
            .collect()
    };

    let (mut w_pos, mut n_pos) = (0usize, 0usize);
    for (t, r) in corpus.records.iter().enumerate() {
        let l = r.length as f64;
        let lam = VarId(lam0 + t);
        match r.claimed_label {
            Label::Watermarked => {
                let k = rho[w_pos];
                let bh = VarId(bh0 + w_pos);
                w_pos += 1;
                // G_k(S) >= b_hat + (lambda - 1) * l : vacuous at lambda=0.
                let mut terms = count_terms(r, k);
                terms.push((bh, -1.0));
                terms.push((lam, -l));
                model.add_constraint(format!("gw_{}", r.id), terms, ConstraintSense::Ge, -l);
                // lambda * l >= b_hat: untrusted sentences get a zero bound.
                model.add_constraint(
                    format!("gh_{}", r.id),
                    vec![(lam, l), (bh, -1.0)],
                    ConstraintSense::Ge,
                    0.0,
                );
                if let Some((qw, _)) = q_pair {
                    // Trusted watermarked green proportion >= qw.
                    let mut terms = count_terms(r, k);
                    terms.push((qw, -l));
                    terms.push((lam, -l));
                    model.add_constraint(format!("sw_{}", r.id), terms, ConstraintSense::Ge, -l);
                }
            }
            Label::Natural => {
                for k in 0..p {
                    let bt = VarId(bt0 + n_pos * p + k);
                    // G_k(S) <= b_tilde^k + (1 - lambda) * l.
                    let mut terms = count_terms(r, k);
                    terms.push((bt, -1.0));
                    terms.push((lam, l));
                    let name = if p == 1 {
                        format!("gn_{}", r.id)
                    } else {
                        format!("gn{k}_{}", r.id)
                    };
                    model.add_constraint(name, terms, ConstraintSense::Le, l);
                    if let Some((_, qn)) = q_pair {
                        // Trusted natural green proportion <= qn, any key.
                        let mut terms = count_terms(r, k);
                        terms.push((qn, -l));
                        terms.push((lam, l));
                        let name = if p == 1 {
                            format!("sn_{}", r.id)
                        } else {
                            format!("sn{k}_{}", r.id)
                        };
                        model.add_constraint(name, terms, ConstraintSense::Le, l);
                    }
                }
                n_pos += 1;
            }
        }
    }

    // Per-class trust budgets.
    for (label, tag) in [(Label::Watermarked, "wm"), (Label::Natural, "nat")] {
        let class: Vec<(VarId, f64)> = corpus
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.claimed_label == label)
            .map(|(t, _)| (VarId(lam0 + t), 1.0))
            .collect();
        if class.is_empty() {
            continue;
        }
        let size = class.len() as f64;
        model.add_constraint(
            format!("lam_{tag}_lo"),
            class.clone(),
            ConstraintSense::Ge,
            config.p_l * size,
        );
        model.add_constraint(
            format!("lam_{tag}_hi"),
            class,
            ConstraintSense::Le,
            config.p_u * size,
        );
    }
    for k in 0..p {
        let c_sum: Vec<(VarId, f64)> = (0..m).map(|j| (layout.c(k, j), 1.0)).collect();
        if let Some(eta) = config.eta {
            model.add_constraint(
                format!("size{k}"),
                c_sum.clone(),
                ConstraintSense::Le,
                eta * m as f64,
            );
        }
        if config.mu > 0 {
            model.add_constraint(
                format!("floor{k}"),
                c_sum,
                ConstraintSense::Ge,
                config.mu as f64,
            );
        }
    }
    if let (Some(eps), Some((qw, qn))) = (config.epsilon, q_pair) {
        model.add_constraint(
            "sep",
            vec![(qw, 1.0), (qn, -1.0)],
            ConstraintSense::Ge,
            eps,
        );
    }

    let bh_terms: Vec<(VarId, f64)> = (0..n_wm).map(|w| (VarId(bh0 + w), 1.0)).collect();
    let bt_terms: Vec<(VarId, f64)> =
        (0..n_nat * p).map(|i| (VarId(bt0 + i), 1.0)).collect();
    match stage2 {
        None => {
            let mut obj = bh_terms;
            obj.extend(bt_terms.iter().map(|&(v, _)| (v, -1.0)));
            model.set_objective(ObjectiveSense::Maximize, obj);
        }
        Some((bounds, weights)) => {
            model.add_constraint(
                "resh",
                bh_terms,
                ConstraintSense::Ge,
                config.beta_hat * bounds.b_hat_sum,
            );
            model.add_constraint(
                "rest",
                bt_terms,
                ConstraintSense::Le,
                config.beta_tilde * bounds.b_tilde_sum,
            );
            let mut obj: Vec<(VarId, f64)> = Vec::with_capacity(p * m);
            for k in 0..p {
                for j in 0..m {
                    let w = weights.map_or(1.0, |w| w.w[j]);
                    obj.push((layout.c(k, j), w));
                }
            }
            model.set_objective(ObjectiveSense::Minimize, obj);
        }
    }
    Ok((model, layout))
}

pub(crate) fn build_gated_stage1(
    corpus: &Corpus,
    config: &StealConfig,
    rho: &[usize],
    p: usize,
) -> Result<(MipModel, GatedLayout)> {
    build_gated(corpus, config, rho, p, None)
}

pub(crate) fn build_gated_stage2(
    corpus: &Corpus,
    config: &StealConfig,
    rho: &[usize],
    p: usize,
    bounds: &StageOneBounds,
    weights: Option<&TokenWeights>,
) -> Result<(MipModel, GatedLayout)> {
    build_gated(corpus, config, rho, p, Some((bounds, weights)))
}

/// AS2 stage 1 (single key): learn the bounds and the trust gates.
pub fn build_as2_stage1(corpus: &Corpus, config: &StealConfig) -> Result<MipModel> {
    let rho = vec![0usize; corpus.claimed_count(Label::Watermarked)];
    Ok(build_gated_stage1(corpus, config, &rho, 1)?.0)
}

/// AS2 stage 2 (single key): minimize the weighted list size under the
/// rescaled stage-1 sums.
pub fn build_as2_stage2(
    corpus: &Corpus,
    stage1: &StageOneBounds,
    weights: &TokenWeights,
    config: &StealConfig,
) -> Result<MipModel> {
    let rho = vec![0usize; corpus.claimed_count(Label::Watermarked)];
    Ok(build_gated_stage2(corpus, config, &rho, 1, stage1, Some(weights))?.0)
}

/// Multi-key stage 2 for a fixed sentence-to-key assignment `rho`
/// (unweighted size objective, as used inside the alternating attack).
pub fn build_multikey_stage2(
    corpus: &Corpus,
    config: &StealConfig,
    rho: &[usize],
    p: usize,
    stage1: &StageOneBounds,
) -> Result<MipModel> {
    Ok(build_gated_stage2(corpus, config, rho, p, stage1, None)?.0)
}

/// Relaxation ladder used when a gated stage-1 model is infeasible:
/// drop the separation margin first, then progressively widen the trust
/// budgets.
fn relaxation_ladder(config: &StealConfig) -> Vec<(StealConfig, String)> {
    let mut out = vec![(config.clone(), String::from("as-configured"))];
    if config.epsilon.is_some() {
        let mut c = config.clone();
        c.epsilon = None;
        out.push((c, String::from("epsilon-dropped")));
    }
    let mut widened = config.clone();
    widened.epsilon = None;
    widened.p_l = (config.p_l - 0.2).max(0.0);
    widened.p_u = (config.p_u + 0.2).min(1.0);
    out.push((widened, String::from("trust-budgets-widened")));
    let mut open = config.clone();
    open.epsilon = None;
    open.p_l = 0.0;
    open.p_u = 1.0;
    out.push((open, String::from("trust-budgets-open")));
    out
}

/// Solve stage 1 under the relaxation ladder; returns the configuration
/// that succeeded so stage 2 uses the same constraint set.
pub(crate) fn solve_stage1_relaxed(
    corpus: &Corpus,
    config: &StealConfig,
    rho: &[usize],
    p: usize,
    solver: &SolverConfig,
    stage_tag: &str,
    diags: &mut Vec<SolveDiagnostics>,
) -> Result<(StealConfig, MipSolution, GatedLayout)> {
    for (cfg, name) in relaxation_ladder(config) {
        let (model, layout) = build_gated_stage1(corpus, &cfg, rho, p)?;
        let sol = crate::mip::solve(&model, solver)?;
        if sol.status == SolveStatus::Infeasible {
            continue;
        }
        if sol.assignment.is_empty() {
            return Err(solver_err!(
                "{stage_tag} ({name}): no feasible point within the solver budget"
            ));
        }
        let violations = audit_assignment(&model, &sol.assignment, 1e-6);
        if !violations.is_empty() {
            return Err(solver_err!(
                "{stage_tag} ({name}): solution failed the feasibility audit"
            ));
        }
        diags.push(SolveDiagnostics::from_solution(
            &format!("{stage_tag} ({name})"),
            &sol,
        ));
        return Ok((cfg, sol, layout));
    }
    Err(solver_err!(
        "{stage_tag}: infeasible under every relaxation step"
    ))
}

/// Stage 2 with a fallback: at `beta_tilde = 1` the stage-1 point itself
/// is feasible, so the fallback cannot fail on a solvable instance.
pub(crate) fn solve_stage2_with_fallback(
    corpus: &Corpus,
    config: &StealConfig,
    rho: &[usize],
    p: usize,
    bounds: &StageOneBounds,
    weights: Option<&TokenWeights>,
    solver: &SolverConfig,
    stage_tag: &str,
    diags: &mut Vec<SolveDiagnostics>,
) -> Result<(MipSolution, GatedLayout)> {
    let mut relaxed = config.clone();
    relaxed.beta_tilde = 1.0;
    let attempts = [(config.clone(), ""), (relaxed, " (beta_tilde=1)")];
    for (i, (cfg, suffix)) in attempts.iter().enumerate() {
        let (model, layout) = build_gated_stage2(corpus, cfg, rho, p, bounds, weights)?;
        let sol = crate::mip::solve(&model, solver)?;
        if sol.status == SolveStatus::Infeasible && i == 0 {
            continue;
        }
        if sol.status == SolveStatus::Infeasible || sol.assignment.is_empty() {
            return Err(solver_err!("{stage_tag}: stage 2 infeasible"));
        }
        let violations = audit_assignment(&model, &sol.assignment, 1e-6);
        if !violations.is_empty() {
            return Err(solver_err!(
                "{stage_tag}: stage-2 solution failed the feasibility audit"
            ));
        }
        diags.push(SolveDiagnostics::from_solution(
            &format!("{stage_tag}{suffix}"),
            &sol,
        ));
        return Ok((sol, layout));
    }
    unreachable!("both stage-2 attempts returned without a decision")
}

/// Full AS2 attack: stage 1 (with relaxation ladder), stage 2 (with
/// fallback), trust gates and stolen list from the stage-2 point.
pub fn steal_as2(
    corpus: &Corpus,
    weights: &TokenWeights,
    config: &StealConfig,
    solver: &SolverConfig,
) -> Result<StealResult> {
    steal_gated_single(corpus, Some(weights), config, solver)
}

pub(crate) fn steal_gated_single(
    corpus: &Corpus,
    weights: Option<&TokenWeights>,
    config: &StealConfig,
    solver: &SolverConfig,
) -> Result<StealResult> {
    let rho = vec![0usize; corpus.claimed_count(Label::Watermarked)];
    let mut diags = Vec::new();
    let (cfg, sol1, layout) =
        solve_stage1_relaxed(corpus, config, &rho, 1, solver, "as2-stage1", &mut diags)?;
    let bounds = layout.extract_bounds(&sol1.assignment);
    let (sol2, layout) = solve_stage2_with_fallback(
        corpus,
        &cfg,
        &rho,
        1,
        &bounds,
        weights,
        solver,
        "as2-stage2",
        &mut diags,
    )?;
    let mut result = StealResult::single(layout.extract_codes(&sol2.assignment).remove(0));
    result.lambda = Some(layout.extract_lambda(corpus, &sol2.assignment));
    result.stage1 = Some(bounds);
    result.diagnostics = diags;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, inject_errors};
    use crate::mip::solve;
    use crate::vocab::{build_model, ModelConfig};
    use crate::watermark::WatermarkParams;

    fn small_setup(
        n_wm: usize,
        n_nat: usize,
        seed: u64,
    ) -> (Corpus, TokenWeights) {
        let (model, _) = build_model(3, 40, 8, &ModelConfig::default()).unwrap();
        let params = WatermarkParams::single(7, 0.25, 4.0);
        let corpus = generate_corpus(&model, &params, n_wm, n_nat, (30, 60), seed, false).unwrap();
        let weights = crate::corpus::compute_token_weights(&corpus).unwrap();
        (corpus, weights)
    }

    #[test]
    fn untrusted_sentence_forces_zero_bound() {
        // lambda_i = 0 forces b_hat_i = 0 through the gate row; check on
        // a model where the gates are pinned by p_l = p_u = 0 for the
        // watermarked class being impossible, so instead verify the
        // algebra directly: audit a point with lambda=0, b_hat>0.
        let (corpus, _) = small_setup(2, 2, 11);
        let config = StealConfig::default();
        let model = build_as2_stage1(&corpus, &config).unwrap();
        let n_vars = model.num_vars();
        let mut x = alloc::vec![0.0; n_vars];
        // lambda all zero, b_hat of first sentence positive: gate broken.
        let lam0 = 40; // p=1, m=40
        let bh0 = lam0 + 4;
        x[bh0] = 5.0;
        let violations = audit_assignment(&model, &x, 1e-9);
        assert!(violations.iter().any(|v| v.subject.starts_with("gh_")));
        // With the bound at zero the gate holds and gw is vacuous.
        x[bh0] = 0.0;
        let violations = audit_assignment(&model, &x, 1e-9);
        assert!(!violations.iter().any(|v| v.subject.starts_with("gh_")));
        assert!(!violations.iter().any(|v| v.subject.starts_with("gw_")));
    }

    #[test]
    fn full_trust_forces_all_lambda_one() {
        let (corpus, weights) = small_setup(6, 6, 13);
        let mut config = StealConfig::default();
        config.p_l = 1.0;
        config.p_u = 1.0;
        let result = steal_as2(&corpus, &weights, &config, &Default::default()).unwrap();
        let lambda = result.lambda.unwrap();
        assert_eq!(lambda.len(), 12);
        assert!(lambda.iter().all(|&(_, on)| on));
    }

    #[test]
    fn as2_two_stage_runs_clean() {
        let (corpus, weights) = small_setup(8, 8, 17);
        let config = StealConfig::default();
        let result = steal_as2(&corpus, &weights, &config, &Default::default()).unwrap();
        assert_eq!(result.color_codes.len(), 1);
        assert!(result.stage1.is_some());
        // Both stages reported.
        assert!(result.diagnostics.len() >= 2);
        // The gates trust at least p_l of each class.
        let lambda = result.lambda.unwrap();
        let trusted = lambda.iter().filter(|&&(_, on)| on).count();
        assert!(trusted >= (0.98 * 8.0) as usize * 2);
    }

    #[test]
    fn separation_rows_appear_only_with_epsilon() {
        let (corpus, _) = small_setup(3, 3, 19);
        let plain = build_as2_stage1(&corpus, &StealConfig::default()).unwrap();
        assert!(!plain.constraints.iter().any(|c| c.name == "sep"));
        let mut config = StealConfig::default();
        config.epsilon = Some(0.02);
        let with_eps = build_as2_stage1(&corpus, &config).unwrap();
        assert!(with_eps.constraints.iter().any(|c| c.name == "sep"));
        assert!(with_eps
            .constraints
            .iter()
            .any(|c| c.name.starts_with("sw_")));
    }

    #[test]
    fn eta_row_caps_list_size() {
        let (corpus, _) = small_setup(3, 3, 23);
        let mut config = StealConfig::default();
        config.eta = Some(0.25);
        let model = build_as2_stage1(&corpus, &config).unwrap();
        let cap = model.constraints.iter().find(|c| c.name == "size0").unwrap();
        assert_eq!(cap.rhs, 0.25 * 40.0);
    }

    #[test]
    fn relaxation_ladder_rescues_impossible_margin() {
        let (corpus, weights) = small_setup(6, 6, 29);
        let mut config = StealConfig::default();
        // Gates wide enough that only the margin is at fault; a margin
        // larger than any proportion gap is infeasible as configured and
        // solvable once epsilon is dropped.
        config.p_l = 0.8;
        config.p_u = 1.0;
        config.epsilon = Some(5.0);
        let result = steal_as2(&corpus, &weights, &config, &Default::default()).unwrap();
        assert!(result.diagnostics[0].stage.contains("epsilon-dropped"));
    }

    #[test]
    fn stage2_on_error_corpus_still_solves() {
        let (model, _) = build_model(3, 40, 8, &ModelConfig::default()).unwrap();
        let params = WatermarkParams::single(7, 0.25, 4.0);
        let clean = generate_corpus(&model, &params, 10, 10, (30, 60), 31, false).unwrap();
        let corpus = inject_errors(&clean, 0.3, 5).unwrap();
        let weights = crate::corpus::compute_token_weights(&corpus).unwrap();
        let config = StealConfig::for_error_rate(0.3, 0.4);
        let result = steal_as2(&corpus, &weights, &config, &Default::default()).unwrap();
        let size = result.color_codes[0].iter().filter(|&&g| g).count();
        assert!(size as f64 <= 0.4 * 40.0 + 1e-9, "size {size}");
    }

    // Stage-1 optimum pushes b_hat to each trusted sentence's achievable
    // green count: with one sentence and full trust the bound equals the
    // sentence length when the budgetless list can cover all its tokens.
    #[test]
    fn stage1_bound_reaches_length_when_coverable() {
        use crate::corpus::{CorpusMeta, SentenceRecord};
        use alloc::collections::BTreeMap;
        let counts: BTreeMap<u32, u32> = [(0u32, 10u32), (1, 12)].into_iter().collect();
        let corpus = Corpus {
            m: 6,
            meta: CorpusMeta {
                seed: 0,
                gamma: 0.25,
                delta: 0.0,
                keys: alloc::vec![],
                r_c: 0.0,
                length_range: (20, 30),
            },
            records: alloc::vec![SentenceRecord {
                id: 0,
                length: 22,
                counts,
                claimed_label: Label::Watermarked,
                true_label: Label::Watermarked,
                true_key_index: None,
                tokens: None,
            }],
        };
        let mut config = StealConfig::default();
        config.p_l = 1.0;
        config.p_u = 1.0;
        let model = build_as2_stage1(&corpus, &config).unwrap();
        let sol = solve(&model, &Default::default()).unwrap();
        assert!((sol.objective - 22.0).abs() < 1e-6, "{}", sol.objective);
    }
}
