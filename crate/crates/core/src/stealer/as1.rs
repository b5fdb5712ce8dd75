//! Stealing with detector access: the attacker knows gamma and z*, so
//! each sentence carries a usable green-count threshold g_i.

use alloc::format;
use alloc::vec::Vec;

use super::{
    extract_color_code, solve_stage, OracleCounts, StageOneBounds, StealConfig, StealResult,
};
use crate::corpus::{Corpus, Label, TokenWeights};
use crate::detector::watermark_threshold;
use crate::error::{input_err, Result};
use crate::mip::{ConstraintSense, MipModel, ObjectiveSense, SolverConfig, VarId};

fn check_weights(corpus: &Corpus, weights: &TokenWeights) -> Result<()> {
    if weights.w.len() != corpus.m {
        return Err(input_err!(
            "weight vector length {} does not match vocabulary size {}",
            weights.w.len(),
            corpus.m
        ));
    }
    Ok(())
}

/// `G(S_i)` as a linear expression over the `c_j` block.
fn green_count_terms(record: &crate::corpus::SentenceRecord) -> Vec<(VarId, f64)> {
    record
        .counts
        .iter()
        .map(|(&j, &c)| (VarId(j as usize), c as f64))
        .collect()
}

fn add_c_block(model: &mut MipModel, m: usize) -> Vec<VarId> {
    (0..m).map(|j| model.add_binary(format!("c_{j}"))).collect()
}

fn budget_row(model: &mut MipModel, c: &[VarId], gamma: f64, m: usize) {
    model.add_constraint(
        "budget",
        c.iter().map(|&v| (v, 1.0)).collect(),
        ConstraintSense::Le,
        gamma * m as f64,
    );
}

fn weighted_size_objective(model: &mut MipModel, c: &[VarId], weights: &TokenWeights) {
    model.set_objective(
        ObjectiveSense::Minimize,
        c.iter()
            .enumerate()
            .map(|(j, &v)| (v, weights.w[j]))
            .collect(),
    );
}

/// Vanilla-AS1: thresholds as bounds. Claimed-watermarked sentences must
/// stay detectable under the stolen list, claimed-natural ones must not,
/// and the list cannot exceed the gamma budget.
pub fn build_vanilla_as1(
    corpus: &Corpus,
    weights: &TokenWeights,
    config: &StealConfig,
) -> Result<MipModel> {
    config.validate()?;
    check_weights(corpus, weights)?;
    let (gamma, z_star) = config.as1_params()?;
    let mut model = MipModel::new();
    let c = add_c_block(&mut model, corpus.m);
    for r in &corpus.records {
        let g = watermark_threshold(r.length, gamma, z_star)?;
        let terms = green_count_terms(r);
        match r.claimed_label {
            Label::Watermarked => {
                if g >= r.length as f64 {
                    return Err(input_err!(
                        "sentence {} is too short to ever exceed the detection threshold",
                        r.id
                    ));
                }
                model.add_constraint(format!("gw_{}", r.id), terms, ConstraintSense::Ge, g);
            }
            Label::Natural => {
                model.add_constraint(format!("gn_{}", r.id), terms, ConstraintSense::Le, g);
            }
        }
    }
    budget_row(&mut model, &c, gamma, corpus.m);
    weighted_size_objective(&mut model, &c, weights);
    Ok(model)
}

/// Oracle-AS1: Vanilla with thresholds replaced by the exact green
/// counts of each sentence under the true split.
pub fn build_oracle_as1(
    corpus: &Corpus,
    oracle: &OracleCounts,
    weights: &TokenWeights,
    config: &StealConfig,
) -> Result<MipModel> {
    config.validate()?;
    check_weights(corpus, weights)?;
    let (gamma, _) = config.as1_params()?;
    let n_wm = corpus.claimed_count(Label::Watermarked);
    let n_nat = corpus.claimed_count(Label::Natural);
    if oracle.watermarked.len() != n_wm || oracle.natural.len() != n_nat {
        return Err(input_err!(
            "oracle counts cover {}/{} sentences but the corpus has {}/{}",
            oracle.watermarked.len(),
            oracle.natural.len(),
            n_wm,
            n_nat
        ));
    }
    let mut model = MipModel::new();
    let c = add_c_block(&mut model, corpus.m);
    let (mut wi, mut ni) = (0usize, 0usize);
    for r in &corpus.records {
        let terms = green_count_terms(r);
        match r.claimed_label {
            Label::Watermarked => {
                let g = oracle.watermarked[wi] as f64;
                wi += 1;
                model.add_constraint(format!("gw_{}", r.id), terms, ConstraintSense::Ge, g);
            }
            Label::Natural => {
                let g = oracle.natural[ni] as f64;
                ni += 1;
                model.add_constraint(format!("gn_{}", r.id), terms, ConstraintSense::Le, g);
            }
        }
    }
    budget_row(&mut model, &c, gamma, corpus.m);
    weighted_size_objective(&mut model, &c, weights);
    Ok(model)
}

/// Variable layout of the Pro models: `c` block, then one bound variable
/// per record in record order, then the absolute-deviation variable.
struct ProLayout {
    m: usize,
    /// (record position -> bound variable index) in record order.
    bound_idx: Vec<usize>,
    babs_idx: usize,
}

impl ProLayout {
    fn of(corpus: &Corpus) -> Self {
        let m = corpus.m;
        let bound_idx = (0..corpus.records.len()).map(|t| m + t).collect();
        Self {
            m,
            bound_idx,
            babs_idx: m + corpus.records.len(),
        }
    }

    fn extract_bounds(&self, corpus: &Corpus, assignment: &[f64]) -> StageOneBounds {
        let mut b_hat = Vec::new();
        let mut b_tilde = Vec::new();
        for (t, r) in corpus.records.iter().enumerate() {
            let v = assignment[self.bound_idx[t]];
            match r.claimed_label {
                Label::Watermarked => b_hat.push(v),
                Label::Natural => b_tilde.push(v),
            }
        }
        StageOneBounds {
            b_hat_sum: b_hat.iter().sum(),
            b_tilde_sum: b_tilde.iter().sum(),
            b_abs: assignment[self.babs_idx],
            b_hat,
            b_tilde,
        }
    }
}

/// Pro-AS1 stage 1: tighten the per-sentence bounds themselves. Pushes
/// watermarked bounds up from g_i and pulls the natural bound total
/// toward its expectation gamma * sum(l_i) via the linearized absolute
/// deviation.
pub fn build_pro_as1_stage1(corpus: &Corpus, config: &StealConfig) -> Result<MipModel> {
    config.validate()?;
    let (gamma, z_star) = config.as1_params()?;
    let mut model = MipModel::new();
    let c = add_c_block(&mut model, corpus.m);
    let mut bh: Vec<VarId> = Vec::new();
    let mut bt: Vec<VarId> = Vec::new();
    let mut nat_length_sum = 0.0;
    for r in &corpus.records {
        let g = watermark_threshold(r.length, gamma, z_star)?;
        let l = r.length as f64;
        match r.claimed_label {
            Label::Watermarked => {
                if g >= l {
                    return Err(input_err!(
                        "sentence {} is too short to ever exceed the detection threshold",
                        r.id
                    ));
                }
                let b = model.add_continuous(format!("bh_{}", r.id), g, l);
                bh.push(b);
                let mut terms = green_count_terms(r);
                terms.push((b, -1.0));
                model.add_constraint(format!("gw_{}", r.id), terms, ConstraintSense::Ge, 0.0);
            }
            Label::Natural => {
                let b = model.add_continuous(format!("bt_{}", r.id), 0.0, g.min(l));
                bt.push(b);
                nat_length_sum += l;
                let mut terms = green_count_terms(r);
                terms.push((b, -1.0));
                model.add_constraint(format!("gn_{}", r.id), terms, ConstraintSense::Le, 0.0);
            }
        }
    }
    let babs = model.add_continuous("babs", 0.0, f64::INFINITY);
    // babs >= |sum(bt) - gamma * sum(l)| as two half-planes.
    let target = gamma * nat_length_sum;
    let mut pos: Vec<(VarId, f64)> = bt.iter().map(|&b| (b, 1.0)).collect();
    pos.push((babs, -1.0));
    model.add_constraint("abs_pos", pos, ConstraintSense::Le, target);
    let mut neg: Vec<(VarId, f64)> = bt.iter().map(|&b| (b, 1.0)).collect();
    neg.push((babs, 1.0));
    model.add_constraint("abs_neg", neg, ConstraintSense::Ge, target);
    budget_row(&mut model, &c, gamma, corpus.m);
    let mut obj: Vec<(VarId, f64)> = bh.iter().map(|&b| (b, 1.0)).collect();
    obj.push((babs, -1.0));
    model.set_objective(ObjectiveSense::Maximize, obj);
    Ok(model)
}

/// Pro-AS1 stage 2: same feasible set plus the aggregate rescaled
/// stage-1 sums; the objective reverts to the weighted list size.
pub fn build_pro_as1_stage2(
    corpus: &Corpus,
    stage1: &StageOneBounds,
    weights: &TokenWeights,
    config: &StealConfig,
) -> Result<MipModel> {
    check_weights(corpus, weights)?;
    let mut model = build_pro_as1_stage1(corpus, config)?;
    let layout = ProLayout::of(corpus);
    let mut bh_terms: Vec<(VarId, f64)> = Vec::new();
    let mut bt_terms: Vec<(VarId, f64)> = Vec::new();
    for (t, r) in corpus.records.iter().enumerate() {
        let v = VarId(layout.bound_idx[t]);
        match r.claimed_label {
            Label::Watermarked => bh_terms.push((v, 1.0)),
            Label::Natural => bt_terms.push((v, 1.0)),
        }
    }
    model.add_constraint(
        "resh",
        bh_terms,
        ConstraintSense::Ge,
        config.beta_hat * stage1.b_hat_sum,
    );
    model.add_constraint(
        "rest",
        bt_terms,
        ConstraintSense::Le,
        config.beta_tilde * stage1.b_tilde_sum,
    );
    let c: Vec<VarId> = (0..layout.m).map(VarId).collect();
    weighted_size_objective(&mut model, &c, weights);
    Ok(model)
}

pub fn steal_vanilla(
    corpus: &Corpus,
    weights: &TokenWeights,
    config: &StealConfig,
    solver: &SolverConfig,
) -> Result<StealResult> {
    let model = build_vanilla_as1(corpus, weights, config)?;
    let (sol, diag) = solve_stage(&model, solver, "vanilla-as1")?;
    let mut result = StealResult::single(extract_color_code(&sol.assignment, 0, corpus.m));
    result.diagnostics.push(diag);
    Ok(result)
}

pub fn steal_oracle(
    corpus: &Corpus,
    oracle: &OracleCounts,
    weights: &TokenWeights,
    config: &StealConfig,
    solver: &SolverConfig,
) -> Result<StealResult> {
    let model = build_oracle_as1(corpus, oracle, weights, config)?;
    let (sol, diag) = solve_stage(&model, solver, "oracle-as1")?;
    let mut result = StealResult::single(extract_color_code(&sol.assignment, 0, corpus.m));
    result.diagnostics.push(diag);
    Ok(result)
}

pub fn steal_pro(
    corpus: &Corpus,
    weights: &TokenWeights,
    config: &StealConfig,
    solver: &SolverConfig,
) -> Result<StealResult> {
    let stage1_model = build_pro_as1_stage1(corpus, config)?;
    let (sol1, diag1) = solve_stage(&stage1_model, solver, "pro-as1-stage1")?;
    let layout = ProLayout::of(corpus);
    let bounds = layout.extract_bounds(corpus, &sol1.assignment);
    let stage2_model = build_pro_as1_stage2(corpus, &bounds, weights, config)?;
    let (sol2, diag2) = solve_stage(&stage2_model, solver, "pro-as1-stage2")?;
    let mut result = StealResult::single(extract_color_code(&sol2.assignment, 0, corpus.m));
    result.stage1 = Some(bounds);
    result.diagnostics = alloc::vec![diag1, diag2];
    Ok(result)
}
