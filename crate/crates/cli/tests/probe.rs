use std::time::Instant;

use wmforge_core::corpus::{compute_token_weights, frequency_baseline_split, generate_corpus};
use wmforge_core::mip::{solve, SolverConfig};
use wmforge_core::stealer::{
    build_oracle_as1, build_pro_as1_stage1, build_pro_as1_stage2, build_vanilla_as1, evaluate_steal,
    OracleCounts, StageOneBounds, StealConfig,
};
use wmforge_core::vocab::{build_model, ModelConfig};
use wmforge_core::watermark::{derive_split, WatermarkParams};

#[test]
fn probe_cell_timing() {
    let t0 = Instant::now();
    let (model, _) = build_model(100, 500, 16, &ModelConfig::default()).unwrap();
    println!("model: {:?}", t0.elapsed());

    let gamma = 0.25;
    let delta = 2.0;
    let params = WatermarkParams::single(7, gamma, delta);
    let t = Instant::now();
    let corpus = generate_corpus(&model, &params, 400, 400, (80, 200), 1, false).unwrap();
    println!("corpus: {:?}", t.elapsed());
    let weights = compute_token_weights(&corpus).unwrap();
    let truth = derive_split(wmforge_core::watermark::WatermarkKey(7), gamma, 500).unwrap();
    let solver = SolverConfig::default();
    let cfg = StealConfig::for_as1(gamma, 4.0);

    let t = Instant::now();
    let freq = frequency_baseline_split(&corpus, None).unwrap();
    let m = evaluate_steal(&[freq.color_code], &[truth.clone()]).unwrap();
    println!("freq: {:?} precision {:?}", t.elapsed(), m.per_key[0].precision);

    let t = Instant::now();
    let s1 = build_pro_as1_stage1(&corpus, &cfg).unwrap();
    let sol1 = solve(&s1, &solver).unwrap();
    println!(
        "pro stage1: {:?} status {:?} nodes {} iters {}",
        t.elapsed(),
        sol1.status,
        sol1.nodes,
        sol1.simplex_iterations
    );
    // Pro layout: c block (m), then one bound per record, then b_abs.
    let n = corpus.records.len();
    let mut b_hat = Vec::new();
    let mut b_tilde = Vec::new();
    for (i, r) in corpus.records.iter().enumerate() {
        let v = sol1.assignment[500 + i];
        match r.claimed_label {
            wmforge_core::corpus::Label::Watermarked => b_hat.push(v),
            wmforge_core::corpus::Label::Natural => b_tilde.push(v),
        }
    }
    let bounds = StageOneBounds {
        b_hat_sum: b_hat.iter().sum(),
        b_tilde_sum: b_tilde.iter().sum(),
        b_abs: sol1.assignment[500 + n],
        b_hat,
        b_tilde,
    };
    // Stage 2 diagnostics: root LP feasibility, then solves under the
    // admissible beta corner cases, 120 s each.
    for (bh_f, bt_f) in [(0.95f64, 0.95f64), (0.95, 1.0), (0.9, 1.0), (0.9, 0.95)] {
        let mut c2 = cfg.clone();
        c2.beta_hat = bh_f;
        c2.beta_tilde = bt_f;
        let s2 = build_pro_as1_stage2(&corpus, &bounds, &weights, &c2).unwrap();
        let t = Instant::now();
        match wmforge_core::mip::solve_lp_relaxation(&s2).unwrap() {
            wmforge_core::mip::LpOutcome::Optimal { objective, .. } => {
                println!("stage2 b=({bh_f},{bt_f}) root LP obj {objective} in {:?}", t.elapsed())
            }
            other => {
                println!("stage2 b=({bh_f},{bt_f}) root LP {other:?} in {:?}", t.elapsed());
                continue;
            }
        }
        let capped = SolverConfig { time_limit_seconds: 120.0, ..SolverConfig::default() };
        let t = Instant::now();
        let sol2 = solve(&s2, &capped).unwrap();
        let prec = if sol2.assignment.len() >= 500 {
            let code: Vec<bool> = sol2.assignment[..500].iter().map(|&v| v > 0.5).collect();
            evaluate_steal(&[code], &[truth.clone()]).unwrap().per_key[0].precision
        } else {
            None
        };
        println!(
            "stage2 b=({bh_f},{bt_f}): {:?} status {:?} obj {} nodes {} iters {} precision {:?}",
            t.elapsed(),
            sol2.status,
            sol2.objective,
            sol2.nodes,
            sol2.simplex_iterations,
            prec
        );
    }
    println!("total: {:?}", t0.elapsed());
}
