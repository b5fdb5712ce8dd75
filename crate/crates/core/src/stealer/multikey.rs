//! Multi-key stealing: the corpus mixes sentences watermarked under p
//! unknown keys. Alternate between (a) solving the gated two-stage
//! program for a fixed sentence-to-key assignment and (b) reassigning
//! each watermarked sentence to the stolen list that colors the most of
//! its tokens green, until the assignment reaches a fixed point.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::as2::{solve_stage1_relaxed, solve_stage2_with_fallback, GatedLayout};
use super::{StealConfig, StealResult};
use crate::corpus::{Corpus, Label};
use crate::error::{input_err, Result};
use crate::mip::SolverConfig;
use crate::rng::{derive_seed, stream, uniform_index};
use crate::watermark::GreenRedSplit;

/// Stream index separating assignment initialization from every other
/// consumer of the master seed.
const RHO_STREAM: u64 = 0xA55;

/// Steal `p` green lists at once. `seed` drives only the initial random
/// assignment; everything after that is deterministic. With `p = 1` the
/// loop converges immediately and the result matches the single-key
/// gated attack exactly.
pub fn steal_multikey(
    corpus: &Corpus,
    config: &StealConfig,
    p: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<StealResult> {
    if p == 0 {
        return Err(input_err!("key count must be at least 1"));
    }
    config.validate()?;
    let wm_ids: Vec<u64> = corpus.claimed(Label::Watermarked).map(|r| r.id).collect();
    let n_wm = wm_ids.len();
    if n_wm < p {
        return Err(input_err!(
            "cannot split {} claimed-watermarked sentences across {} keys",
            n_wm,
            p
        ));
    }

    let mut rho: Vec<usize> = if p == 1 {
        vec![0; n_wm]
    } else {
        let mut rng = stream(derive_seed(seed, RHO_STREAM));
        (0..n_wm).map(|_| uniform_index(&mut rng, p)).collect()
    };

    let max_iter = config.max_iterations.max(1);
    let mut diags = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last: Option<(Vec<Vec<bool>>, Vec<(u64, bool)>, super::StageOneBounds)> = None;
    for it in 0..max_iter {
        iterations = it + 1;
        let tag1 = format!("multikey-it{it}-stage1");
        let (cfg, sol1, layout) =
            solve_stage1_relaxed(corpus, config, &rho, p, solver, &tag1, &mut diags)?;
        let bounds = layout.extract_bounds(&sol1.assignment);
        let tag2 = format!("multikey-it{it}-stage2");
        let (sol2, layout): (_, GatedLayout) = solve_stage2_with_fallback(
            corpus, &cfg, &rho, p, &bounds, None, solver, &tag2, &mut diags,
        )?;
        let codes = layout.extract_codes(&sol2.assignment);
        let lambda = layout.extract_lambda(corpus, &sol2.assignment);
        let next_rho = reassign(corpus, &codes);
        last = Some((codes, lambda, bounds));
        if next_rho == rho {
            converged = true;
            break;
        }
        rho = next_rho;
    }

    let (codes, lambda, bounds) = last.expect("at least one iteration ran");
    Ok(StealResult {
        color_codes: codes,
        lambda: Some(lambda),
        rho: Some(wm_ids.into_iter().zip(rho).collect()),
        stage1: Some(bounds),
        diagnostics: diags,
        iterations: Some(iterations),
        converged: Some(converged),
    })
}

/// Assign each claimed-watermarked sentence to the key whose stolen list
/// colors the most of its tokens green; ties go to the lowest key index.
fn reassign(corpus: &Corpus, codes: &[Vec<bool>]) -> Vec<usize> {
    let splits: Vec<GreenRedSplit> = codes
        .iter()
        .map(|c| GreenRedSplit::from_color_code(c.clone()))
        .collect();
    corpus
        .claimed(Label::Watermarked)
        .map(|r| {
            let mut best = (0usize, r.green_count(&splits[0]));
            for (k, split) in splits.iter().enumerate().skip(1) {
                let g = r.green_count(split);
                if g > best.1 {
                    best = (k, g);
                }
            }
            best.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, CorpusMeta, SentenceRecord};
    use crate::stealer::as2::steal_gated_single;
    use crate::stealer::evaluate_steal;
    use crate::vocab::{build_model, ModelConfig};
    use crate::watermark::WatermarkParams;
    use alloc::collections::BTreeMap;

    #[test]
    fn single_key_reduces_to_gated_attack() {
        let (model, _) = build_model(3, 40, 8, &ModelConfig::default()).unwrap();
        let params = WatermarkParams::single(7, 0.25, 4.0);
        let corpus = generate_corpus(&model, &params, 8, 8, (30, 60), 41, false).unwrap();
        let config = StealConfig::default();
        let solver = SolverConfig::default();
        let multi = steal_multikey(&corpus, &config, 1, 999, &solver).unwrap();
        let single = steal_gated_single(&corpus, None, &config, &solver).unwrap();
        assert_eq!(multi.color_codes, single.color_codes);
        assert_eq!(multi.lambda, single.lambda);
        assert_eq!(multi.converged, Some(true));
        assert_eq!(multi.iterations, Some(1));
    }

    fn separable_fixture() -> (Corpus, alloc::vec::Vec<GreenRedSplit>) {
        let m = 24usize;
        let mut records = Vec::new();
        let mut id = 0u64;
        for k in 0..2usize {
            let base = k * 12;
            for s in 0..6usize {
                let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
                for t in 0..18u32 {
                    *counts.entry(base as u32 + (t + s as u32) % 6).or_insert(0) += 1;
                }
                *counts.entry(base as u32 + 6 + (s as u32 % 6)).or_insert(0) += 2;
                records.push(SentenceRecord {
                    id, length: 20, counts,
                    claimed_label: Label::Watermarked,
                    true_label: Label::Watermarked,
                    true_key_index: Some(k), tokens: None,
                });
                id += 1;
            }
        }
        for s in 0..8usize {
            let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
            for t in 0..20u32 {
                *counts.entry(6 + (t + s as u32) % 6).or_insert(0) += 1;
            }
            records.push(SentenceRecord {
                id, length: 20, counts,
                claimed_label: Label::Natural, true_label: Label::Natural,
                true_key_index: None, tokens: None,
            });
            id += 1;
        }
        let corpus = Corpus {
            m,
            meta: CorpusMeta { seed: 0, gamma: 0.25, delta: 0.0, keys: alloc::vec![1, 2], r_c: 0.0, length_range: (20, 20) },
            records,
        };
        let mut true_splits = Vec::new();
        for k in 0..2usize {
            let mut code = alloc::vec![false; m];
            for j in 0..6 { code[k * 12 + j] = true; }
            true_splits.push(GreenRedSplit::from_color_code(code));
        }
        (corpus, true_splits)
    }


    // A separable instance: two keys over disjoint token blocks, every
    // watermarked sentence drawing mostly from its own block's greens
    // while the naturals pin down block 0's red zone. At a converged
    // fixed point both true lists must be fully recovered (matched to
    // distinct stolen lists) and every sentence's assigned list must
    // cover its block's greens. Exact per-sentence assignment recovery
    // is not guaranteed by the alternating scheme — a list covering
    // both blocks ties on reassignment — so that is not asserted.
    #[test]
    fn separable_two_key_instance_recovers_both_lists() {
        let (corpus, true_splits) = separable_fixture();
        let mut config = StealConfig::default();
        config.p_l = 1.0;
        config.p_u = 1.0;
        config.mu = 2;
        // Cap each list at its true size; without this, a single oversized
        // list covering both blocks ties the optimum and which one the
        // solver returns is an accident of pivot order.
        config.eta = Some(0.25);
        let result = steal_multikey(&corpus, &config, 2, 1, &Default::default()).unwrap();
        assert_eq!(result.converged, Some(true));

        let metrics = evaluate_steal(&result.color_codes, &true_splits).unwrap();
        assert_ne!(
            metrics.per_key[0].matched_true_key,
            metrics.per_key[1].matched_true_key
        );
        for key in &metrics.per_key {
            assert!(
                (key.recall.unwrap() - 1.0).abs() < 1e-12,
                "recall {:?}",
                key.recall
            );
            assert!(key.precision.unwrap() >= 0.5, "precision {:?}", key.precision);
        }
        // Fixed-point consistency: each sentence's assigned stolen list
        // contains all of its true block's green tokens.
        let rho = result.rho.unwrap();
        for (w, &(_, k)) in rho.iter().enumerate() {
            let block = w / 6; // six sentences per true key, in order
            let code = &result.color_codes[k];
            assert!(
                (0..6).all(|j| code[block * 12 + j]),
                "sentence {w} assigned to a list missing its greens"
            );
        }
    }

    #[test]
    fn reassignment_prefers_lowest_index_on_ties() {
        let (model, _) = build_model(3, 20, 8, &ModelConfig::default()).unwrap();
        let params = WatermarkParams::single(7, 0.25, 4.0);
        let corpus = generate_corpus(&model, &params, 3, 0, (20, 30), 43, false).unwrap();
        let code = vec![true; 20];
        let rho = reassign(&corpus, &[code.clone(), code]);
        assert!(rho.iter().all(|&k| k == 0));
    }

    #[test]
    fn rejects_more_keys_than_sentences() {
        let (model, _) = build_model(3, 20, 8, &ModelConfig::default()).unwrap();
        let params = WatermarkParams::single(7, 0.25, 4.0);
        let corpus = generate_corpus(&model, &params, 2, 2, (20, 30), 47, false).unwrap();
        assert!(steal_multikey(&corpus, &StealConfig::default(), 3, 1, &Default::default()).is_err());
    }
}
