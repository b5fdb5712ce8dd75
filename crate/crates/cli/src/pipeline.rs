//! End-to-end experiment orchestration: generate -> detect -> steal ->
//! remove -> evaluate, with every stage's artifacts written to the
//! output directory as soon as the stage completes.

use std::path::Path;

use rayon::prelude::*;
use wmforge_core::corpus::{
    compute_token_weights, frequency_baseline_split, generate_corpus, inject_errors, Corpus, Label,
};
use wmforge_core::detector::z_score;
use wmforge_core::removal::{
    evaluate_removal, greedy_remove, gumbel_remove, perplexity, CandidateSet, RewriteOutcome,
};
use wmforge_core::rng::derive_seed;
use wmforge_core::stealer::{
    evaluate_steal, steal_as2, steal_multikey, steal_oracle, steal_pro, steal_vanilla,
    OracleCounts, StealConfig, StealResult,
};
use wmforge_core::vocab::{build_model, SynonymIndex, ToyLanguageModel};
use wmforge_core::watermark::{derive_split, GreenRedSplit};

use crate::config::{ExperimentConfig, RemovalStrategy, StealMode};
use crate::error::{CliError, Result};
use crate::formats::{self, DetectionLine};
use crate::report::{
    bound_gap_table, steal_rows, DetectionSummary, ExperimentReport, RemovalRow, REPORT_VERSION,
};

/// Stage-seed derivation from the master seed. Fixed stream indices keep
/// stages independent and the whole run reproducible.
pub mod seeds {
    pub const MODEL: u64 = 1;
    pub const CORPUS: u64 = 2;
    pub const ERRORS: u64 = 3;
    pub const REMOVAL: u64 = 4;
    pub const MULTIKEY: u64 = 5;
}

pub fn build_model_from(config: &ExperimentConfig) -> Result<(ToyLanguageModel, SynonymIndex)> {
    Ok(build_model(
        derive_seed(config.seed, seeds::MODEL),
        config.model.m,
        config.model.d,
        &config.model.knobs,
    )?)
}

/// Generate the labeled corpus and inject claimed-label errors.
pub fn build_corpus(config: &ExperimentConfig, model: &ToyLanguageModel) -> Result<Corpus> {
    let params = config.watermark.params();
    let corpus = generate_corpus(
        model,
        &params,
        config.corpus.n_watermarked,
        config.corpus.n_natural,
        (config.corpus.length_min, config.corpus.length_max),
        derive_seed(config.seed, seeds::CORPUS),
        config.corpus.keep_sequences,
    )?;
    if config.corpus.r_c > 0.0 {
        Ok(inject_errors(
            &corpus,
            config.corpus.r_c,
            derive_seed(config.seed, seeds::ERRORS),
        )?)
    } else {
        Ok(corpus)
    }
}

pub fn true_splits(config: &ExperimentConfig) -> Result<Vec<GreenRedSplit>> {
    config
        .watermark
        .params()
        .keys
        .iter()
        .map(|&k| Ok(derive_split(k, config.watermark.gamma, config.model.m)?))
        .collect()
}

/// Detector verdicts per record against the true split of the record's
/// key (key 0 for naturals), plus class-level rates.
pub fn detection_summary(
    corpus: &Corpus,
    splits: &[GreenRedSplit],
    gamma: f64,
    z_star: f64,
) -> Result<(DetectionSummary, Vec<DetectionLine>)> {
    let mut lines = Vec::with_capacity(corpus.records.len());
    let mut totals = [0usize; 2];
    let mut flagged = [0usize; 2];
    for record in &corpus.records {
        let split = &splits[record.true_key_index.unwrap_or(0)];
        let green = record.green_count(split);
        let z = z_score(green, record.length, gamma)?;
        let watermarked = z > z_star;
        let class = match record.true_label {
            Label::Watermarked => 0,
            Label::Natural => 1,
        };
        totals[class] += 1;
        flagged[class] += watermarked as usize;
        lines.push(DetectionLine {
            id: record.id,
            green_count: green,
            z,
            watermarked,
        });
    }
    let rate = |class: usize| (totals[class] > 0).then(|| flagged[class] as f64 / totals[class] as f64);
    Ok((
        DetectionSummary {
            watermarked_total: totals[0],
            watermarked_flagged: flagged[0],
            natural_total: totals[1],
            natural_flagged: flagged[1],
            detection_rate: rate(0),
            false_positive_rate: rate(1),
        },
        lines,
    ))
}

/// Fill in the detector parameters the AS1 formulations need when the
/// config leaves them unset.
pub fn effective_steal_config(config: &ExperimentConfig) -> StealConfig {
    let mut knobs = config.steal.knobs.clone();
    if knobs.gamma.is_none() {
        knobs.gamma = Some(config.watermark.gamma);
    }
    if knobs.z_star.is_none() {
        knobs.z_star = Some(config.detector.z_star);
    }
    knobs
}

/// Dispatch one stealing attack. Oracle knowledge (exact green counts)
/// is taken from the first key's true split.
pub fn run_steal(
    config: &ExperimentConfig,
    corpus: &Corpus,
    splits: &[GreenRedSplit],
) -> Result<StealResult> {
    let solver = config.solver.to_solver_config()?;
    let knobs = effective_steal_config(config);
    match config.steal.mode {
        StealMode::Freq => {
            let size = config.steal.freq_list_size;
            let split = frequency_baseline_split(corpus, size)?;
            Ok(StealResult::single(split.color_code))
        }
        StealMode::Vanilla => {
            let weights = compute_token_weights(corpus)?;
            Ok(steal_vanilla(corpus, &weights, &knobs, &solver)?)
        }
        StealMode::Oracle => {
            let weights = compute_token_weights(corpus)?;
            let oracle = OracleCounts::from_corpus(corpus, &splits[0]);
            Ok(steal_oracle(corpus, &oracle, &weights, &knobs, &solver)?)
        }
        StealMode::Pro => {
            let weights = compute_token_weights(corpus)?;
            Ok(steal_pro(corpus, &weights, &knobs, &solver)?)
        }
        StealMode::As2 => {
            let weights = compute_token_weights(corpus)?;
            Ok(steal_as2(corpus, &weights, &knobs, &solver)?)
        }
        StealMode::Multikey => Ok(steal_multikey(
            corpus,
            &knobs,
            config.watermark.keys.len(),
            derive_seed(config.seed, seeds::MULTIKEY),
            &solver,
        )?),
    }
}

/// Rewrite every claimed-watermarked sentence that carries its token
/// sequence. Returns the rewritten corpus plus the removal metrics row.
/// Per-sentence noise seeds derive from the record id, so the result is
/// independent of scheduling.
pub fn run_removal(
    config: &ExperimentConfig,
    corpus: &Corpus,
    stolen: &GreenRedSplit,
    model: &ToyLanguageModel,
    synonyms: &SynonymIndex,
    true_split: &GreenRedSplit,
) -> Result<(RemovalRow, Corpus)> {
    let candidates = CandidateSet::build(stolen, synonyms)?;
    let removal_seed = derive_seed(config.seed, seeds::REMOVAL);
    let strategy = config.removal.strategy;
    let knobs = &config.removal.knobs;

    let targets: Vec<(usize, &Vec<u32>)> = corpus
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.claimed_label == Label::Watermarked)
        .filter_map(|(i, r)| r.tokens.as_ref().map(|t| (i, t)))
        .collect();
    if targets.is_empty() {
        return Err(CliError::Config(
            "removal needs claimed-watermarked records with token sequences \
             (generate the corpus with keep_sequences = true)"
                .into(),
        ));
    }

    let outcomes: Vec<RewriteOutcome> = targets
        .par_iter()
        .map(|&(i, tokens)| {
            let record_seed = derive_seed(removal_seed, corpus.records[i].id);
            match strategy {
                RemovalStrategy::Greedy => greedy_remove(tokens, stolen, &candidates),
                RemovalStrategy::Gumbel => {
                    gumbel_remove(tokens, stolen, &candidates, model, knobs, record_seed)
                }
            }
        })
        .collect::<wmforge_core::Result<_>>()?;

    let before: Vec<Vec<u32>> = targets.iter().map(|&(_, t)| t.clone()).collect();
    let after: Vec<Vec<u32>> = outcomes.iter().map(|o| o.tokens.clone()).collect();
    let detector = config.detector_config()?;
    let metrics = evaluate_removal(&before, &after, true_split, &detector)?;

    let mut ppl_before = 0.0;
    let mut ppl_after = 0.0;
    for (b, a) in before.iter().zip(&after) {
        ppl_before += perplexity(model, b)?;
        ppl_after += perplexity(model, a)?;
    }
    let n = before.len() as f64;

    let mut rewritten = corpus.clone();
    for (&(i, _), outcome) in targets.iter().zip(&outcomes) {
        let record = &mut rewritten.records[i];
        record.counts.clear();
        for &t in &outcome.tokens {
            *record.counts.entry(t).or_insert(0) += 1;
        }
        record.tokens = Some(outcome.tokens.clone());
    }

    let row = RemovalRow {
        strategy: strategy.as_str().to_string(),
        sentences: targets.len(),
        g_avg_before: metrics.g_avg_before,
        g_avg_after: metrics.g_avg_after,
        grr: metrics.grr,
        detected_before: metrics.detected_before,
        detected_after: metrics.detected_after,
        evasion_rate: metrics.evasion_rate,
        perplexity_before_mean: ppl_before / n,
        perplexity_after_mean: ppl_after / n,
        substitutions: outcomes.iter().map(|o| o.changed).sum(),
        empty_candidate_positions: outcomes.iter().map(|o| o.empty_candidates).sum(),
    };
    Ok((row, rewritten))
}

/// Run every stage and write all artifacts under `config.out_dir`.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let out_dir: &Path = &config.out_dir;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;

    let (model, synonyms) = build_model_from(config)?;
    formats::write_model(&out_dir.join("model.json"), &model, &synonyms)?;

    let corpus = build_corpus(config, &model)?;
    formats::write_corpus(&out_dir.join("corpus.jsonl"), &corpus)?;

    let splits = true_splits(config)?;
    let (detection, lines) = detection_summary(
        &corpus,
        &splits,
        config.watermark.gamma,
        config.detector.z_star,
    )?;
    formats::write_detection_lines(&out_dir.join("detections.jsonl"), &lines)?;

    let steal_result = run_steal(config, &corpus, &splits)?;
    formats::write_json(&out_dir.join("stolen.json"), &steal_result)?;
    // The lists themselves, without solver timings: this artifact is
    // byte-identical across reruns.
    #[derive(serde::Serialize)]
    struct StolenLists<'a> {
        color_codes: &'a Vec<Vec<bool>>,
        lambda: &'a Option<Vec<(u64, bool)>>,
        rho: &'a Option<Vec<(u64, usize)>>,
    }
    formats::write_json(
        &out_dir.join("stolen_lists.json"),
        &StolenLists {
            color_codes: &steal_result.color_codes,
            lambda: &steal_result.lambda,
            rho: &steal_result.rho,
        },
    )?;

    let scored_splits = if config.steal.mode == StealMode::Multikey {
        splits.clone()
    } else {
        vec![splits[0].clone()]
    };
    let metrics = evaluate_steal(&steal_result.color_codes, &scored_splits)?;
    let steal = steal_rows(config.steal.mode.as_str(), &metrics);

    let bound_gaps = Some(bound_gap_table(
        &corpus,
        &splits[0],
        config.watermark.gamma,
        config.detector.z_star,
        steal_result.stage1.as_ref(),
    )?);

    let mut removal = Vec::new();
    if config.removal.enabled && config.corpus.keep_sequences {
        let stolen = steal_result.stolen_split(0);
        let (row, rewritten) =
            run_removal(config, &corpus, &stolen, &model, &synonyms, &splits[0])?;
        formats::write_corpus(&out_dir.join("rewritten.jsonl"), &rewritten)?;
        removal.push(row);
    }

    let report = ExperimentReport {
        schema_version: REPORT_VERSION,
        config: config.clone(),
        config_hash: config.hash(),
        detection,
        steal,
        bound_gaps,
        removal,
        solver: steal_result.diagnostics.clone(),
        steal_iterations: steal_result.iterations,
        steal_converged: steal_result.converged,
    };
    report.write_all(out_dir)?;
    Ok(report)
}

/// Run a closure inside a dedicated rayon pool of `threads` workers;
/// `0` means the library default.
pub fn with_thread_pool<T: Send>(
    threads: usize,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build a {threads}-thread pool: {e}")))?;
    pool.install(f)
}
