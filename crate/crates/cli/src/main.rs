//! `wmforge`: green-list watermark laboratory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible
//! optimization, 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wmforge::config::{ExperimentConfig, RemovalStrategy, StealMode};
use wmforge::error::{CliError, Result};
use wmforge::formats;
use wmforge::pipeline;
use wmforge_core::corpus::{compute_token_weights, Corpus, Label};
use wmforge_core::detector::z_score;
use wmforge_core::mip::{self, SolveStatus};
use wmforge_core::removal::{
    evaluate_removal, greedy_remove, gumbel_remove, CandidateSet, RewriteOutcome,
};
use wmforge_core::rng::derive_seed;
use wmforge_core::stealer::{evaluate_steal, OracleCounts, StealResult};
use wmforge_core::watermark::{derive_split, GreenRedSplit, WatermarkKey};

#[derive(Parser)]
#[command(name = "wmforge", version, about = "Green-list watermark laboratory")]
struct Cli {
    /// Experiment configuration file (TOML); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel stages (0 = library default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled corpus (and optionally persist the model).
    GenCorpus {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Watermark keys, comma separated.
        #[arg(long, value_delimiter = ',')]
        keys: Option<Vec<u64>>,
        /// Sentences per class.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        len_min: Option<usize>,
        #[arg(long)]
        len_max: Option<usize>,
        /// Claimed-label error rate.
        #[arg(long)]
        rc: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the language model here (.json or .bin).
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Score a corpus against a green/red split file.
    Detect {
        #[arg(long)]
        corpus: PathBuf,
        /// Split JSON (as written by `steal` results or `gen-corpus`).
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        z_star: Option<f64>,
        /// Verdict JSONL; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steal green lists from a corpus.
    Steal {
        #[arg(long, value_enum)]
        mode: StealMode,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the optimization models as LP files into this directory.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Rewrite watermarked sentences using a stolen list.
    Remove {
        #[arg(long, value_enum)]
        strategy: RemovalStrategy,
        #[arg(long)]
        corpus: PathBuf,
        /// Steal result JSON.
        #[arg(long)]
        stolen: PathBuf,
        /// Model file written by `gen-corpus --model-out`.
        #[arg(long)]
        model: PathBuf,
        /// Rewritten corpus path; metrics go next to it as
        /// `<out>.metrics.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a steal result (and optionally a rewritten corpus).
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        stolen: PathBuf,
        /// Rewritten corpus to score removal metrics on.
        #[arg(long)]
        rewritten: Option<PathBuf>,
        /// Metrics JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline: generate, detect, steal, remove, report.
    Run,
    /// Solve an LP/MIP text file with the embedded solver.
    SolveLp {
        file: PathBuf,
        /// Write the assignment as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("wmforge: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply_overrides(cli.seed, cli.out_dir.clone(), cli.threads);
    Ok(config)
}

/// True splits recorded in a corpus's own metadata.
fn corpus_true_splits(corpus: &Corpus) -> Result<Vec<GreenRedSplit>> {
    corpus
        .meta
        .keys
        .iter()
        .map(|&k| Ok(derive_split(WatermarkKey(k), corpus.meta.gamma, corpus.m)?))
        .collect()
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    let threads = config.threads;
    match cli.command {
        Command::GenCorpus {
            m,
            gamma,
            delta,
            keys,
            n,
            len_min,
            len_max,
            rc,
            out,
            model_out,
        } => {
            if let Some(m) = m {
                config.model.m = m;
            }
            if let Some(g) = gamma {
                config.watermark.gamma = g;
            }
            if let Some(d) = delta {
                config.watermark.delta = d;
            }
            if let Some(keys) = keys {
                if keys.is_empty() {
                    return Err(CliError::Config("at least one key is required".into()));
                }
                config.watermark.keys = keys;
            }
            if let Some(n) = n {
                config.corpus.n_watermarked = n;
                config.corpus.n_natural = n;
            }
            if let Some(lo) = len_min {
                config.corpus.length_min = lo;
            }
            if let Some(hi) = len_max {
                config.corpus.length_max = hi;
            }
            if let Some(rc) = rc {
                config.corpus.r_c = rc;
            }
            let (model, synonyms) = pipeline::build_model_from(&config)?;
            let corpus = pipeline::build_corpus(&config, &model)?;
            formats::write_corpus(&out, &corpus)?;
            if let Some(path) = model_out {
                formats::write_model(&path, &model, &synonyms)?;
            }
            println!(
                "wrote {} records over a vocabulary of {} tokens to {}",
                corpus.records.len(),
                corpus.m,
                out.display()
            );
            Ok(())
        }
        Command::Detect {
            corpus,
            split,
            z_star,
            out,
        } => {
            let corpus = formats::read_corpus(&corpus)?;
            let split: GreenRedSplit = formats::read_json(&split)?;
            if split.m() != corpus.m {
                return Err(CliError::Config(format!(
                    "split covers {} tokens but the corpus vocabulary has {}",
                    split.m(),
                    corpus.m
                )));
            }
            let z_star = z_star.unwrap_or(config.detector.z_star);
            let mut lines = Vec::with_capacity(corpus.records.len());
            for record in &corpus.records {
                let green = record.green_count(&split);
                let z = z_score(green, record.length, corpus.meta.gamma)?;
                lines.push(formats::DetectionLine {
                    id: record.id,
                    green_count: green,
                    z,
                    watermarked: z > z_star,
                });
            }
            match out {
                Some(path) => formats::write_detection_lines(&path, &lines)?,
                None => {
                    for line in &lines {
                        println!("{}", serde_json::to_string(line).expect("serializable"));
                    }
                }
            }
            Ok(())
        }
        Command::Steal {
            mode,
            corpus: corpus_path,
            out,
            dump_lp,
        } => {
            let corpus = formats::read_corpus(&corpus_path)?;
            config.steal.mode = mode;
            // The attack's view of gamma comes from the corpus metadata
            // unless the config pins it explicitly.
            if config.steal.knobs.gamma.is_none() {
                config.watermark.gamma = corpus.meta.gamma;
            }
            config.watermark.keys = corpus.meta.keys.clone();
            config.model.m = corpus.m;
            let splits = corpus_true_splits(&corpus)?;
            let result = pipeline::with_thread_pool(threads, || {
                pipeline::run_steal(&config, &corpus, &splits)
            })?;
            formats::write_json(&out, &result)?;
            if let Some(dir) = dump_lp {
                let files = dump_lp_models(&dir, &config, &corpus, &splits, &result)?;
                for f in &files {
                    println!("dumped {}", f.display());
                }
            }
            let metrics = evaluate_steal(
                &result.color_codes,
                &splits[..result.color_codes.len().min(splits.len())],
            )?;
            for (k, key) in metrics.per_key.iter().enumerate() {
                println!(
                    "key {k}: N_g {} N_t {} precision {}",
                    key.n_g,
                    key.n_t,
                    key.precision
                        .map_or_else(|| "-".into(), |p| format!("{p:.4}"))
                );
            }
            Ok(())
        }
        Command::Remove {
            strategy,
            corpus: corpus_path,
            stolen,
            model,
            out,
        } => {
            let corpus = formats::read_corpus(&corpus_path)?;
            let stolen: StealResult = formats::read_json(&stolen)?;
            let (model, synonyms) = formats::read_model(&model)?;
            if model.m != corpus.m {
                return Err(CliError::Config(format!(
                    "model vocabulary {} does not match the corpus vocabulary {}",
                    model.m, corpus.m
                )));
            }
            let stolen_split = stolen.stolen_split(0);
            let candidates = CandidateSet::build(&stolen_split, &synonyms)?;
            let removal_seed = derive_seed(config.seed, pipeline::seeds::REMOVAL);
            let knobs = config.removal.knobs.clone();

            let mut rewritten = corpus.clone();
            let mut before = Vec::new();
            let mut after = Vec::new();
            let mut outcomes: Vec<RewriteOutcome> = Vec::new();
            for record in rewritten.records.iter_mut() {
                if record.claimed_label != Label::Watermarked {
                    continue;
                }
                let tokens = record.tokens.clone().ok_or_else(|| {
                    CliError::Config(format!(
                        "record {} has no token sequence; regenerate with sequences kept",
                        record.id
                    ))
                })?;
                let outcome = match strategy {
                    RemovalStrategy::Greedy => greedy_remove(&tokens, &stolen_split, &candidates),
                    RemovalStrategy::Gumbel => gumbel_remove(
                        &tokens,
                        &stolen_split,
                        &candidates,
                        &model,
                        &knobs,
                        derive_seed(removal_seed, record.id),
                    ),
                }?;
                record.counts.clear();
                for &t in &outcome.tokens {
                    *record.counts.entry(t).or_insert(0) += 1;
                }
                record.tokens = Some(outcome.tokens.clone());
                before.push(tokens);
                after.push(outcome.tokens.clone());
                outcomes.push(outcome);
            }
            if before.is_empty() {
                return Err(CliError::Config(
                    "corpus has no claimed-watermarked records to rewrite".into(),
                ));
            }
            formats::write_corpus(&out, &rewritten)?;

            let true_split = corpus_true_splits(&corpus)?.swap_remove(0);
            let detector = wmforge_core::detector::DetectorConfig::new(
                corpus.meta.gamma,
                config.detector.z_star,
            )?;
            let metrics = evaluate_removal(&before, &after, &true_split, &detector)?;
            let metrics_path = metrics_path_for(&out);
            formats::write_json(&metrics_path, &metrics)?;
            println!(
                "rewrote {} sentences ({} substitutions); metrics in {}",
                before.len(),
                outcomes.iter().map(|o| o.changed).sum::<usize>(),
                metrics_path.display()
            );
            Ok(())
        }
        Command::Evaluate {
            corpus: corpus_path,
            stolen,
            rewritten,
            out,
        } => {
            let corpus = formats::read_corpus(&corpus_path)?;
            let stolen: StealResult = formats::read_json(&stolen)?;
            let splits = corpus_true_splits(&corpus)?;
            let p = stolen.color_codes.len();
            if p > splits.len() {
                return Err(CliError::Config(format!(
                    "steal result has {p} lists but the corpus metadata records only {} keys",
                    splits.len()
                )));
            }
            let steal_metrics = evaluate_steal(&stolen.color_codes, &splits[..p])?;

            let removal_metrics = match rewritten {
                None => None,
                Some(path) => {
                    let rewritten = formats::read_corpus(&path)?;
                    let pairs: Vec<(Vec<u32>, Vec<u32>)> = corpus
                        .records
                        .iter()
                        .zip(&rewritten.records)
                        .filter(|(b, _)| b.claimed_label == Label::Watermarked)
                        .filter_map(|(b, a)| Some((b.tokens.clone()?, a.tokens.clone()?)))
                        .collect();
                    let (before, after): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                    let detector = wmforge_core::detector::DetectorConfig::new(
                        corpus.meta.gamma,
                        config.detector.z_star,
                    )?;
                    Some(evaluate_removal(&before, &after, &splits[0], &detector)?)
                }
            };

            #[derive(serde::Serialize)]
            struct Evaluation {
                steal: wmforge_core::stealer::StealMetrics,
                removal: Option<wmforge_core::removal::RemovalMetrics>,
            }
            let eval = Evaluation {
                steal: steal_metrics,
                removal: removal_metrics,
            };
            match out {
                Some(path) => formats::write_json(&path, &eval)?,
                None => println!(
                    "{}",
                    serde_json::to_string_pretty(&eval).expect("serializable")
                ),
            }
            Ok(())
        }
        Command::Run => {
            let report =
                pipeline::with_thread_pool(threads, || pipeline::run_pipeline(&config))?;
            print!("{}", report.summary_text());
            println!("artifacts in {}", config.out_dir.display());
            Ok(())
        }
        Command::SolveLp { file, out } => {
            let text = formats::read_text(&file)?;
            let model = mip::parse_lp_string(&text)?;
            let solver = config.solver.to_solver_config()?;
            let solution = pipeline::with_thread_pool(threads, || {
                Ok(mip::solve(&model, &solver)?)
            })?;
            if solution.status == SolveStatus::Infeasible {
                return Err(CliError::Infeasible(format!(
                    "{}: model is infeasible",
                    file.display()
                )));
            }
            println!(
                "status {:?} objective {:.6} gap {:.2e} nodes {}",
                solution.status, solution.objective, solution.gap, solution.nodes
            );
            if let Some(path) = out {
                #[derive(serde::Serialize)]
                struct LpOutput {
                    status: SolveStatus,
                    objective: f64,
                    assignment: Vec<f64>,
                }
                formats::write_json(
                    &path,
                    &LpOutput {
                        status: solution.status,
                        objective: solution.objective,
                        assignment: solution.assignment.clone(),
                    },
                )?;
            }
            Ok(())
        }
    }
}

fn metrics_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".metrics.json");
    out.with_file_name(name)
}

/// Reconstruct and export the optimization models behind a steal run.
/// Frequency and multi-key modes have nothing exportable (no model /
/// per-iteration models).
fn dump_lp_models(
    dir: &Path,
    config: &ExperimentConfig,
    corpus: &Corpus,
    splits: &[GreenRedSplit],
    result: &StealResult,
) -> Result<Vec<PathBuf>> {
    use wmforge_core::stealer as st;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let knobs = pipeline::effective_steal_config(config);
    let weights = compute_token_weights(corpus)?;
    let mut files = Vec::new();
    let mut dump = |name: &str, model: &wmforge_core::mip::MipModel| -> Result<()> {
        let path = dir.join(name);
        formats::write_text(&path, &mip::write_lp_string(model))?;
        files.push(path);
        Ok(())
    };
    match config.steal.mode {
        StealMode::Vanilla => {
            dump("vanilla.lp", &st::build_vanilla_as1(corpus, &weights, &knobs)?)?
        }
        StealMode::Oracle => {
            let oracle = OracleCounts::from_corpus(corpus, &splits[0]);
            dump(
                "oracle.lp",
                &st::build_oracle_as1(corpus, &oracle, &weights, &knobs)?,
            )?
        }
        StealMode::Pro => {
            dump("pro_stage1.lp", &st::build_pro_as1_stage1(corpus, &knobs)?)?;
            if let Some(bounds) = &result.stage1 {
                dump(
                    "pro_stage2.lp",
                    &st::build_pro_as1_stage2(corpus, bounds, &weights, &knobs)?,
                )?;
            }
        }
        StealMode::As2 => {
            dump("as2_stage1.lp", &st::build_as2_stage1(corpus, &knobs)?)?;
            if let Some(bounds) = &result.stage1 {
                dump(
                    "as2_stage2.lp",
                    &st::build_as2_stage2(corpus, bounds, &weights, &knobs)?,
                )?;
            }
        }
        StealMode::Freq | StealMode::Multikey => {
            eprintln!(
                "note: no LP dump for mode {}",
                config.steal.mode.as_str()
            );
        }
    }
    Ok(files)
}
