//! Experiment report: one JSON document holding every metric the
//! pipeline produced, plus human-readable summary and CSV renderings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wmforge_core::corpus::{Corpus, Label};
use wmforge_core::detector::watermark_threshold;
use wmforge_core::stealer::{SolveDiagnostics, StageOneBounds, StealMetrics};
use wmforge_core::watermark::GreenRedSplit;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::formats;

pub const REPORT_VERSION: u32 = 1;

/// Detector performance against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub watermarked_total: usize,
    pub watermarked_flagged: usize,
    pub natural_total: usize,
    pub natural_flagged: usize,
    /// Flagged fraction of truly watermarked sentences.
    pub detection_rate: Option<f64>,
    /// Flagged fraction of truly natural sentences.
    pub false_positive_rate: Option<f64>,
}

/// One stolen list scored against its matched true list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StealRow {
    pub mode: String,
    pub key: usize,
    pub matched_true_key: usize,
    pub n_g: usize,
    pub n_t: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn steal_rows(mode: &str, metrics: &StealMetrics) -> Vec<StealRow> {
    metrics
        .per_key
        .iter()
        .enumerate()
        .map(|(k, key)| StealRow {
            mode: mode.to_string(),
            key: k,
            matched_true_key: key.matched_true_key,
            n_g: key.n_g,
            n_t: key.n_t,
            precision: key.precision,
            recall: key.recall,
        })
        .collect()
}

/// One removal strategy's corpus-level outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalRow {
    pub strategy: String,
    pub sentences: usize,
    pub g_avg_before: f64,
    pub g_avg_after: f64,
    pub grr: Option<f64>,
    pub detected_before: usize,
    pub detected_after: usize,
    pub evasion_rate: Option<f64>,
    pub perplexity_before_mean: f64,
    pub perplexity_after_mean: f64,
    pub substitutions: usize,
    pub empty_candidate_positions: usize,
}

/// Per-sentence comparison of the detection threshold, the stage-1
/// bound, and the ground-truth green count, for claimed-watermarked
/// sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundGapRow {
    pub id: u64,
    pub length: usize,
    /// Green count needed for this length to be flagged.
    pub g_threshold: f64,
    /// Stage-1 bound, absent in single-stage modes.
    pub bound: Option<f64>,
    /// Ground-truth green count under the true split.
    pub true_green: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundGapTable {
    pub rows: Vec<BoundGapRow>,
    /// Mean |bound - true_green|; absent without stage-1 bounds.
    pub mean_abs_bound_gap: Option<f64>,
    /// Mean |g_threshold - true_green|.
    pub mean_abs_threshold_gap: f64,
}

/// Build the per-sentence bound-gap table for the claimed-watermarked
/// class, in record order (matching the stage-1 bound vector layout).
pub fn bound_gap_table(
    corpus: &Corpus,
    true_split: &GreenRedSplit,
    gamma: f64,
    z_star: f64,
    stage1: Option<&StageOneBounds>,
) -> Result<BoundGapTable> {
    let mut rows = Vec::new();
    for (i, record) in corpus.claimed(Label::Watermarked).enumerate() {
        let g_threshold = watermark_threshold(record.length, gamma, z_star)?;
        let bound = stage1.and_then(|s| s.b_hat.get(i).copied());
        rows.push(BoundGapRow {
            id: record.id,
            length: record.length,
            g_threshold,
            bound,
            true_green: record.green_count(true_split),
        });
    }
    let n = rows.len().max(1) as f64;
    let mean_abs_threshold_gap = rows
        .iter()
        .map(|r| (r.g_threshold - r.true_green as f64).abs())
        .sum::<f64>()
        / n;
    let mean_abs_bound_gap = if rows.iter().all(|r| r.bound.is_some()) && !rows.is_empty() {
        Some(
            rows.iter()
                .map(|r| (r.bound.unwrap() - r.true_green as f64).abs())
                .sum::<f64>()
                / n,
        )
    } else {
        None
    };
    Ok(BoundGapTable {
        rows,
        mean_abs_bound_gap,
        mean_abs_threshold_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    /// Effective configuration the run used, echoed verbatim.
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub detection: DetectionSummary,
    pub steal: Vec<StealRow>,
    pub bound_gaps: Option<BoundGapTable>,
    pub removal: Vec<RemovalRow>,
    pub solver: Vec<SolveDiagnostics>,
    pub steal_iterations: Option<usize>,
    pub steal_converged: Option<bool>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl ExperimentReport {
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "run seed {} | config {}\n",
            self.config.seed, self.config_hash
        ));
        s.push_str(&format!(
            "detection: rate {} fpr {} ({} of {} wm flagged, {} of {} natural flagged)\n",
            fmt_opt(self.detection.detection_rate),
            fmt_opt(self.detection.false_positive_rate),
            self.detection.watermarked_flagged,
            self.detection.watermarked_total,
            self.detection.natural_flagged,
            self.detection.natural_total,
        ));
        for row in &self.steal {
            s.push_str(&format!(
                "steal[{} key {} -> true {}]: N_g {} N_t {} precision {} recall {}\n",
                row.mode,
                row.key,
                row.matched_true_key,
                row.n_g,
                row.n_t,
                fmt_opt(row.precision),
                fmt_opt(row.recall),
            ));
        }
        if let (Some(it), Some(conv)) = (self.steal_iterations, self.steal_converged) {
            s.push_str(&format!(
                "multi-key loop: {it} iteration(s), converged: {conv}\n"
            ));
        }
        if let Some(gaps) = &self.bound_gaps {
            s.push_str(&format!(
                "stage-1 bounds: mean |bound - true| {} vs mean |threshold - true| {:.4}\n",
                fmt_opt(gaps.mean_abs_bound_gap),
                gaps.mean_abs_threshold_gap,
            ));
        }
        for row in &self.removal {
            s.push_str(&format!(
                "removal[{}]: G_avg {:.2} -> {:.2} (GRR {}) evasion {} ppl {:.3} -> {:.3}\n",
                row.strategy,
                row.g_avg_before,
                row.g_avg_after,
                fmt_opt(row.grr),
                fmt_opt(row.evasion_rate),
                row.perplexity_before_mean,
                row.perplexity_after_mean,
            ));
        }
        for d in &self.solver {
            s.push_str(&format!(
                "solver[{}]: {:?} obj {:.4} gap {:.2e} nodes {} iters {}\n",
                d.stage, d.status, d.objective, d.gap, d.nodes, d.simplex_iterations
            ));
        }
        s
    }

    pub fn steal_csv(&self) -> String {
        let mut s = String::from("mode,key,matched_true_key,n_g,n_t,precision,recall\n");
        for r in &self.steal {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.mode,
                r.key,
                r.matched_true_key,
                r.n_g,
                r.n_t,
                fmt_opt(r.precision),
                fmt_opt(r.recall)
            ));
        }
        s
    }

    pub fn removal_csv(&self) -> String {
        let mut s = String::from(
            "strategy,sentences,g_avg_before,g_avg_after,grr,detected_before,detected_after,evasion_rate,ppl_before,ppl_after\n",
        );
        for r in &self.removal {
            s.push_str(&format!(
                "{},{},{:.4},{:.4},{},{},{},{},{:.4},{:.4}\n",
                r.strategy,
                r.sentences,
                r.g_avg_before,
                r.g_avg_after,
                fmt_opt(r.grr),
                r.detected_before,
                r.detected_after,
                fmt_opt(r.evasion_rate),
                r.perplexity_before_mean,
                r.perplexity_after_mean,
            ));
        }
        s
    }

    pub fn bound_gap_csv(&self) -> Option<String> {
        let gaps = self.bound_gaps.as_ref()?;
        let mut s = String::from("id,length,g_threshold,bound,true_green\n");
        for r in &gaps.rows {
            s.push_str(&format!(
                "{},{},{:.4},{},{}\n",
                r.id,
                r.length,
                r.g_threshold,
                fmt_opt(r.bound),
                r.true_green
            ));
        }
        Some(s)
    }

    /// Write the report JSON plus its summary and CSV renderings into
    /// `dir`; returns the paths written.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)
            .map_err(|e| crate::error::CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        let json = dir.join("report.json");
        formats::write_json(&json, self)?;
        written.push(json);
        let summary = dir.join("summary.txt");
        formats::write_text(&summary, &self.summary_text())?;
        written.push(summary);
        let steal = dir.join("steal.csv");
        formats::write_text(&steal, &self.steal_csv())?;
        written.push(steal);
        let removal = dir.join("removal.csv");
        formats::write_text(&removal, &self.removal_csv())?;
        written.push(removal);
        if let Some(csv) = self.bound_gap_csv() {
            let gaps = dir.join("bound_gaps.csv");
            formats::write_text(&gaps, &csv)?;
            written.push(gaps);
        }
        Ok(written)
    }

    /// Copy with wall-clock solver times zeroed. Reports are
    /// reproducible modulo these timings; compare normalized reports
    /// when checking determinism.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for d in &mut out.solver {
            d.wall_time_seconds = 0.0;
        }
        out
    }

    /// Load a report, failing loudly on schema mismatches.
    pub fn load(path: &Path) -> Result<Self> {
        let report: Self = formats::read_json(path)?;
        if report.schema_version != REPORT_VERSION {
            return Err(crate::error::CliError::Config(format!(
                "{}: report schema version {} unsupported (this binary reads {})",
                path.display(),
                report.schema_version,
                REPORT_VERSION
            )));
        }
        Ok(report)
    }
}
