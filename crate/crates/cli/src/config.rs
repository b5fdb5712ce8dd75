//! Experiment configuration: one TOML file with a default for every
//! field, a few global CLI overrides, and a content hash that is echoed
//! into every report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wmforge_core::detector::DetectorConfig;
use wmforge_core::mip::SolverConfig;
use wmforge_core::removal::RemovalConfig;
use wmforge_core::stealer::StealConfig;
use wmforge_core::vocab::ModelConfig;
use wmforge_core::watermark::{WatermarkKey, WatermarkParams};

use crate::error::{CliError, Result};
use crate::formats;

pub const ENV_SOLVER_TIME_LIMIT: &str = "WMFORGE_SOLVER_TIME_LIMIT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StealMode {
    /// Token-frequency comparison baseline; no optimization.
    Freq,
    /// Detector-threshold bounds on every sentence.
    Vanilla,
    /// Exact per-sentence green counts (evaluation-only knowledge).
    Oracle,
    /// Two-stage: self-estimated bounds, then the weighted list.
    Pro,
    /// Two-stage with per-sentence trust gates; no detector parameters.
    As2,
    /// Alternating multi-key attack.
    Multikey,
}

impl StealMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StealMode::Freq => "freq",
            StealMode::Vanilla => "vanilla",
            StealMode::Oracle => "oracle",
            StealMode::Pro => "pro",
            StealMode::As2 => "as2",
            StealMode::Multikey => "multikey",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RemovalStrategy {
    Greedy,
    Gumbel,
}

impl RemovalStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalStrategy::Greedy => "greedy",
            RemovalStrategy::Gumbel => "gumbel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub m: usize,
    pub d: usize,
    #[serde(flatten)]
    pub knobs: ModelConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            m: 300,
            d: 16,
            knobs: ModelConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WatermarkSection {
    pub gamma: f64,
    pub delta: f64,
    pub keys: Vec<u64>,
}

impl Default for WatermarkSection {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            delta: 2.0,
            keys: vec![1],
        }
    }
}

impl WatermarkSection {
    pub fn params(&self) -> WatermarkParams {
        WatermarkParams {
            delta: self.delta,
            gamma: self.gamma,
            keys: self.keys.iter().map(|&k| WatermarkKey(k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub n_watermarked: usize,
    pub n_natural: usize,
    pub length_min: usize,
    pub length_max: usize,
    /// Claimed-label error rate injected after generation.
    pub r_c: f64,
    /// Keep full token sequences (required by the removal stage).
    pub keep_sequences: bool,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            n_watermarked: 400,
            n_natural: 400,
            length_min: 80,
            length_max: 200,
            r_c: 0.0,
            keep_sequences: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub z_star: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self { z_star: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StealSection {
    pub mode: StealMode,
    #[serde(flatten)]
    pub knobs: StealConfig,
    /// Green-list size handed to the top-frequency baseline; defaults to
    /// the true list size when absent.
    pub freq_list_size: Option<usize>,
}

impl Default for StealSection {
    fn default() -> Self {
        Self {
            mode: StealMode::Pro,
            knobs: StealConfig::default(),
            freq_list_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemovalSection {
    pub enabled: bool,
    pub strategy: RemovalStrategy,
    #[serde(flatten)]
    pub knobs: RemovalConfig,
}

impl Default for RemovalSection {
    fn default() -> Self {
        Self {
            enabled: true,
            strategy: RemovalStrategy::Greedy,
            knobs: RemovalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub mip_gap: f64,
    pub time_limit_seconds: f64,
    pub feasibility_tol: f64,
    pub int_tol: f64,
    pub node_limit: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            mip_gap: d.mip_gap,
            time_limit_seconds: d.time_limit_seconds,
            feasibility_tol: d.feasibility_tol,
            int_tol: d.int_tol,
            node_limit: d.node_limit,
        }
    }
}

impl SolverSection {
    /// Effective solver configuration; the environment variable
    /// `WMFORGE_SOLVER_TIME_LIMIT` (seconds) overrides the config value.
    pub fn to_solver_config(&self) -> Result<SolverConfig> {
        let mut time_limit = self.time_limit_seconds;
        if let Ok(raw) = std::env::var(ENV_SOLVER_TIME_LIMIT) {
            time_limit = raw.trim().parse().map_err(|_| {
                CliError::Config(format!(
                    "{ENV_SOLVER_TIME_LIMIT} must be a number of seconds, got {raw:?}"
                ))
            })?;
        }
        if time_limit <= 0.0 {
            return Err(CliError::Config(format!(
                "solver time limit must be positive, got {time_limit}"
            )));
        }
        Ok(SolverConfig {
            mip_gap: self.mip_gap,
            time_limit_seconds: time_limit,
            feasibility_tol: self.feasibility_tol,
            int_tol: self.int_tol,
            node_limit: self.node_limit,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Solver worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub model: ModelSection,
    pub watermark: WatermarkSection,
    pub corpus: CorpusSection,
    pub detector: DetectorSection,
    pub steal: StealSection,
    pub removal: RemovalSection,
    pub solver: SolverSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out_dir: PathBuf::from("out"),
            threads: 0,
            model: ModelSection::default(),
            watermark: WatermarkSection::default(),
            corpus: CorpusSection::default(),
            detector: DetectorSection::default(),
            steal: StealSection::default(),
            removal: RemovalSection::default(),
            solver: SolverSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = formats::read_text(path)?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Apply the global CLI flags on top of the file values.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        out_dir: Option<PathBuf>,
        threads: Option<usize>,
    ) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(d) = out_dir {
            self.out_dir = d;
        }
        if let Some(t) = threads {
            self.threads = t;
        }
    }

    pub fn detector_config(&self) -> Result<DetectorConfig> {
        Ok(DetectorConfig::new(self.watermark.gamma, self.detector.z_star)?)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical =
            serde_json::to_vec(self).expect("config serialization cannot fail");
        hex::encode(Sha256::digest(&canonical))
    }
}
