//! On-disk formats: corpus JSONL, versioned model files, detection
//! output, and generic JSON artifacts.
//!
//! A corpus file is JSON Lines: one header line with the generation
//! metadata followed by one line per sentence record. Model files are
//! JSON or binary depending on the file extension (`.json` vs anything
//! else, conventionally `.bin`).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wmforge_core::corpus::{Corpus, CorpusMeta, SentenceRecord};
use wmforge_core::detector::DetectionResult;
use wmforge_core::vocab::{SynonymIndex, ToyLanguageModel};

use crate::error::{CliError, Result};

pub const CORPUS_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub version: u32,
    pub m: usize,
    #[serde(flatten)]
    pub meta: CorpusMeta,
}

fn io_err(path: &Path, err: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let header = CorpusHeader {
        version: CORPUS_VERSION,
        m: corpus.m,
        meta: corpus.meta.clone(),
    };
    serde_json::to_writer(&mut out, &header).map_err(|e| io_err(path, e))?;
    out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    for record in &corpus.records {
        serde_json::to_writer(&mut out, record).map_err(|e| io_err(path, e))?;
        out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| io_err(path, "empty corpus file"))?
        .map_err(|e| io_err(path, e))?;
    let header: CorpusHeader = serde_json::from_str(&header_line)
        .map_err(|e| CliError::Config(format!("{}: bad corpus header: {e}", path.display())))?;
    if header.version != CORPUS_VERSION {
        return Err(CliError::Config(format!(
            "{}: corpus format version {} unsupported (expected {})",
            path.display(),
            header.version,
            CORPUS_VERSION
        )));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SentenceRecord = serde_json::from_str(&line).map_err(|e| {
            CliError::Config(format!("{}: record line {}: {e}", path.display(), lineno + 2))
        })?;
        records.push(record);
    }
    Ok(Corpus {
        m: header.m,
        meta: header.meta,
        records,
    })
}

/// Model plus its synonym index, persisted together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub model: ToyLanguageModel,
    pub synonyms: SynonymIndex,
}

pub fn write_model(path: &Path, model: &ToyLanguageModel, synonyms: &SynonymIndex) -> Result<()> {
    let payload = ModelFile {
        version: MODEL_VERSION,
        model: model.clone(),
        synonyms: synonyms.clone(),
    };
    if is_json(path) {
        write_json(path, &payload)
    } else {
        let bytes = bincode::serialize(&payload).map_err(|e| io_err(path, e))?;
        fs::write(path, bytes).map_err(|e| io_err(path, e))
    }
}

pub fn read_model(path: &Path) -> Result<(ToyLanguageModel, SynonymIndex)> {
    let payload: ModelFile = if is_json(path) {
        read_json(path)?
    } else {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        bincode::deserialize(&bytes)
            .map_err(|e| CliError::Config(format!("{}: bad model file: {e}", path.display())))?
    };
    if payload.version != MODEL_VERSION {
        return Err(CliError::Config(format!(
            "{}: model format version {} unsupported (expected {})",
            path.display(),
            payload.version,
            MODEL_VERSION
        )));
    }
    Ok((payload.model, payload.synonyms))
}

fn is_json(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("json")
}

/// One detection verdict line: `{id, green_count, z, watermarked}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLine {
    pub id: u64,
    pub green_count: u32,
    pub z: f64,
    pub watermarked: bool,
}

impl DetectionLine {
    pub fn new(id: u64, result: &DetectionResult) -> Self {
        Self {
            id,
            green_count: result.green_count,
            z: result.z_score,
            watermarked: result.is_watermarked,
        }
    }
}

pub fn write_detection_lines(path: &Path, lines: &[DetectionLine]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for line in lines {
        serde_json::to_writer(&mut out, line).map_err(|e| io_err(path, e))?;
        out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}
