//! Datasets of watermarked and natural sentences as token-count records.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, Result};
use crate::rng;
use crate::vocab::ToyLanguageModel;
use crate::watermark::{
    derive_split, sample_sentence, sample_watermarked_sentence, GreenRedSplit, WatermarkParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Watermarked,
    Natural,
}

/// One sentence, stored as a sparse token-count vector.
///
/// `claimed_label` is what the attacker believes; `true_label` and
/// `true_key_index` are ground truth reserved for the evaluation
/// harness. The two differ exactly on erroneous records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: u64,
    pub length: usize,
    /// token id -> occurrence count; entries are always positive.
    pub counts: BTreeMap<u32, u32>,
    pub claimed_label: Label,
    pub true_label: Label,
    pub true_key_index: Option<usize>,
    /// Full token sequence; kept only when removal needs it.
    pub tokens: Option<Vec<u32>>,
}

impl SentenceRecord {
    pub fn from_tokens(
        id: u64,
        tokens: Vec<u32>,
        label: Label,
        key_index: Option<usize>,
        keep_sequence: bool,
    ) -> Self {
        let mut counts = BTreeMap::new();
        for &t in &tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        Self {
            id,
            length: tokens.len(),
            counts,
            claimed_label: label,
            true_label: label,
            true_key_index: key_index,
            tokens: keep_sequence.then_some(tokens),
        }
    }

    /// Green count of this record under a split.
    pub fn green_count(&self, split: &GreenRedSplit) -> u32 {
        self.counts
            .iter()
            .filter(|(&j, _)| split.is_green(j))
            .map(|(_, &c)| c)
            .sum()
    }
}

/// Generation metadata; sufficient to regenerate the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub seed: u64,
    pub gamma: f64,
    pub delta: f64,
    pub keys: Vec<u64>,
    pub r_c: f64,
    pub length_range: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub m: usize,
    pub meta: CorpusMeta,
    pub records: Vec<SentenceRecord>,
}

impl Corpus {
    pub fn claimed(&self, label: Label) -> impl Iterator<Item = &SentenceRecord> {
        self.records
            .iter()
            .filter(move |r| r.claimed_label == label)
    }

    pub fn claimed_count(&self, label: Label) -> usize {
        self.claimed(label).count()
    }
}

/// Positive per-token weights `w_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenWeights {
    pub w: Vec<f64>,
}

/// Generate a labeled corpus: `n_watermarked` sentences sampled with the
/// watermark (one key per sentence, uniform over `params.keys`) followed
/// by `n_natural` unbiased sentences. Claimed labels start out truthful.
pub fn generate_corpus(
    model: &ToyLanguageModel,
    params: &WatermarkParams,
    n_watermarked: usize,
    n_natural: usize,
    length_range: (usize, usize),
    seed: u64,
    keep_sequences: bool,
) -> Result<Corpus> {
    let (lo, hi) = length_range;
    if lo < 20 || hi > 400 || lo > hi {
        return Err(config_err!(
            "length range must satisfy 20 <= lo <= hi <= 400, got ({lo}, {hi})"
        ));
    }
    if n_watermarked.min(n_natural) == 0 && n_watermarked.max(n_natural) == 0 {
        return Err(config_err!("corpus must contain at least one sentence"));
    }
    if params.keys.is_empty() {
        return Err(config_err!("at least one watermark key is required"));
    }
    let splits: Vec<GreenRedSplit> = params
        .keys
        .iter()
        .map(|&k| derive_split(k, params.gamma, model.m))
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(n_watermarked + n_natural);
    for i in 0..n_watermarked {
        let mut stream = rng::stream(rng::derive_seed(seed, i as u64));
        let key_idx = if splits.len() == 1 {
            0
        } else {
            rng::uniform_index(&mut stream, splits.len())
        };
        let length = lo + rng::uniform_index(&mut stream, hi - lo + 1);
        let tokens = sample_watermarked_sentence(
            model,
            &splits[key_idx],
            params.delta,
            length,
            &mut stream,
        );
        records.push(SentenceRecord::from_tokens(
            i as u64,
            tokens,
            Label::Watermarked,
            Some(key_idx),
            keep_sequences,
        ));
    }
    for i in 0..n_natural {
        let idx = n_watermarked + i;
        let mut stream = rng::stream(rng::derive_seed(seed, idx as u64));
        let length = lo + rng::uniform_index(&mut stream, hi - lo + 1);
        let tokens = sample_sentence(model, length, &mut stream);
        records.push(SentenceRecord::from_tokens(
            idx as u64,
            tokens,
            Label::Natural,
            None,
            keep_sequences,
        ));
    }

    Ok(Corpus {
        m: model.m,
        meta: CorpusMeta {
            seed,
            gamma: params.gamma,
            delta: params.delta,
            keys: params.keys.iter().map(|k| k.0).collect(),
            r_c: 0.0,
            length_range,
        },
        records,
    })
}

/// Flip the claimed label of exactly `floor(r_c * n)` records per class,
/// moving watermarked text into the natural pool and vice versa. True
/// labels are untouched.
pub fn inject_errors(corpus: &Corpus, r_c: f64, seed: u64) -> Result<Corpus> {
    if !(0.0..1.0).contains(&r_c) {
        return Err(config_err!("r_c must lie in [0, 1), got {r_c}"));
    }
    let mut out = corpus.clone();
    out.meta.r_c = r_c;
    if r_c == 0.0 {
        return Ok(out);
    }
    for (class, stream_idx) in [(Label::Watermarked, 0u64), (Label::Natural, 1u64)] {
        // Class membership is read from the input corpus so the two
        // passes cannot re-flip each other's records.
        let idxs: Vec<usize> = corpus
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.claimed_label == class)
            .map(|(i, _)| i)
            .collect();
        let n_flip = (r_c * idxs.len() as f64) as usize;
        let mut order = idxs.clone();
        let mut stream = rng::stream(rng::derive_seed(seed, stream_idx));
        rng::shuffle(&mut stream, &mut order);
        for &i in order.iter().take(n_flip) {
            out.records[i].claimed_label = match class {
                Label::Watermarked => Label::Natural,
                Label::Natural => Label::Watermarked,
            };
        }
    }
    Ok(out)
}

/// Replace every claimed label with the detector's verdict under
/// `split`. This mirrors how an attacker actually labels text: by
/// querying the detection API, not by knowing the generation process.
/// True labels are untouched.
pub fn relabel_by_detector(
    corpus: &Corpus,
    split: &GreenRedSplit,
    config: &crate::detector::DetectorConfig,
) -> Result<Corpus> {
    let mut out = corpus.clone();
    for r in &mut out.records {
        let green = r.green_count(split);
        let z = crate::detector::z_score(green, r.length, config.gamma)?;
        r.claimed_label = if z > config.z_star {
            Label::Watermarked
        } else {
            Label::Natural
        };
    }
    Ok(out)
}

/// `w_j = (natural frequency + 1) / (watermarked frequency + 1)` over
/// claimed labels, with add-one smoothing so the ratio is always finite.
pub fn compute_token_weights(corpus: &Corpus) -> Result<TokenWeights> {
    if corpus.claimed_count(Label::Watermarked) == 0 || corpus.claimed_count(Label::Natural) == 0 {
        return Err(input_err!(
            "token weights need both claimed classes to be nonempty"
        ));
    }
    let mut wm = vec![0u64; corpus.m];
    let mut nat = vec![0u64; corpus.m];
    for r in &corpus.records {
        let target = match r.claimed_label {
            Label::Watermarked => &mut wm,
            Label::Natural => &mut nat,
        };
        for (&j, &c) in &r.counts {
            target[j as usize] += c as u64;
        }
    }
    let w = wm
        .iter()
        .zip(&nat)
        .map(|(&fw, &fn_)| (fn_ as f64 + 1.0) / (fw as f64 + 1.0))
        .collect();
    Ok(TokenWeights { w })
}

/// Frequency-based stealing baseline. Without `list_size`, a token is
/// green iff its relative frequency in claimed-watermarked text exceeds
/// its relative frequency in claimed-natural text; with `list_size`, the
/// top `mu` tokens by watermarked frequency are chosen instead.
pub fn frequency_baseline_split(corpus: &Corpus, list_size: Option<usize>) -> Result<GreenRedSplit> {
    if corpus.records.is_empty() {
        return Err(input_err!("corpus is empty"));
    }
    let mut wm = vec![0u64; corpus.m];
    let mut nat = vec![0u64; corpus.m];
    for r in &corpus.records {
        let target = match r.claimed_label {
            Label::Watermarked => &mut wm,
            Label::Natural => &mut nat,
        };
        for (&j, &c) in &r.counts {
            target[j as usize] += c as u64;
        }
    }
    let mut color = vec![false; corpus.m];
    match list_size {
        Some(mu) => {
            let mut order: Vec<usize> = (0..corpus.m).collect();
            order.sort_by(|&a, &b| wm[b].cmp(&wm[a]).then(a.cmp(&b)));
            for &j in order.iter().take(mu) {
                color[j] = true;
            }
        }
        None => {
            let wm_total: u64 = wm.iter().sum::<u64>().max(1);
            let nat_total: u64 = nat.iter().sum::<u64>().max(1);
            for j in 0..corpus.m {
                // Cross-multiplied relative-frequency comparison.
                color[j] = wm[j] as u128 * nat_total as u128 > nat[j] as u128 * wm_total as u128;
            }
        }
    }
    Ok(GreenRedSplit::from_color_code(color))
}
