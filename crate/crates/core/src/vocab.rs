//! Synthetic vocabulary and toy language model.
//!
//! The model is a unigram + bigram mixture over `m` tokens with an
//! embedding table that doubles as the synonym source: bigram logits are
//! scaled inner products of token embeddings, so the differentiable
//! scorer used by Gumbel-softmax removal coincides with the sampling
//! model on one-hot inputs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, Result};
use crate::rng;

/// Dense token-id vocabulary of size `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Vocabulary {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(config_err!("vocabulary size must be >= 2, got {size}"));
        }
        Ok(Self { size, labels: None })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// Knobs for [`build_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Softmax temperature.
    pub temperature: f64,
    /// Scale of the random unigram logits.
    pub unigram_scale: f64,
    /// Scale applied to embedding inner products to form bigram logits.
    pub bigram_scale: f64,
    /// Fraction of tokens that receive a flat logit boost so they are
    /// frequent in both watermarked and natural text.
    pub low_entropy_fraction: f64,
    /// The boost added to the unigram logits of low-entropy tokens.
    pub low_entropy_boost: f64,
    /// Number of nearest neighbours kept per token in the synonym index.
    pub synonym_k: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            unigram_scale: 1.0,
            bigram_scale: 0.5,
            low_entropy_fraction: 0.05,
            low_entropy_boost: 3.0,
            synonym_k: 20,
        }
    }
}

impl ModelConfig {
    /// A flat model: every next-token distribution is uniform. Handy in
    /// tests where closed-form expectations exist.
    pub fn uniform() -> Self {
        Self {
            unigram_scale: 0.0,
            bigram_scale: 0.0,
            low_entropy_fraction: 0.0,
            ..Self::default()
        }
    }
}

/// Unigram + bigram language model over token ids `0..m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyLanguageModel {
    pub seed: u64,
    pub m: usize,
    pub d: usize,
    pub temperature: f64,
    /// Length `m`.
    pub unigram_logits: Vec<f64>,
    /// Row-major `m x m`; row = previous token.
    pub bigram_logits: Vec<f64>,
    /// Row-major `m x d`.
    pub embeddings: Vec<f64>,
}

/// Per-token nearest neighbours by embedding cosine, descending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymIndex {
    pub k: usize,
    /// `lists[j]` never contains `j` itself.
    pub lists: Vec<Vec<u32>>,
}

/// Build a deterministic model and its synonym index.
pub fn build_model(
    seed: u64,
    m: usize,
    d: usize,
    config: &ModelConfig,
) -> Result<(ToyLanguageModel, SynonymIndex)> {
    if m < 2 {
        return Err(config_err!("vocabulary size must be >= 2, got {m}"));
    }
    if d < 2 {
        return Err(config_err!("embedding dimension must be >= 2, got {d}"));
    }
    if config.temperature <= 0.0 {
        return Err(config_err!("temperature must be positive"));
    }
    if !(0.0..=1.0).contains(&config.low_entropy_fraction) {
        return Err(config_err!("low_entropy_fraction must lie in [0, 1]"));
    }

    let mut emb_rng = rng::stream(rng::derive_seed(seed, 0));
    let scale = 1.0 / libm::sqrt(d as f64);
    let mut embeddings = vec![0.0; m * d];
    for e in embeddings.iter_mut() {
        *e = rng::standard_normal(&mut emb_rng) * scale;
    }

    let mut uni_rng = rng::stream(rng::derive_seed(seed, 1));
    let mut unigram_logits = vec![0.0; m];
    for u in unigram_logits.iter_mut() {
        *u = rng::standard_normal(&mut uni_rng) * config.unigram_scale;
    }

    // Low-entropy tokens: a seeded random subset gets a flat boost.
    let n_low = (config.low_entropy_fraction * m as f64) as usize;
    if n_low > 0 {
        let mut ids: Vec<usize> = (0..m).collect();
        let mut sel_rng = rng::stream(rng::derive_seed(seed, 2));
        rng::shuffle(&mut sel_rng, &mut ids);
        for &j in ids.iter().take(n_low) {
            unigram_logits[j] += config.low_entropy_boost;
        }
    }

    let mut bigram_logits = vec![0.0; m * m];
    for a in 0..m {
        let ea = &embeddings[a * d..(a + 1) * d];
        for b in 0..m {
            let eb = &embeddings[b * d..(b + 1) * d];
            let dot: f64 = ea.iter().zip(eb).map(|(x, y)| x * y).sum();
            bigram_logits[a * m + b] = config.bigram_scale * dot;
        }
    }

    let model = ToyLanguageModel {
        seed,
        m,
        d,
        temperature: config.temperature,
        unigram_logits,
        bigram_logits,
        embeddings,
    };
    let synonyms = SynonymIndex::build(&model, config.synonym_k);
    Ok((model, synonyms))
}

impl ToyLanguageModel {
    pub fn embedding(&self, token: u32) -> &[f64] {
        let j = token as usize;
        &self.embeddings[j * self.d..(j + 1) * self.d]
    }

    /// Raw (pre-softmax, pre-temperature) logits for the next token.
    pub fn logits(&self, prev_token: Option<u32>) -> Vec<f64> {
        let mut l = self.unigram_logits.clone();
        if let Some(prev) = prev_token {
            let row = &self.bigram_logits[prev as usize * self.m..(prev as usize + 1) * self.m];
            for (li, bi) in l.iter_mut().zip(row) {
                *li += bi;
            }
        }
        l
    }
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in logits.iter_mut() {
        *x = libm::exp(*x - max);
        sum += *x;
    }
    for x in logits.iter_mut() {
        *x /= sum;
    }
}

/// Next-token distribution: `softmax((unigram + bigram_row + bias) / temperature)`.
pub fn next_token_distribution(
    model: &ToyLanguageModel,
    prev_token: Option<u32>,
    logit_bias: &[f64],
) -> Result<Vec<f64>> {
    if logit_bias.len() != model.m {
        return Err(input_err!(
            "bias length {} does not match vocabulary size {}",
            logit_bias.len(),
            model.m
        ));
    }
    if logit_bias.iter().any(|b| !b.is_finite()) {
        return Err(input_err!("logit bias must be finite"));
    }
    let mut logits = model.logits(prev_token);
    for (l, b) in logits.iter_mut().zip(logit_bias) {
        *l = (*l + b) / model.temperature;
    }
    softmax_in_place(&mut logits);
    Ok(logits)
}

/// Log-likelihood of a token sequence under the unbiased model.
pub fn sentence_log_likelihood(model: &ToyLanguageModel, tokens: &[u32]) -> Result<f64> {
    if tokens.is_empty() {
        return Err(input_err!("cannot score an empty sequence"));
    }
    let zero_bias = vec![0.0; model.m];
    let mut prev = None;
    let mut ll = 0.0;
    for &t in tokens {
        let dist = next_token_distribution(model, prev, &zero_bias)?;
        ll += libm::log(dist[t as usize]);
        prev = Some(t);
    }
    Ok(ll)
}

impl SynonymIndex {
    /// Top-`k` neighbours of every token by embedding cosine similarity,
    /// descending, lowest index first on ties.
    pub fn build(model: &ToyLanguageModel, k: usize) -> Self {
        let m = model.m;
        let norms: Vec<f64> = (0..m)
            .map(|j| {
                let e = model.embedding(j as u32);
                libm::sqrt(e.iter().map(|x| x * x).sum::<f64>())
            })
            .collect();
        let mut lists = Vec::with_capacity(m);
        for j in 0..m {
            let ej = model.embedding(j as u32);
            let mut sims: Vec<(f64, u32)> = (0..m)
                .filter(|&o| o != j)
                .map(|o| {
                    let eo = model.embedding(o as u32);
                    let dot: f64 = ej.iter().zip(eo).map(|(x, y)| x * y).sum();
                    (dot / (norms[j] * norms[o]), o as u32)
                })
                .collect();
            sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            lists.push(sims.into_iter().take(k).map(|(_, o)| o).collect());
        }
        Self { k, lists }
    }

    pub fn neighbours(&self, token: u32) -> &[u32] {
        &self.lists[token as usize]
    }
}
