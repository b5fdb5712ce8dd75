//! Key-seeded green/red vocabulary splits and watermarked sampling.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::rng;
use crate::vocab::{next_token_distribution, ToyLanguageModel};

/// Watermark key; the seed of the pseudo-random vocabulary split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WatermarkKey(pub u64);

/// A green/red partition of the vocabulary.
///
/// The split is a pure function of `(key, gamma, m)`: the key seeds a
/// permutation of the vocabulary and the first `floor(gamma * m)` tokens
/// are green, so the green-list cardinality is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenRedSplit {
    pub key: WatermarkKey,
    pub gamma: f64,
    /// `color_code[j]` is true iff token `j` is green.
    pub color_code: Vec<bool>,
}

impl GreenRedSplit {
    pub fn m(&self) -> usize {
        self.color_code.len()
    }

    pub fn is_green(&self, token: u32) -> bool {
        self.color_code[token as usize]
    }

    pub fn green_size(&self) -> usize {
        self.color_code.iter().filter(|&&g| g).count()
    }

    pub fn green_tokens(&self) -> Vec<u32> {
        self.color_code
            .iter()
            .enumerate()
            .filter(|(_, &g)| g)
            .map(|(j, _)| j as u32)
            .collect()
    }

    /// Construct directly from a color code (used for stolen lists).
    pub fn from_color_code(color_code: Vec<bool>) -> Self {
        let m = color_code.len();
        let greens = color_code.iter().filter(|&&g| g).count();
        Self {
            key: WatermarkKey(0),
            gamma: greens as f64 / m as f64,
            color_code,
        }
    }
}

/// Watermark injection parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatermarkParams {
    /// Logit boost applied to green tokens.
    pub delta: f64,
    /// Green-list fraction of the vocabulary.
    pub gamma: f64,
    /// One key per green list; multi-key schemes use several.
    pub keys: Vec<WatermarkKey>,
}

impl WatermarkParams {
    pub fn single(key: u64, gamma: f64, delta: f64) -> Self {
        Self {
            delta,
            gamma,
            keys: vec![WatermarkKey(key)],
        }
    }
}

/// Derive the green/red split for a key.
pub fn derive_split(key: WatermarkKey, gamma: f64, m: usize) -> Result<GreenRedSplit> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(config_err!("gamma must lie in (0, 1), got {gamma}"));
    }
    let mut perm: Vec<u32> = (0..m as u32).collect();
    let mut stream = rng::stream(rng::derive_seed(key.0, 0xC0105));
    rng::shuffle(&mut stream, &mut perm);
    let n_green = (gamma * m as f64) as usize;
    let mut color_code = vec![false; m];
    for &j in perm.iter().take(n_green) {
        color_code[j as usize] = true;
    }
    Ok(GreenRedSplit {
        key,
        gamma,
        color_code,
    })
}

/// Sample one token from a probability vector.
pub fn sample_categorical(dist: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let u = rng::uniform(rng);
    let mut acc = 0.0;
    for (j, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return j as u32;
        }
    }
    (dist.len() - 1) as u32
}

/// Sample an unwatermarked sentence.
pub fn sample_sentence(model: &ToyLanguageModel, length: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let zero = vec![0.0; model.m];
    sample_with_bias(model, &zero, length, rng)
}

/// Sample a watermarked sentence: `delta` is added to green-token logits
/// at every step.
pub fn sample_watermarked_sentence(
    model: &ToyLanguageModel,
    split: &GreenRedSplit,
    delta: f64,
    length: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<u32> {
    let bias: Vec<f64> = split
        .color_code
        .iter()
        .map(|&g| if g { delta } else { 0.0 })
        .collect();
    sample_with_bias(model, &bias, length, rng)
}

fn sample_with_bias(
    model: &ToyLanguageModel,
    bias: &[f64],
    length: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<u32> {
    let mut tokens = Vec::with_capacity(length);
    let mut prev = None;
    for _ in 0..length {
        let dist = next_token_distribution(model, prev, bias).expect("finite bias");
        let t = sample_categorical(&dist, rng);
        tokens.push(t);
        prev = Some(t);
    }
    tokens
}

/// Sample `n` watermarked sentences, each under one key drawn uniformly
/// from `params.keys`. Returns `(tokens, key_index)` pairs; the key index
/// is ground truth for the evaluation harness only.
pub fn sample_multikey_corpus(
    model: &ToyLanguageModel,
    params: &WatermarkParams,
    n: usize,
    length_range: (usize, usize),
    master_seed: u64,
) -> Result<Vec<(Vec<u32>, usize)>> {
    let splits: Vec<GreenRedSplit> = params
        .keys
        .iter()
        .map(|&k| derive_split(k, params.gamma, model.m))
        .collect::<Result<_>>()?;
    let (lo, hi) = length_range;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut stream = rng::stream(rng::derive_seed(master_seed, i as u64));
        let key_idx = if splits.len() == 1 {
            0
        } else {
            rng::uniform_index(&mut stream, splits.len())
        };
        let length = lo + rng::uniform_index(&mut stream, hi - lo + 1);
        let tokens =
            sample_watermarked_sentence(model, &splits[key_idx], params.delta, length, &mut stream);
        out.push((tokens, key_idx));
    }
    Ok(out)
}
