//! Watermark removal by token substitution.
//!
//! Both strategies replace tokens that fall in a stolen green list with
//! red substitutes drawn from the synonym index. The greedy strategy
//! takes the most similar red synonym outright; the Gumbel strategy
//! optimizes the substitute choice per sentence against a relaxed,
//! differentiable sentence likelihood so the rewrite stays probable
//! under the language model.
//!
//! The relaxed scorer exploits that bigram logits are scaled embedding
//! inner products: a convex combination of candidate tokens induces
//! logits that are the same convex combination of their bigram rows, so
//! the relaxation agrees with the true model exactly at one-hot weights.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::detector::{green_count_tokens, z_score, DetectorConfig};
use crate::error::{config_err, input_err, Result};
use crate::rng;
use crate::vocab::{sentence_log_likelihood, softmax_in_place, SynonymIndex, ToyLanguageModel};
use crate::watermark::GreenRedSplit;

/// Per-token substitute lists: for each token in the stolen green list,
/// its synonyms that are *not* in the stolen green list, in descending
/// embedding-cosine order (inherited from the synonym index).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// `lists[j]` is empty for tokens outside the stolen green list and
    /// for green tokens whose synonyms are all green as well.
    pub lists: Vec<Vec<u32>>,
}

impl CandidateSet {
    pub fn build(stolen: &GreenRedSplit, synonyms: &SynonymIndex) -> Result<Self> {
        if stolen.m() != synonyms.lists.len() {
            return Err(input_err!(
                "stolen split covers {} tokens but the synonym index covers {}",
                stolen.m(),
                synonyms.lists.len()
            ));
        }
        let lists = (0..stolen.m() as u32)
            .map(|j| {
                if !stolen.is_green(j) {
                    return Vec::new();
                }
                synonyms
                    .neighbours(j)
                    .iter()
                    .copied()
                    .filter(|&o| !stolen.is_green(o))
                    .collect()
            })
            .collect();
        Ok(Self { lists })
    }

    pub fn candidates(&self, token: u32) -> &[u32] {
        &self.lists[token as usize]
    }
}

/// Knobs for the Gumbel-softmax strategy. The paper-style defaults:
/// temperature 1.0 annealed by 0.9 per epoch down to 0.1, step size
/// 0.05, 200 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemovalConfig {
    pub tau_init: f64,
    pub tau_decay: f64,
    pub tau_floor: f64,
    pub step_size: f64,
    pub epochs: usize,
}

impl Default for RemovalConfig {
    fn default() -> Self {
        Self {
            tau_init: 1.0,
            tau_decay: 0.9,
            tau_floor: 0.1,
            step_size: 0.05,
            epochs: 200,
        }
    }
}

impl RemovalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_init > 0.0 && self.tau_floor > 0.0 && self.tau_floor <= self.tau_init) {
            return Err(config_err!("need 0 < tau_floor <= tau_init"));
        }
        if !(0.0 < self.tau_decay && self.tau_decay <= 1.0) {
            return Err(config_err!("tau_decay must lie in (0, 1]"));
        }
        if self.step_size <= 0.0 {
            return Err(config_err!("step_size must be positive"));
        }
        Ok(())
    }
}

/// One rewritten sentence. Length always equals the input length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteOutcome {
    pub tokens: Vec<u32>,
    /// Positions whose token was substituted.
    pub changed: usize,
    /// Stolen-green positions left unchanged because no red synonym
    /// existed.
    pub empty_candidates: usize,
}

/// Replace every stolen-green token by its most similar red synonym.
pub fn greedy_remove(
    tokens: &[u32],
    stolen: &GreenRedSplit,
    candidates: &CandidateSet,
) -> Result<RewriteOutcome> {
    check_tokens(tokens, stolen)?;
    let mut out = tokens.to_vec();
    let mut changed = 0;
    let mut empty = 0;
    for t in out.iter_mut() {
        if !stolen.is_green(*t) {
            continue;
        }
        match candidates.candidates(*t).first() {
            Some(&sub) => {
                *t = sub;
                changed += 1;
            }
            None => empty += 1,
        }
    }
    Ok(RewriteOutcome {
        tokens: out,
        changed,
        empty_candidates: empty,
    })
}

fn check_tokens(tokens: &[u32], stolen: &GreenRedSplit) -> Result<()> {
    if tokens.is_empty() {
        return Err(input_err!("cannot rewrite an empty sentence"));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t as usize >= stolen.m()) {
        return Err(input_err!("token {t} outside the vocabulary"));
    }
    Ok(())
}

/// Gumbel-softmax weights `softmax((x + eps) / tau)`.
fn gumbel_softmax(x: &[f64], eps: &[f64], tau: f64) -> Vec<f64> {
    let mut z: Vec<f64> = x.iter().zip(eps).map(|(a, e)| (a + e) / tau).collect();
    softmax_in_place(&mut z);
    z
}

/// Relaxed sentence NLL and its gradient with respect to the per-position
/// candidate weights.
///
/// `replaced` maps sentence position -> index into `cands`/`weights`.
/// Position i contributes -log p_i where the next-token distribution is
/// formed from the previous position's (possibly relaxed) bigram row and
/// p_i is the weight-averaged probability of position i's candidates (or
/// the probability of its literal token when not replaced).
pub fn relaxed_nll_and_grad(
    model: &ToyLanguageModel,
    tokens: &[u32],
    replaced: &BTreeMap<usize, usize>,
    cands: &[&[u32]],
    weights: &[Vec<f64>],
) -> (f64, Vec<Vec<f64>>) {
    let m = model.m;
    let temp = model.temperature;
    let mut nll = 0.0;
    let mut grad: Vec<Vec<f64>> = weights.iter().map(|w| vec![0.0; w.len()]).collect();

    for (i, &tok) in tokens.iter().enumerate() {
        // Next-token logits from the previous position.
        let mut logits = model.unigram_logits.clone();
        let prev_relaxed = i.checked_sub(1).and_then(|p| replaced.get(&p).copied());
        match (i.checked_sub(1), prev_relaxed) {
            (None, _) => {}
            (Some(p), None) => {
                let prev = tokens[p] as usize;
                let row = &model.bigram_logits[prev * m..(prev + 1) * m];
                for (l, b) in logits.iter_mut().zip(row) {
                    *l += b;
                }
            }
            (Some(_), Some(pr)) => {
                // Relaxed previous token: convex combination of rows.
                for (&c, &w) in cands[pr].iter().zip(&weights[pr]) {
                    let row = &model.bigram_logits[c as usize * m..(c as usize + 1) * m];
                    for (l, b) in logits.iter_mut().zip(row) {
                        *l += w * b;
                    }
                }
            }
        }
        for l in logits.iter_mut() {
            *l /= temp;
        }
        let mut q = logits;
        softmax_in_place(&mut q);

        // Probability of this position under the relaxation.
        let here = replaced.get(&i).copied();
        let p_i = match here {
            None => q[tok as usize],
            Some(r) => cands[r]
                .iter()
                .zip(&weights[r])
                .map(|(&c, &w)| w * q[c as usize])
                .sum(),
        };
        nll -= libm::log(p_i);

        // d(-log p_i)/d weights of this position.
        if let Some(r) = here {
            for (g, &c) in grad[r].iter_mut().zip(cands[r]) {
                *g -= q[c as usize] / p_i;
            }
        }
        // d(-log p_i)/d logits = q - y, pushed back onto the previous
        // position's weights through the bigram rows.
        if let Some(pr) = prev_relaxed {
            let mut gl = q;
            match here {
                None => gl[tok as usize] -= 1.0,
                Some(r) => {
                    // gl[b] = q[b] - w_b * q[b] / p_i at candidate tokens.
                    for (&c, &w) in cands[r].iter().zip(&weights[r]) {
                        gl[c as usize] *= 1.0 - w / p_i;
                    }
                }
            }
            for (g, &c) in grad[pr].iter_mut().zip(cands[pr]) {
                let row = &model.bigram_logits[c as usize * m..(c as usize + 1) * m];
                let dot: f64 = gl.iter().zip(row).map(|(a, b)| a * b).sum();
                *g += dot / temp;
            }
        }
    }
    (nll, grad)
}

/// Pull the NLL gradient back through the Gumbel-softmax onto `x`.
fn weight_grad_to_x(w: &[f64], gw: &[f64], tau: f64) -> Vec<f64> {
    let dot: f64 = w.iter().zip(gw).map(|(a, b)| a * b).sum();
    w.iter()
        .zip(gw)
        .map(|(&wa, &ga)| wa * (ga - dot) / tau)
        .collect()
}

/// Optimize substitute choices per sentence with Gumbel-softmax
/// relaxation, then commit the noise-free argmax of each position's
/// logit parameters.
pub fn gumbel_remove(
    tokens: &[u32],
    stolen: &GreenRedSplit,
    candidates: &CandidateSet,
    model: &ToyLanguageModel,
    config: &RemovalConfig,
    seed: u64,
) -> Result<RewriteOutcome> {
    check_tokens(tokens, stolen)?;
    config.validate()?;
    if model.m != stolen.m() {
        return Err(input_err!(
            "model vocabulary {} does not match the stolen split {}",
            model.m,
            stolen.m()
        ));
    }

    let mut replaced: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cands: Vec<&[u32]> = Vec::new();
    let mut empty = 0;
    for (i, &t) in tokens.iter().enumerate() {
        if !stolen.is_green(t) {
            continue;
        }
        let list = candidates.candidates(t);
        if list.is_empty() {
            empty += 1;
            continue;
        }
        replaced.insert(i, cands.len());
        cands.push(list);
    }
    if cands.is_empty() {
        return Ok(RewriteOutcome {
            tokens: tokens.to_vec(),
            changed: 0,
            empty_candidates: empty,
        });
    }

    let mut x: Vec<Vec<f64>> = cands.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut noise = rng::stream(seed);
    let mut tau = config.tau_init;
    for _ in 0..config.epochs {
        let eps: Vec<Vec<f64>> = cands
            .iter()
            .map(|c| (0..c.len()).map(|_| rng::gumbel(&mut noise)).collect())
            .collect();
        let weights: Vec<Vec<f64>> = x
            .iter()
            .zip(&eps)
            .map(|(xi, ei)| gumbel_softmax(xi, ei, tau))
            .collect();
        let (_, gw) = relaxed_nll_and_grad(model, tokens, &replaced, &cands, &weights);
        for ((xi, wi), gi) in x.iter_mut().zip(&weights).zip(&gw) {
            let gx = weight_grad_to_x(wi, gi, tau);
            for (a, g) in xi.iter_mut().zip(gx) {
                *a -= config.step_size * g;
            }
        }
        tau = (tau * config.tau_decay).max(config.tau_floor);
    }

    let mut out = tokens.to_vec();
    let mut changed = 0;
    for (&pos, &r) in &replaced {
        // Noise-free commitment; ties go to the most similar candidate.
        let mut best = 0;
        for (c, &v) in x[r].iter().enumerate() {
            if v > x[r][best] {
                best = c;
            }
        }
        out[pos] = cands[r][best];
        changed += 1;
    }
    Ok(RewriteOutcome {
        tokens: out,
        changed,
        empty_candidates: empty,
    })
}

/// Exponentiated per-token negative log-likelihood.
pub fn perplexity(model: &ToyLanguageModel, tokens: &[u32]) -> Result<f64> {
    let ll = sentence_log_likelihood(model, tokens)?;
    Ok(libm::exp(-ll / tokens.len() as f64))
}

/// Corpus-level removal quality, judged against the true split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalMetrics {
    /// Mean true-green count per sentence before the rewrite.
    pub g_avg_before: f64,
    /// Mean true-green count per sentence after.
    pub g_avg_after: f64,
    /// `g_avg_after / g_avg_before`; `None` when nothing was green.
    pub grr: Option<f64>,
    /// Sentences the detector flagged before the rewrite.
    pub detected_before: usize,
    /// Of those, how many it still flags after.
    pub detected_after: usize,
    /// Fraction of previously flagged sentences now below the threshold;
    /// `None` when none were flagged before.
    pub evasion_rate: Option<f64>,
}

pub fn evaluate_removal(
    before: &[Vec<u32>],
    after: &[Vec<u32>],
    true_split: &GreenRedSplit,
    detector: &DetectorConfig,
) -> Result<RemovalMetrics> {
    if before.len() != after.len() || before.is_empty() {
        return Err(input_err!(
            "need matching nonempty sentence lists, got {} and {}",
            before.len(),
            after.len()
        ));
    }
    for (b, a) in before.iter().zip(after) {
        if b.len() != a.len() {
            return Err(input_err!("a rewrite changed a sentence's length"));
        }
        if b.is_empty() {
            return Err(input_err!("cannot evaluate an empty sentence"));
        }
    }
    let n = before.len() as f64;
    let detected = |tokens: &[u32]| -> Result<bool> {
        let g = green_count_tokens(tokens, true_split);
        Ok(z_score(g, tokens.len(), detector.gamma)? > detector.z_star)
    };
    let mut g_before = 0.0;
    let mut g_after = 0.0;
    let mut det_before = 0;
    let mut det_after = 0;
    for (b, a) in before.iter().zip(after) {
        g_before += green_count_tokens(b, true_split) as f64;
        g_after += green_count_tokens(a, true_split) as f64;
        if detected(b)? {
            det_before += 1;
            if detected(a)? {
                det_after += 1;
            }
        }
    }
    let g_avg_before = g_before / n;
    let g_avg_after = g_after / n;
    Ok(RemovalMetrics {
        g_avg_before,
        g_avg_after,
        grr: (g_avg_before > 0.0).then(|| g_avg_after / g_avg_before),
        detected_before: det_before,
        detected_after: det_after,
        evasion_rate: (det_before > 0)
            .then(|| (det_before - det_after) as f64 / det_before as f64),
    })
}
