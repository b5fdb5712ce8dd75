//! Watermark detection: green counting, z-score, and threshold.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, Result};
use crate::watermark::GreenRedSplit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// z-score above which a sentence is declared watermarked.
    pub z_star: f64,
    pub gamma: f64,
}

impl DetectorConfig {
    pub fn new(gamma: f64, z_star: f64) -> Result<Self> {
        if z_star <= 0.0 {
            return Err(config_err!("z_star must be positive, got {z_star}"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(config_err!("gamma must lie in (0, 1), got {gamma}"));
        }
        Ok(Self { z_star, gamma })
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            z_star: 4.0,
            gamma: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub green_count: u32,
    pub z_score: f64,
    /// True iff `z_score > z_star`, strictly.
    pub is_watermarked: bool,
    /// Green-count threshold `g_i` for this sentence length.
    pub threshold_g: f64,
}

/// Number of green tokens in a sentence given as a dense count vector.
pub fn green_count(counts: &[u32], split: &GreenRedSplit) -> Result<u32> {
    if counts.len() != split.m() {
        return Err(input_err!(
            "counts length {} does not match vocabulary size {}",
            counts.len(),
            split.m()
        ));
    }
    Ok(counts
        .iter()
        .zip(&split.color_code)
        .filter(|(_, &g)| g)
        .map(|(&c, _)| c)
        .sum())
}

/// Green count straight from a token sequence.
pub fn green_count_tokens(tokens: &[u32], split: &GreenRedSplit) -> u32 {
    tokens.iter().filter(|&&t| split.is_green(t)).count() as u32
}

/// `z = (G - gamma*l) / sqrt(l * gamma * (1 - gamma))`.
pub fn z_score(green: u32, length: usize, gamma: f64) -> Result<f64> {
    if length == 0 {
        return Err(input_err!("sentence length must be >= 1"));
    }
    let l = length as f64;
    Ok((green as f64 - gamma * l) / libm::sqrt(l * gamma * (1.0 - gamma)))
}

/// Minimum green count `g_i` for a sentence of this length to be flagged.
pub fn watermark_threshold(length: usize, gamma: f64, z_star: f64) -> Result<f64> {
    if length == 0 {
        return Err(input_err!("sentence length must be >= 1"));
    }
    let l = length as f64;
    Ok(z_star * libm::sqrt(l * gamma * (1.0 - gamma)) + gamma * l)
}

/// Full detection verdict for a token sequence.
pub fn detect(
    tokens: &[u32],
    split: &GreenRedSplit,
    config: &DetectorConfig,
) -> Result<DetectionResult> {
    let green = green_count_tokens(tokens, split);
    let z = z_score(green, tokens.len(), config.gamma)?;
    let g = watermark_threshold(tokens.len(), config.gamma, config.z_star)?;
    Ok(DetectionResult {
        green_count: green,
        z_score: z,
        is_watermarked: z > config.z_star,
        threshold_g: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::watermark::{derive_split, WatermarkKey};
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn green_count_hand_case() {
        let split = GreenRedSplit::from_color_code(vec![true, false, false, true]);
        let counts = vec![2, 0, 1, 0];
        assert_eq!(green_count(&counts, &split).unwrap(), 2);
    }

    #[test]
    fn all_red_split_counts_zero() {
        let split = GreenRedSplit::from_color_code(vec![false; 6]);
        assert_eq!(green_count(&[3, 1, 4, 1, 5, 9], &split).unwrap(), 0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let split = GreenRedSplit::from_color_code(vec![true, false]);
        assert!(green_count(&[1, 2, 3], &split).is_err());
    }

    // Positional enumeration oracle: walk random token sequences token by
    // token and compare against the count-vector path.
    #[test]
    fn green_count_matches_positional_walk() {
        let m = 30usize;
        let mut stream = rng::stream(31);
        for pair in 0..50 {
            let split = derive_split(WatermarkKey(pair), 0.4, m).unwrap();
            let len = 10 + rng::uniform_index(&mut stream, 60);
            let tokens: Vec<u32> = (0..len)
                .map(|_| rng::uniform_index(&mut stream, m) as u32)
                .collect();
            let mut counts = vec![0u32; m];
            for &t in &tokens {
                counts[t as usize] += 1;
            }
            let walked = tokens.iter().filter(|&&t| split.is_green(t)).count() as u32;
            assert_eq!(green_count(&counts, &split).unwrap(), walked);
            assert_eq!(green_count_tokens(&tokens, &split), walked);
        }
    }

    #[test]
    fn z_score_hand_values() {
        assert!((z_score(50, 100, 0.5).unwrap()).abs() < 1e-12);
        assert!((z_score(70, 100, 0.5).unwrap() - 4.0).abs() < 1e-12);
        assert!((z_score(50, 100, 0.25).unwrap() - 5.773502691896258).abs() < 1e-9);
        assert!(z_score(1, 0, 0.5).is_err());
    }

    #[test]
    fn threshold_hand_values() {
        assert!((watermark_threshold(100, 0.5, 4.0).unwrap() - 70.0).abs() < 1e-12);
        assert!((watermark_threshold(100, 0.25, 4.0).unwrap() - 42.32050807568877).abs() < 1e-9);
        assert!((watermark_threshold(100, 0.25, 0.0).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_z_is_not_watermarked() {
        // G = 70, l = 100, gamma = 0.5 gives z exactly 4.0.
        let config = DetectorConfig::new(0.5, 4.0).unwrap();
        let mut color = vec![false; 2];
        color[0] = true;
        let split = GreenRedSplit::from_color_code(color);
        let mut tokens = vec![0u32; 70];
        tokens.extend(vec![1u32; 30]);
        let res = detect(&tokens, &split, &config).unwrap();
        assert!((res.z_score - 4.0).abs() < 1e-12);
        assert!(!res.is_watermarked);
    }

    // Algebraic equivalence: z > z* iff G > g_i, over an integer grid.
    #[test]
    fn z_and_threshold_views_agree() {
        for l in [5usize, 20, 100, 333] {
            for gamma in [0.1, 0.25, 0.5, 0.8] {
                for z_star in [1.0, 2.5, 4.0] {
                    let g_thresh = watermark_threshold(l, gamma, z_star).unwrap();
                    for green in 0..=l as u32 {
                        let z = z_score(green, l, gamma).unwrap();
                        // The two views are algebraically identical but can
                        // disagree in the last ulp when z lands exactly on
                        // the threshold; skip those ties.
                        if (z - z_star).abs() < 1e-9 {
                            continue;
                        }
                        assert_eq!(z > z_star, (green as f64) > g_thresh);
                    }
                }
            }
        }
    }

    // Linearity of the green count in the count vector.
    #[test]
    fn green_count_is_linear() {
        let split = derive_split(WatermarkKey(5), 0.3, 20).unwrap();
        let a: Vec<u32> = (0..20).map(|j| (j * 7) % 5).collect();
        let b: Vec<u32> = (0..20).map(|j| (j * 3) % 4).collect();
        let sum: Vec<u32> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        assert_eq!(
            green_count(&sum, &split).unwrap(),
            green_count(&a, &split).unwrap() + green_count(&b, &split).unwrap()
        );
    }
}
