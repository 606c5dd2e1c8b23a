//! Deterministic synthetic image generator used as a test double.
//!
//! Each prompt text maps to a unit center vector `c`, a dispersion `σ` and a
//! base CLIP score `b`. Image `i` gets embedding `normalize(c + σ·g_i)` with
//! `g_i ~ N(0, I/D)`, so the expected pairwise cosine is about `1/(1+σ²)`
//! regardless of `D`.

use rand_distr::{Distribution, StandardNormal};

use super::{GenerationConfig, ImageRecord};
use crate::rng::SplitMix64;

/// Per-prompt ground truth chosen by the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub sigma: f64,
    pub base_clip: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub base_clip: f64,
}

type ProfileFn = dyn Fn(&str) -> Dispersion + Send + Sync;

pub struct SyntheticOracle {
    seed: u64,
    dim: usize,
    clip_jitter: f64,
    dispersion: Box<ProfileFn>,
}

impl std::fmt::Debug for SyntheticOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SyntheticOracle")
            .field("seed", &self.seed)
            .field("dim", &self.dim)
            .field("clip_jitter", &self.clip_jitter)
            .finish_non_exhaustive()
    }
}

impl SyntheticOracle {
    /// Dispersion and base score drawn from a seeded hash of the text:
    /// `σ ∈ [0.1, 1.0]`, and `b` falls linearly from 85 to 45 as `σ` grows.
    pub fn hashed(seed: u64, dim: usize) -> Self {
        Self::with_profile(seed, dim, move |text| {
            let u = SplitMix64::derive(seed, &format!("profile\u{0}{text}")).unit();
            Dispersion {
                sigma: 0.1 + 0.9 * u,
                base_clip: 85.0 - 40.0 * u,
            }
        })
    }

    pub fn with_profile<F>(seed: u64, dim: usize, dispersion: F) -> Self
    where
        F: Fn(&str) -> Dispersion + Send + Sync + 'static,
    {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            seed,
            dim,
            clip_jitter: 2.0,
            dispersion: Box::new(dispersion),
        }
    }

    pub fn with_clip_jitter(mut self, jitter: f64) -> Self {
        self.clip_jitter = jitter;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self, text: &str) -> Profile {
        let Dispersion { sigma, base_clip } = (self.dispersion)(text);
        let mut rng = SplitMix64::derive(self.seed, &format!("center\u{0}{text}"));
        let center = normalize((0..self.dim).map(|_| gaussian(&mut rng)).collect());
        Profile {
            center,
            sigma,
            base_clip,
        }
    }
}

fn gaussian(rng: &mut SplitMix64) -> f64 {
    StandardNormal.sample(rng)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Returns exactly `config.n_images` records, deterministic per
/// (text, oracle seed, dimension).
pub fn mock_generate(
    prompt_id: &str,
    text: &str,
    config: &GenerationConfig,
    oracle: &SyntheticOracle,
) -> Vec<ImageRecord> {
    let profile = oracle.profile(text);
    let scale = profile.sigma / (oracle.dim as f64).sqrt();
    let mut rng = SplitMix64::derive(oracle.seed, &format!("draw\u{0}{text}"));
    (0..usize::from(config.n_images))
        .map(|image_index| {
            let raw: Vec<f64> = profile
                .center
                .iter()
                .map(|c| c + scale * gaussian(&mut rng))
                .collect();
            let clip = profile.base_clip + oracle.clip_jitter * gaussian(&mut rng);
            ImageRecord {
                prompt_id: prompt_id.to_string(),
                image_index,
                clip_score: clip.clamp(0.0, 100.0) as f32,
                embedding: normalize(raw).into_iter().map(|x| x as f32).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: u8) -> GenerationConfig {
        GenerationConfig {
            n_images: n,
            ..GenerationConfig::default()
        }
    }

    fn mean_cos(records: &[ImageRecord]) -> f64 {
        let mut sum = 0.0;
        let mut k = 0;
        for i in 0..records.len() {
            for j in i + 1..records.len() {
                let a = &records[i].embedding;
                let b = &records[j].embedding;
                let dot: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| f64::from(*x) * f64::from(*y))
                    .sum();
                let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
                sum += dot / (na * nb);
                k += 1;
            }
        }
        sum / f64::from(k)
    }

    fn fixed(sigma: f64) -> SyntheticOracle {
        SyntheticOracle::with_profile(3, 64, move |_| Dispersion {
            sigma,
            base_clip: 60.0,
        })
    }

    #[test]
    fn deterministic_and_sized() {
        let oracle = SyntheticOracle::hashed(11, 32);
        let a = mock_generate("p", "a red barn", &config(16), &oracle);
        let b = mock_generate("p", "a red barn", &config(16), &oracle);
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        assert!(a.iter().all(|r| r.embedding.len() == 32));
        assert!(a.iter().all(|r| (0.0..=100.0).contains(&r.clip_score)));
        let other_seed = mock_generate(
            "p",
            "a red barn",
            &config(16),
            &SyntheticOracle::hashed(12, 32),
        );
        assert_ne!(a, other_seed);
    }

    #[test]
    fn zero_dispersion_gives_identical_embeddings() {
        let records = mock_generate("p", "owl", &config(5), &fixed(0.0));
        assert!(records.windows(2).all(|w| w[0].embedding == w[1].embedding));
    }

    #[test]
    fn tighter_prompt_is_more_similar() {
        let tight = mock_generate("a", "x", &config(16), &fixed(0.05));
        let loose = mock_generate("b", "x", &config(16), &fixed(1.0));
        let (t, l) = (mean_cos(&tight), mean_cos(&loose));
        assert!(t > l, "{t} vs {l}");
        assert!(
            (l - 0.5).abs() < 0.1,
            "cos for sigma 1 should sit near 1/2, got {l}"
        );
    }

    #[test]
    fn clip_is_clamped() {
        let oracle = SyntheticOracle::with_profile(1, 4, |_| Dispersion {
            sigma: 0.1,
            base_clip: 99.5,
        })
        .with_clip_jitter(50.0);
        let records = mock_generate("p", "sun", &config(16), &oracle);
        assert!(records
            .iter()
            .all(|r| (0.0..=100.0).contains(&r.clip_score)));
        assert!(records.iter().any(|r| r.clip_score == 100.0));
    }
}
