//! The five prompt measurements: bag-of-words imageability and
//! concreteness, Hessel-style clusteredness, mean CLIP score and mean
//! pairwise image similarity.

mod hessel;
mod scores;

pub use hessel::{hessel_sentence, NeighborIndex, WordConcreteness, WordScores};
pub use scores::{
    read_scores, run_header, score_manifest, write_scores, Coverage, Measure, PoolSummary,
    PromptScores, ScoreOptions, ScoreRun, ScoresError, ScoresFile, SCORES_HEADER, SCORE_COLUMNS,
};

use crate::corpus::words;
use crate::lexicon::Lexicon;

/// Mean CLIP score, or `None` for no images.
pub fn ave_clip(scores: &[f32]) -> Option<f64> {
    if scores.is_empty() {
        return None;
    }
    Some(scores.iter().map(|&s| f64::from(s)).sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImgSim {
    pub value: Option<f64>,
    /// Vectors that took part.
    pub used: usize,
    /// Vectors dropped for having zero norm.
    pub zero_norm: usize,
}

/// Mean cosine similarity over all unique pairs of nonzero vectors.
///
/// Uses `Σ_{x<y} cos(m_x, m_y) = (‖Σ u_i‖² − n) / 2` over the unit vectors
/// `u_i`, which costs one pass instead of `n²/2` dot products.
pub fn img_sim<V: AsRef<[f32]>>(set: &[V]) -> ImgSim {
    let mut units: Vec<Vec<f64>> = Vec::with_capacity(set.len());
    let mut zero_norm = 0;
    for v in set {
        let v: Vec<f64> = v.as_ref().iter().map(|&x| f64::from(x)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            units.push(v.into_iter().map(|x| x / norm).collect());
        } else {
            zero_norm += 1;
        }
    }
    let n = units.len();
    if n < 2 {
        return ImgSim {
            value: None,
            used: n,
            zero_norm,
        };
    }
    let dim = units.iter().map(Vec::len).max().unwrap_or(0);
    let mut total = vec![0.0f64; dim];
    for u in &units {
        for (t, x) in total.iter_mut().zip(u) {
            *t += x;
        }
    }
    let squared: f64 = total.iter().map(|x| x * x).sum();
    let n_f = n as f64;
    let mean = (squared - n_f) / (n_f * (n_f - 1.0));
    ImgSim {
        value: Some(mean.clamp(-1.0, 1.0)),
        used: n,
        zero_norm,
    }
}

/// A bag-of-words score with its denominators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BowScore {
    pub value: Option<f64>,
    pub total: usize,
    pub found: usize,
}

/// Sum of MRC imageability over found words divided by the number of found
/// words. Plural fallback is on.
pub fn bow_imageability(text: &str, lexicon: &Lexicon) -> BowScore {
    let words = words(text);
    let ratings: Vec<u64> = words
        .iter()
        .filter_map(|w| lexicon.lookup(w, true)?.imageability)
        .map(u64::from)
        .collect();
    let found = ratings.len();
    BowScore {
        value: (found > 0).then(|| ratings.iter().sum::<u64>() as f64 / found as f64),
        total: words.len(),
        found,
    }
}

/// Sum of Brysbaert concreteness over found words divided by the total
/// number of words in the prompt.
pub fn bow_concreteness(text: &str, lexicon: &Lexicon) -> BowScore {
    let words = words(text);
    let ratings: Vec<f64> = words
        .iter()
        .filter_map(|w| lexicon.lookup(w, true)?.concreteness_brysbaert)
        .collect();
    BowScore {
        value: (!words.is_empty()).then(|| order_free_sum(ratings.clone()) / words.len() as f64),
        total: words.len(),
        found: ratings.len(),
    }
}

/// Sums in sorted order so any permutation of the inputs gives the same
/// bits.
pub(crate) fn order_free_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}
