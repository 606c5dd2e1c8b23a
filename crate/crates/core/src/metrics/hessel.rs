//! Clusteredness of a word's images among a whole image collection.
//!
//! For word `w` with image rows `I_w` inside a collection of `N` images:
//!
//! ```text
//! raw        = mean_{i ∈ I_w} |NN_k(i) ∩ (I_w ∖ {i})| / k
//! expected   = (|I_w| − 1) / (N − 1)
//! normalized = raw / expected
//! ```
//!
//! `NN_k` is the exact k-nearest-neighbour set by cosine similarity; ties
//! go to the lower row index.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;

use super::order_free_sum;
use crate::corpus::words;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordConcreteness {
    pub raw_fraction: f64,
    pub expected_fraction: f64,
    pub normalized: f64,
    pub images: usize,
}

pub type WordScores = BTreeMap<String, WordConcreteness>;

/// Exact k-nearest-neighbour lists over a fixed collection.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    k: usize,
    /// Sorted neighbour rows per row.
    neighbors: Vec<Vec<u32>>,
}

impl NeighborIndex {
    /// Builds neighbour lists for every row. `k` is clamped to `N − 1`.
    /// Rows must be nonzero; callers drop zero vectors beforehand.
    pub fn build<V: AsRef<[f32]> + Sync>(rows: &[V], k_nn: usize) -> Self {
        let n = rows.len();
        let k = k_nn.min(n.saturating_sub(1));
        let units: Vec<Vec<f64>> = rows
            .par_iter()
            .map(|r| {
                let v: Vec<f64> = r.as_ref().iter().map(|&x| f64::from(x)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect();
        let neighbors = (0..n)
            .into_par_iter()
            .map(|i| {
                if k == 0 {
                    return Vec::new();
                }
                let mut cand: Vec<(f64, u32)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (dot(&units[i], &units[j]), j as u32))
                    .collect();
                let closer = |a: &(f64, u32), b: &(f64, u32)| -> Ordering {
                    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
                };
                if k < cand.len() {
                    cand.select_nth_unstable_by(k - 1, closer);
                    cand.truncate(k);
                }
                let mut ids: Vec<u32> = cand.into_iter().map(|(_, j)| j).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        Self { k, neighbors }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Effective neighbourhood size after clamping.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, row: usize) -> &[u32] {
        &self.neighbors[row]
    }

    /// Score for the images in `rows`; `None` when fewer than two.
    pub fn word_score(&self, rows: &[usize]) -> Option<WordConcreteness> {
        let mut members: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
        members.sort_unstable();
        members.dedup();
        let size = members.len();
        if size < 2 || self.k == 0 {
            return None;
        }
        let hits: usize = members
            .iter()
            .map(|&i| {
                self.neighbors[i as usize]
                    .iter()
                    .filter(|j| **j != i && members.binary_search(j).is_ok())
                    .count()
            })
            .sum();
        let raw = hits as f64 / (self.k * size) as f64;
        let expected = (size - 1) as f64 / (self.len() - 1) as f64;
        Some(WordConcreteness {
            raw_fraction: raw,
            expected_fraction: expected,
            normalized: raw / expected,
            images: size,
        })
    }

    /// Scores every word given its associated rows.
    pub fn score_words(&self, assoc: &BTreeMap<String, Vec<usize>>) -> WordScores {
        assoc
            .iter()
            .filter_map(|(w, rows)| Some((w.clone(), self.word_score(rows)?)))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sum of normalized word scores over the words of `text` that have one,
/// divided by the total word count. `None` for a prompt without words.
pub fn hessel_sentence(text: &str, scores: &WordScores) -> (Option<f64>, usize) {
    let words = words(text);
    let found: Vec<f64> = words
        .iter()
        .filter_map(|w| scores.get(w).map(|s| s.normalized))
        .collect();
    let count = found.len();
    let value = (!words.is_empty()).then(|| order_free_sum(found) / words.len() as f64);
    (value, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clustered_word_scores_two_and_a_half() {
        let rows: Vec<[f32; 4]> = vec![
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let index = NeighborIndex::build(&rows, 2);
        let s = index.word_score(&[0, 1, 2]).unwrap();
        assert_eq!(s.raw_fraction, 1.0);
        assert_eq!(s.expected_fraction, 0.4);
        assert_eq!(s.normalized, 2.5);
        assert_eq!(index.word_score(&[4]), None);
    }

    #[test]
    fn ties_prefer_lower_rows() {
        let rows = vec![[1.0f32, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]];
        let index = NeighborIndex::build(&rows, 1);
        assert_eq!(index.neighbors(0), [1]);
        assert_eq!(index.neighbors(1), [2]);
        assert_eq!(index.neighbors(3), [1]);
    }

    #[test]
    fn k_is_clamped() {
        let rows = vec![[1.0f32, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let index = NeighborIndex::build(&rows, 50);
        assert_eq!(index.k(), 2);
        let s = index.word_score(&[0, 1]).unwrap();
        assert_eq!(s.raw_fraction, 0.5);
        assert_eq!(s.expected_fraction, 0.5);
        assert_eq!(
            NeighborIndex::build(&[[1.0f32]], 5).word_score(&[0, 0]),
            None
        );
    }

    #[test]
    fn sentence_divides_by_total_words() {
        let mut scores = WordScores::new();
        let entry = |normalized| WordConcreteness {
            raw_fraction: 0.0,
            expected_fraction: 1.0,
            normalized,
            images: 2,
        };
        scores.insert("dog".into(), entry(2.0));
        scores.insert("sky".into(), entry(3.0));
        assert_eq!(
            hessel_sentence("the dog, under a sky.", &scores),
            (Some(1.0), 2)
        );
        assert_eq!(hessel_sentence("nothing at all", &scores), (Some(0.0), 0));
        assert_eq!(hessel_sentence("", &scores), (None, 0));
    }
}
