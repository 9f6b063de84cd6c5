//! Bigram inverted index with count filtering ahead of banded edit distance.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::metric::{edit_distance_bounded, edit_distance_chars, SpaceValue};

use super::TopK;

/// Gram length.
pub const Q: usize = 2;

type Gram = (char, char);

fn grams(s: &[char]) -> HashMap<Gram, u32> {
    let mut m = HashMap::new();
    for w in s.windows(Q) {
        *m.entry((w[0], w[1])).or_insert(0) += 1;
    }
    m
}

/// Size of the common gram multiset of two strings.
pub fn common_grams(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let ga = grams(&a);
    let gb = grams(&b);
    ga.iter()
        .map(|(g, &c)| c.min(gb.get(g).copied().unwrap_or(0)) as usize)
        .sum()
}

/// Minimum number of shared grams for two strings within edit distance `tau`:
/// `max(|a|, |b|) - 1 - 2·tau`, which may be non-positive.
pub fn gram_bound(len_a: usize, len_b: usize, tau: usize) -> i64 {
    len_a.max(len_b) as i64 - (Q as i64 - 1) - (Q * tau) as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedTextIndex {
    strings: Vec<Vec<char>>,
    /// Postings sorted by position: `(position, gram count)`.
    postings: HashMap<Gram, Vec<(u32, u32)>>,
}

impl InvertedTextIndex {
    pub fn build(values: &[SpaceValue]) -> Self {
        let strings: Vec<Vec<char>> = values
            .iter()
            .map(|v| v.as_text().unwrap_or_default().chars().collect())
            .collect();
        let mut postings: HashMap<Gram, Vec<(u32, u32)>> = HashMap::new();
        for (p, s) in strings.iter().enumerate() {
            let mut g: Vec<_> = grams(s).into_iter().collect();
            g.sort_unstable();
            for (gram, count) in g {
                postings.entry(gram).or_default().push((p as u32, count));
            }
        }
        Self { strings, postings }
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn gram_count(&self) -> usize {
        self.postings.len()
    }

    /// Postings of a gram, for inspection.
    pub fn postings(&self, a: char, b: char) -> &[(u32, u32)] {
        self.postings.get(&(a, b)).map_or(&[], Vec::as_slice)
    }

    /// Positions whose normalized edit distance to `q` is at most `t`.
    pub fn range(&self, q: &str, t: f64, scale: f64) -> Vec<usize> {
        let qc: Vec<char> = q.chars().collect();
        let tau = (t * scale * (1.0 + 1e-12)).floor().max(0.0) as usize;
        let max_len = self.strings.iter().map(Vec::len).max().unwrap_or(0).max(qc.len());
        let filter = tau + 1 < max_len;
        let mut common = vec![0u32; if filter { self.strings.len() } else { 0 }];
        if filter {
            for (gram, cq) in grams(&qc) {
                if let Some(list) = self.postings.get(&gram) {
                    for &(p, co) in list {
                        common[p as usize] += cq.min(co);
                    }
                }
            }
        }
        let mut out = Vec::new();
        for (p, s) in self.strings.iter().enumerate() {
            if s.len().abs_diff(qc.len()) > tau {
                continue;
            }
            if filter && (common[p] as i64) < gram_bound(qc.len(), s.len(), tau) {
                continue;
            }
            if let Some(d) = edit_distance_bounded(&qc, s, tau) {
                if d as f64 / scale <= t {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Scan in order of length difference, a lower bound on edit distance,
    /// stopping once it exceeds the current k-th distance.
    pub fn knn(&self, q: &str, k: usize, scale: f64) -> Vec<(usize, f64)> {
        let qc: Vec<char> = q.chars().collect();
        let mut order: Vec<(usize, usize)> = self
            .strings
            .iter()
            .enumerate()
            .map(|(p, s)| (s.len().abs_diff(qc.len()), p))
            .collect();
        order.sort_unstable();
        let mut best = TopK::new(k);
        for (len_gap, p) in order {
            let bound = best.bound();
            if len_gap as f64 / scale > bound {
                break;
            }
            let d = if bound.is_finite() {
                let ceiling = (bound * scale * (1.0 + 1e-12)).floor() as usize;
                match edit_distance_bounded(&qc, &self.strings[p], ceiling) {
                    Some(d) => d,
                    None => continue,
                }
            } else {
                edit_distance_chars(&qc, &self.strings[p])
            };
            best.offer(d as f64 / scale, p);
        }
        best.into_sorted()
    }
}
