//! Coarse ranking of candidate relations by embedding similarity to the question.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Candidate lists longer than this are cut down to this many.
pub const DEFAULT_THRESHOLD: usize = 40;

pub trait Embedder {
    fn dimension(&self) -> usize;

    /// A unit-norm vector of length `dimension()`.
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Hashed character n-gram embedder; deterministic and offline.
#[derive(Debug, Clone)]
pub struct HashedNgramEmbedder {
    dimension: usize,
    n: usize,
}

impl HashedNgramEmbedder {
    pub fn new(dimension: usize, n: usize) -> Self {
        assert!(dimension > 0 && n > 0);
        Self { dimension, n }
    }
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self::new(256, 3)
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Embedder for HashedNgramEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        // Relation ids like `computer.computer_designer` embed their words, not their punctuation.
        let mut normalized = String::from(" ");
        for c in text.chars() {
            if c.is_alphanumeric() {
                normalized.extend(c.to_lowercase());
            } else if !normalized.ends_with(' ') {
                normalized.push(' ');
            }
        }
        if !normalized.ends_with(' ') {
            normalized.push(' ');
        }
        let chars: Vec<char> = normalized.chars().collect();
        let mut v = vec![0.0; self.dimension];
        if chars.len() >= self.n {
            for gram in chars.windows(self.n) {
                let gram: String = gram.iter().collect();
                let h = fnv1a(gram.bytes());
                let idx = (h % self.dimension as u64) as usize;
                let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
                v[idx] += sign;
            }
        }
        normalize(v)
    }
}

/// Scales to unit length; the zero vector maps to the first basis vector.
pub fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm == 0.0 {
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
        return v;
    }
    for x in &mut v {
        *x /= norm;
    }
    v
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Candidates with their cosine similarity to the question, best first.
/// Ties are broken by relation name.
pub fn score_candidates<E: Embedder + ?Sized>(
    question: &str,
    candidates: &[String],
    embedder: &E,
) -> Vec<(String, f64)> {
    let q = embedder.embed(question);
    let mut scored: Vec<(String, f64)> = candidates
        .iter()
        .map(|c| (c.clone(), cosine(&q, &embedder.embed(c))))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    scored
}

/// Keeps the `threshold` most similar candidates and shuffles them with a
/// seeded RNG. Lists no longer than `threshold` come back unchanged.
pub fn rank_relations<E: Embedder + ?Sized>(
    question: &str,
    candidates: &[String],
    embedder: &E,
    threshold: usize,
    seed: u64,
) -> Vec<String> {
    if candidates.len() <= threshold {
        return candidates.to_vec();
    }
    let mut kept: Vec<String> = score_candidates(question, candidates, embedder)
        .into_iter()
        .take(threshold)
        .map(|(c, _)| c)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kept.shuffle(&mut rng);
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;

    #[test]
    fn embeddings_are_unit_norm_and_deterministic() {
        let e = HashedNgramEmbedder::default();
        for text in [
            "",
            "a",
            "who designed the computer",
            "computer.computer_designer.computers_designed",
        ] {
            let v = e.embed(text);
            assert_eq!(v.len(), 256);
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            assert!((norm - 1.0).abs() < 1e-6, "{text:?} has norm {norm}");
            assert_eq!(v, e.embed(text));
        }
    }

    #[test]
    fn similar_text_scores_higher() {
        let e = HashedNgramEmbedder::default();
        let q = e.embed("which computer did tom kilburn design");
        let near = e.embed("computer.computer_designer.computers_designed");
        let far = e.embed("people.person.nationality");
        assert!(cosine(&q, &near) > cosine(&q, &far));
    }

    #[test]
    fn short_lists_pass_through() {
        let e = HashedNgramEmbedder::default();
        let c: Vec<String> = (0..39).map(|i| format!("rel.{i}")).collect();
        assert_eq!(rank_relations("q", &c, &e, DEFAULT_THRESHOLD, 7), c);
    }

    #[test]
    fn ties_break_by_name() {
        struct Flat;
        impl Embedder for Flat {
            fn dimension(&self) -> usize {
                1
            }
            fn embed(&self, _: &str) -> Vec<f64> {
                vec![1.0]
            }
        }
        let c: Vec<String> = ["b", "a", "c"].iter().map(|s| s.to_string()).collect();
        let mut kept = rank_relations("q", &c, &Flat, 2, 1);
        kept.sort();
        assert_eq!(kept, ["a", "b"]);
    }
}
