//! Claim embeddings for near-duplicate detection.

pub const DEFAULT_EMBEDDING_DIM: usize = 512;

pub trait Embedder: Send + Sync {
    fn embed(&self, claim: &str) -> Vec<f64>;
}

/// Hashed character-trigram term frequencies, L2-normalised.
///
/// Text is lower-cased and whitespace-collapsed first. Claims shorter than
/// three characters hash as a single gram.
#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    dim: usize,
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        TrigramEmbedder {
            dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

impl TrigramEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        TrigramEmbedder { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bucket(&self, gram: &str) -> usize {
        (fnv1a(gram.as_bytes()) % self.dim as u64) as usize
    }
}

/// Normalised character trigrams of a claim, in order of occurrence.
pub fn trigrams(claim: &str) -> Vec<String> {
    let normalised: Vec<char> = claim
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
        .chars()
        .collect();
    if normalised.is_empty() {
        return Vec::new();
    }
    if normalised.len() < 3 {
        return vec![normalised.iter().collect()];
    }
    normalised.windows(3).map(|w| w.iter().collect()).collect()
}

impl Embedder for TrigramEmbedder {
    fn embed(&self, claim: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for gram in trigrams(claim) {
            v[self.bucket(&gram)] += 1.0;
        }
        let n = norm(&v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        v
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; `None` when either vector has zero norm or the
/// dimensions disagree.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}
