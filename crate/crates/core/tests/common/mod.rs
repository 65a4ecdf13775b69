//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the engine's arithmetic: log-odds use `ln(1 + x)`
//! rather than `ln_1p`, stances use the logistic form, and deduplication is a
//! plain pairwise scan.

#![allow(dead_code)]

use belief_engine::judgement::{ArgumentRecord, Polarity, RecordId, Role};

pub fn record(id: u64, polarity: Polarity, strength: f64, role: Role) -> ArgumentRecord {
    ArgumentRecord {
        id: RecordId(id),
        claim: format!("claim {id}"),
        polarity,
        strength,
        role,
        active: true,
        embedding: Vec::new(),
        archived_by: None,
        inserted_at: 0,
    }
}

/// Scalar brute-force log-odds over `(sign, strength, is_seed)` triples.
pub fn oracle_log_odds(items: &[(f64, f64, bool)], u: f64, a: f64) -> f64 {
    let mut total = 0.0f64;
    for &(sign, strength, is_seed) in items {
        let gamma = if is_seed { a } else { u };
        total += sign * (1.0 + strength * gamma).ln();
    }
    total
}

/// `2 * sigmoid(L) - 1`.
pub fn oracle_stance(log_odds: f64) -> f64 {
    2.0 / (1.0 + (-log_odds).exp()) - 1.0
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRecord {
    pub polarity: Polarity,
    pub strength: f64,
    pub role: Role,
    pub embedding: Vec<f64>,
    pub active: bool,
    pub archived_by: Option<usize>,
}

/// Pairwise-similarity deduplication over an insertion-ordered list.
/// Record `i` gets id `i`.
#[derive(Debug, Default)]
pub struct OracleStore {
    pub records: Vec<OracleRecord>,
}

impl OracleStore {
    pub fn insert(&mut self, polarity: Polarity, strength: f64, role: Role, embedding: Vec<f64>, theta: f64, theta_self: f64) {
        let me = self.records.len();
        let threshold = if role == Role::SelfAuthored { theta_self } else { theta };
        let mut best: Option<(usize, f64)> = None;
        for (j, r) in self.records.iter().enumerate() {
            if !r.active || r.polarity != polarity {
                continue;
            }
            if role == Role::SelfAuthored && r.role == Role::Opponent {
                continue;
            }
            let sim = oracle_cosine(&embedding, &r.embedding).unwrap_or(0.0);
            if best.is_none_or(|(_, s)| sim > s) {
                best = Some((j, sim));
            }
        }
        let has_norm = embedding.iter().any(|x| *x != 0.0);
        let mut rec = OracleRecord {
            polarity,
            strength,
            role,
            embedding,
            active: true,
            archived_by: None,
        };
        if let Some((j, sim)) = best {
            if has_norm && sim >= threshold {
                if strength > self.records[j].strength {
                    self.records[j].active = false;
                    self.records[j].archived_by = Some(me);
                } else {
                    rec.active = false;
                    rec.archived_by = Some(j);
                }
            }
        }
        self.records.push(rec);
    }

    pub fn log_odds(&self, u: f64, a: f64) -> f64 {
        let items: Vec<_> = self
            .records
            .iter()
            .filter(|r| r.active)
            .map(|r| (if r.polarity == Polarity::Affirmative { 1.0 } else { -1.0 }, r.strength, r.role == Role::Seed))
            .collect();
        oracle_log_odds(&items, u, a)
    }
}

/// Proportional slot split with half-up rounding, in floating point.
pub fn oracle_allocation(k: usize, n_plus: usize, n_minus: usize) -> (usize, usize) {
    let total = n_plus + n_minus;
    if total == 0 {
        let kp = k.div_ceil(2);
        return (kp, k - kp);
    }
    let exact = k as f64 * n_plus as f64 / total as f64;
    let kp = (exact + 0.5).floor() as usize;
    (kp, k - kp)
}

/// Numerical minimiser of `Σ (d - βe)²`: bisection on the sign of the
/// gradient, which is monotone in β.
pub fn oracle_beta(pairs: &[(f64, f64)]) -> f64 {
    let grad = |b: f64| pairs.iter().map(|(e, d)| -2.0 * e * (d - b * e)).sum::<f64>();
    let (mut lo, mut hi) = (-1e6f64, 1e6f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if grad(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Vocabulary for randomized claim text; short words overlap in trigrams so
/// near-duplicates happen at realistic thresholds.
pub const CLAIM_WORDS: &[&str] = &[
    "voting", "turnout", "fines", "duty", "freedom", "citizens", "ballots", "rural", "youth", "trust", "compulsory",
    "democracy",
];

pub fn claim_from(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|&i| CLAIM_WORDS[i % CLAIM_WORDS.len()])
        .collect::<Vec<_>>()
        .join(" ")
}
