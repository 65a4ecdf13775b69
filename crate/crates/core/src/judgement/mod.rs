//! Evidence judgement: strength scoring and soft deduplication.
//!
//! A candidate argument becomes an [`ArgumentRecord`] once it has a strength.
//! Before it is stored, it is compared against the active records of the same
//! polarity; if the nearest one is at least `theta` similar, only the stronger
//! of the two stays active. Ties keep the record that was already there.

mod embed;
mod scorer;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::MemoryStore;

pub use embed::{cosine_similarity, Embedder, TrigramEmbedder, DEFAULT_EMBEDDING_DIM};
pub use scorer::{
    score_strength, BuiltinScorer, ScoreError, ServiceScorer, StrengthScorer, TableScorer,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JudgementError {
    #[error("claim text is empty")]
    EmptyClaim,
    #[error("similarity threshold {0} must lie in [0, 1]")]
    InvalidThreshold(f64),
    #[error("self-deduplication applies only to self-authored records, got {0}")]
    NotSelfAuthored(Role),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("polarity must be -1 or +1, got {0}")]
pub struct PolarityError(pub i64);

/// Direction of a claim relative to the proposition (not sentiment).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Polarity {
    Affirmative,
    Negative,
}

impl Polarity {
    pub fn value(self) -> i64 {
        match self {
            Polarity::Affirmative => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn sign(self) -> f64 {
        self.value() as f64
    }

    pub fn opposite(self) -> Polarity {
        match self {
            Polarity::Affirmative => Polarity::Negative,
            Polarity::Negative => Polarity::Affirmative,
        }
    }
}

impl TryFrom<i64> for Polarity {
    type Error = PolarityError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Polarity::Affirmative),
            -1 => Ok(Polarity::Negative),
            other => Err(PolarityError(other)),
        }
    }
}

impl TryFrom<i8> for Polarity {
    type Error = PolarityError;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        Polarity::try_from(v as i64)
    }
}

impl From<Polarity> for i64 {
    fn from(p: Polarity) -> i64 {
        p.value()
    }
}

/// Source role of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Seed,
    #[serde(rename = "self")]
    SelfAuthored,
    Opponent,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Seed => "seed",
            Role::SelfAuthored => "self",
            Role::Opponent => "opponent",
        })
    }
}

/// A claim proposed by an extractor, not yet scored or stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateArgument {
    pub claim: String,
    pub polarity: Polarity,
    pub role: Role,
    /// Strength carried by the scripted grammar; consumed by hint-aware scorers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength_hint: Option<f64>,
}

impl CandidateArgument {
    pub fn new(claim: impl Into<String>, polarity: Polarity, role: Role) -> Result<Self, JudgementError> {
        let claim = claim.into().trim().to_string();
        if claim.is_empty() {
            return Err(JudgementError::EmptyClaim);
        }
        Ok(CandidateArgument {
            claim,
            polarity,
            role,
            strength_hint: None,
        })
    }

    pub fn with_hint(mut self, hint: f64) -> Self {
        self.strength_hint = Some(hint);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(pub u64);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One stored piece of evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentRecord {
    pub id: RecordId,
    pub claim: String,
    pub polarity: Polarity,
    pub strength: f64,
    pub role: Role,
    /// The credence-relevance flag: only active records enter the update.
    pub active: bool,
    #[serde(skip)]
    pub embedding: Vec<f64>,
    pub archived_by: Option<RecordId>,
    /// Dialogue order of the message the record came from.
    pub inserted_at: u64,
}

impl ArgumentRecord {
    /// Builds a fresh active record; `id` is reassigned by the store on insert.
    pub fn from_candidate(
        candidate: &CandidateArgument,
        strength: f64,
        embedding: Vec<f64>,
        inserted_at: u64,
    ) -> Self {
        ArgumentRecord {
            id: RecordId(0),
            claim: candidate.claim.clone(),
            polarity: candidate.polarity,
            strength,
            role: candidate.role,
            active: true,
            embedding,
            archived_by: None,
            inserted_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nearest {
    pub id: RecordId,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "decision", content = "other")]
pub enum Decision {
    /// The new record stays active and nothing is archived.
    Accepted,
    /// The new record is stronger; the existing one is archived.
    ReplacedExisting(RecordId),
    /// The existing record is at least as strong; the new one is archived.
    ArchivedNew(RecordId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub decision: Decision,
    pub nearest: Option<Nearest>,
    pub warnings: Vec<String>,
}

fn check_threshold(theta: f64) -> Result<(), JudgementError> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(JudgementError::InvalidThreshold(theta))
    }
}

/// Soft deduplication against all active same-polarity records.
pub fn resolve_conflict(
    new: &ArgumentRecord,
    memory: &MemoryStore,
    theta: f64,
) -> Result<Resolution, JudgementError> {
    check_threshold(theta)?;
    let pool = memory
        .records()
        .iter()
        .filter(|r| r.active && r.polarity == new.polarity);
    Ok(resolve_against(new, pool, theta))
}

/// Deduplication of self-authored claims against the agent's own active
/// self and seed records, with the self threshold.
pub fn resolve_self_conflict(
    new: &ArgumentRecord,
    memory: &MemoryStore,
    theta_self: f64,
) -> Result<Resolution, JudgementError> {
    check_threshold(theta_self)?;
    if new.role != Role::SelfAuthored {
        return Err(JudgementError::NotSelfAuthored(new.role));
    }
    let pool = memory.records().iter().filter(|r| {
        r.active && r.polarity == new.polarity && matches!(r.role, Role::SelfAuthored | Role::Seed)
    });
    Ok(resolve_against(new, pool, theta_self))
}

fn resolve_against<'a>(
    new: &ArgumentRecord,
    pool: impl Iterator<Item = &'a ArgumentRecord>,
    theta: f64,
) -> Resolution {
    let mut warnings = Vec::new();
    let new_has_norm = embed::norm(&new.embedding) > 0.0;
    if !new_has_norm {
        warnings.push(format!(
            "claim {:?} has a zero-norm embedding; similarity treated as 0",
            new.claim
        ));
    }

    let mut best: Option<(&ArgumentRecord, f64)> = None;
    for existing in pool {
        let similarity = match cosine_similarity(&new.embedding, &existing.embedding) {
            Some(s) => s,
            None => {
                if new_has_norm {
                    warnings.push(format!(
                        "record {} has a zero-norm embedding; similarity treated as 0",
                        existing.id
                    ));
                }
                0.0
            }
        };
        // strict comparison: the earliest record wins a tie
        if best.is_none_or(|(_, s)| similarity > s) {
            best = Some((existing, similarity));
        }
    }

    let decision = match best {
        Some((existing, similarity)) if new_has_norm && similarity >= theta => {
            if new.strength > existing.strength {
                Decision::ReplacedExisting(existing.id)
            } else {
                Decision::ArchivedNew(existing.id)
            }
        }
        _ => Decision::Accepted,
    };
    Resolution {
        decision,
        nearest: best.map(|(r, similarity)| Nearest {
            id: r.id,
            similarity,
        }),
        warnings,
    }
}
