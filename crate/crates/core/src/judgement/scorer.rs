use std::collections::HashMap;
use std::io::Read;

use thiserror::Error;

use super::CandidateArgument;
use crate::service::JsonService;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("no strength for claim {claim:?} under topic {topic:?}")]
    Missing { topic: String, claim: String },
    #[error("scorer returned a non-finite strength for {0:?}")]
    NotFinite(String),
    #[error("scoring backend failed: {0}")]
    Backend(String),
    #[error("invalid score table: {0}")]
    Table(String),
}

/// Maps a (topic, claim) pair to a strength in `[0, 1]`.
///
/// `hint` is the strength carried by scripted input, if any. Implementations
/// must be deterministic for a given pair within a run.
pub trait StrengthScorer: Send + Sync {
    fn score(&self, topic: &str, claim: &str, hint: Option<f64>) -> Result<f64, ScoreError>;
}

/// Scores a candidate and clamps the result into `[0, 1]`.
pub fn score_strength(
    candidate: &CandidateArgument,
    topic: &str,
    scorer: &dyn StrengthScorer,
) -> Result<f64, ScoreError> {
    let raw = scorer.score(topic, &candidate.claim, candidate.strength_hint)?;
    if !raw.is_finite() {
        return Err(ScoreError::NotFinite(candidate.claim.clone()));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Offline default: uses the scripted hint when present, otherwise a stable
/// hash of the (topic, claim) pair.
#[derive(Debug, Clone, Default)]
pub struct BuiltinScorer;

impl StrengthScorer for BuiltinScorer {
    fn score(&self, topic: &str, claim: &str, hint: Option<f64>) -> Result<f64, ScoreError> {
        if let Some(h) = hint {
            return Ok(h);
        }
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in topic.bytes().chain(std::iter::once(0)).chain(claim.bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Ok((h >> 11) as f64 / (1u64 << 53) as f64)
    }
}

/// Precomputed strengths, e.g. exported classifier scores.
#[derive(Debug, Clone, Default)]
pub struct TableScorer {
    entries: HashMap<(String, String), f64>,
    use_hints: bool,
}

impl TableScorer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fall back to scripted hints for pairs missing from the table.
    pub fn with_hint_fallback(mut self) -> Self {
        self.use_hints = true;
        self
    }

    pub fn insert(&mut self, topic: impl Into<String>, claim: impl Into<String>, score: f64) {
        self.entries.insert((topic.into(), claim.into()), score);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads a CSV with a `topic,claim,score` header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, ScoreError> {
        #[derive(serde::Deserialize)]
        struct Row {
            topic: String,
            claim: String,
            score: f64,
        }
        let mut table = TableScorer::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| ScoreError::Table(format!("row {}: {e}", i + 1)))?;
            table.insert(row.topic, row.claim.trim(), row.score);
        }
        Ok(table)
    }
}

impl StrengthScorer for TableScorer {
    fn score(&self, topic: &str, claim: &str, hint: Option<f64>) -> Result<f64, ScoreError> {
        if let Some(&s) = self.entries.get(&(topic.to_string(), claim.to_string())) {
            return Ok(s);
        }
        match hint {
            Some(h) if self.use_hints => Ok(h),
            _ => Err(ScoreError::Missing {
                topic: topic.to_string(),
                claim: claim.to_string(),
            }),
        }
    }
}

/// Scores through an external service: `{topic, claim}` in, `{score}` out.
#[derive(Debug)]
pub struct ServiceScorer {
    service: JsonService,
}

impl ServiceScorer {
    pub fn new(service: JsonService) -> Self {
        ServiceScorer { service }
    }
}

impl StrengthScorer for ServiceScorer {
    fn score(&self, topic: &str, claim: &str, _hint: Option<f64>) -> Result<f64, ScoreError> {
        #[derive(serde::Serialize)]
        struct Request<'a> {
            topic: &'a str,
            claim: &'a str,
        }
        #[derive(serde::Deserialize)]
        struct Response {
            score: f64,
        }
        let resp: Response = self
            .service
            .call(&Request { topic, claim })
            .map_err(|e| ScoreError::Backend(e.to_string()))?;
        Ok(resp.score)
    }
}
