//! The per-agent update loop: extract → judge → store → update → compose.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{compute_log_odds, contribution, BeliefError, BeliefState, UaProfile};
use crate::extraction::{
    format_scripted_claim, Author, ExtractError, Extractor, Message, ScriptedExtractor,
};
use crate::judgement::{
    resolve_conflict, resolve_self_conflict, score_strength, ArgumentRecord, BuiltinScorer,
    CandidateArgument, Decision, Embedder, JudgementError, Polarity, Role, ScoreError,
    StrengthScorer, TrigramEmbedder, DEFAULT_EMBEDDING_DIM,
};
use crate::memory::{MemoryError, MemoryStore, RetrievalContext};
use crate::service::JsonService;
use crate::trace::{EventPayload, ExtractedClaim, Outcome, TraceLog};

pub const STANCE_BINS: usize = 10;

pub fn default_bin_labels() -> Vec<String> {
    [
        "argue strongly against",
        "argue against",
        "argue moderately against",
        "lean against",
        "lean slightly against",
        "lean slightly for",
        "lean for",
        "argue moderately for",
        "argue for",
        "argue strongly for",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Deduplication threshold for incoming claims.
    pub theta: f64,
    /// Deduplication threshold for the agent's own claims.
    pub theta_self: f64,
    /// Retrieved records per turn.
    pub k: usize,
    pub history_window: usize,
    pub bin_labels: Vec<String>,
    pub embedding_dim: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            theta: 0.60,
            theta_self: 0.45,
            k: 5,
            history_window: 6,
            bin_labels: default_bin_labels(),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

impl EngineConfig {
    /// Thresholds used by the single-agent parameter sweeps.
    pub fn sweep() -> Self {
        EngineConfig {
            theta: 0.80,
            theta_self: 0.50,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.theta) || !unit(self.theta_self) {
            return Err(EngineError::Config(format!(
                "thresholds must lie in [0, 1] (theta={}, theta_self={})",
                self.theta, self.theta_self
            )));
        }
        if self.k < 1 {
            return Err(EngineError::Config("k must be at least 1".into()));
        }
        if self.bin_labels.len() != STANCE_BINS {
            return Err(EngineError::Config(format!(
                "expected {STANCE_BINS} bin labels, got {}",
                self.bin_labels.len()
            )));
        }
        if self.embedding_dim == 0 {
            return Err(EngineError::Config("embedding_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("message order {got} does not follow {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Extraction(#[from] ExtractError),
    #[error(transparent)]
    Scoring(#[from] ScoreError),
    #[error(transparent)]
    Generation(#[from] GenerateError),
    #[error(transparent)]
    Judgement(#[from] JudgementError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("generation failed: {0}")]
pub struct GenerateError(pub String);

pub trait Generator: Send + Sync {
    fn generate(
        &self,
        instruction: &str,
        retrieved: &RetrievalContext,
        history: &[Message],
    ) -> Result<String, GenerateError>;
}

/// Deterministic generator: the stance label followed by the retrieved
/// claims, re-emitted in the scripted grammar so listeners can extract them.
#[derive(Debug, Clone, Default)]
pub struct TemplateGenerator;

impl Generator for TemplateGenerator {
    fn generate(
        &self,
        instruction: &str,
        retrieved: &RetrievalContext,
        _history: &[Message],
    ) -> Result<String, GenerateError> {
        let mut text = format!("[{instruction}]");
        if !retrieved.records.is_empty() {
            text.push_str(" | claims:");
            for r in &retrieved.records {
                text.push('\n');
                text.push_str(&format_scripted_claim(r.polarity, r.strength, &r.claim));
            }
        }
        Ok(text)
    }
}

/// Generator backed by a service: `{instruction, retrieved, history}` in,
/// `{text}` out.
#[derive(Debug)]
pub struct ServiceGenerator {
    service: JsonService,
}

impl ServiceGenerator {
    pub fn new(service: JsonService) -> Self {
        ServiceGenerator { service }
    }
}

impl Generator for ServiceGenerator {
    fn generate(
        &self,
        instruction: &str,
        retrieved: &RetrievalContext,
        history: &[Message],
    ) -> Result<String, GenerateError> {
        #[derive(Serialize)]
        struct Claim<'a> {
            claim: &'a str,
            polarity: Polarity,
            strength: f64,
        }
        #[derive(Serialize)]
        struct Request<'a> {
            instruction: &'a str,
            retrieved: Vec<Claim<'a>>,
            history: &'a [Message],
        }
        #[derive(Deserialize)]
        struct Response {
            text: String,
        }
        let req = Request {
            instruction,
            retrieved: retrieved
                .records
                .iter()
                .map(|r| Claim {
                    claim: &r.claim,
                    polarity: r.polarity,
                    strength: r.strength,
                })
                .collect(),
            history,
        };
        let resp: Response = self
            .service
            .call(&req)
            .map_err(|e| GenerateError(e.to_string()))?;
        Ok(resp.text)
    }
}

/// Port bindings for one agent. Cloning shares the underlying backends.
#[derive(Clone)]
pub struct Ports {
    pub extractor: Arc<dyn Extractor>,
    pub scorer: Arc<dyn StrengthScorer>,
    pub generator: Arc<dyn Generator>,
    pub embedder: Arc<dyn Embedder>,
}

impl Ports {
    /// Scripted extractor, hint-aware builtin scorer, template generator and
    /// trigram embedder: everything runs locally and deterministically.
    pub fn offline(embedding_dim: usize) -> Self {
        Ports {
            extractor: Arc::new(ScriptedExtractor),
            scorer: Arc::new(BuiltinScorer),
            generator: Arc::new(TemplateGenerator),
            embedder: Arc::new(TrigramEmbedder::new(embedding_dim)),
        }
    }
}

impl Default for Ports {
    fn default() -> Self {
        Ports::offline(DEFAULT_EMBEDDING_DIM)
    }
}

/// Left-closed tenth of `[-1, 1]`; `+1` falls in the top bin.
///
/// Values within 1e-9 below a boundary snap up to it, so that boundaries
/// computed as `0.2 * j - 1` land in bin `j`.
pub fn stance_bin(stance: f64) -> usize {
    let raw = ((stance + 1.0) * 5.0 + 1e-9).floor();
    (raw.max(0.0) as usize).min(STANCE_BINS - 1)
}

pub fn stance_to_instruction(stance: f64, labels: &[String]) -> (usize, &str) {
    let bin = stance_bin(stance);
    (bin, labels[bin].as_str())
}

/// One belief-engine agent.
#[derive(Clone)]
pub struct Agent {
    id: String,
    topic: String,
    profile: UaProfile,
    config: EngineConfig,
    ports: Ports,
    memory: MemoryStore,
    belief: BeliefState,
    prior_log_odds: f64,
    history: VecDeque<Message>,
    last_order: Option<u64>,
}

impl std::fmt::Debug for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Agent")
            .field("id", &self.id)
            .field("profile", &self.profile)
            .field("belief", &self.belief)
            .field("records", &self.memory.len())
            .finish()
    }
}

impl Agent {
    pub fn new(
        id: impl Into<String>,
        topic: impl Into<String>,
        profile: UaProfile,
        config: EngineConfig,
        ports: Ports,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Agent {
            id: id.into(),
            topic: topic.into(),
            profile,
            config,
            ports,
            memory: MemoryStore::new(),
            belief: BeliefState::default(),
            prior_log_odds: 0.0,
            history: VecDeque::new(),
            last_order: None,
        })
    }

    /// Adds a fixed log-odds offset in front of the evidence sum (replay prior).
    pub fn with_prior(mut self, prior_log_odds: f64) -> Self {
        self.prior_log_odds = prior_log_odds;
        self.belief = BeliefState::from_log_odds(prior_log_odds);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn profile(&self) -> &UaProfile {
        &self.profile
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn ports(&self) -> &Ports {
        &self.ports
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn belief(&self) -> BeliefState {
        self.belief
    }

    pub fn stance(&self) -> f64 {
        self.belief.stance()
    }

    pub fn prior_log_odds(&self) -> f64 {
        self.prior_log_odds
    }

    pub fn history(&self) -> impl Iterator<Item = &Message> {
        self.history.iter()
    }

    /// Runs extract → score → resolve → store → update for one message.
    pub fn process_message(&mut self, incoming: &Message, trace: &mut TraceLog) -> Result<(), EngineError> {
        if let Some(last) = self.last_order {
            if incoming.order <= last {
                return Err(EngineError::OutOfOrder {
                    last,
                    got: incoming.order,
                });
            }
        }
        let extraction = self.ports.extractor.extract(&self.topic, incoming)?;
        trace.push(
            &self.id,
            EventPayload::Extracted {
                order: incoming.order,
                author: incoming.author,
                candidates: extraction
                    .candidates
                    .iter()
                    .map(|c| ExtractedClaim {
                        claim: c.claim.clone(),
                        polarity: c.polarity,
                        hint: c.strength_hint,
                    })
                    .collect(),
            },
        );
        for w in extraction.warnings {
            trace.push(&self.id, EventPayload::Warning { message: w });
        }

        let mut scored = Vec::with_capacity(extraction.candidates.len());
        for c in extraction.candidates {
            let strength = score_strength(&c, &self.topic, self.ports.scorer.as_ref())?;
            trace.push(
                &self.id,
                EventPayload::Scored {
                    claim: c.claim.clone(),
                    strength,
                },
            );
            scored.push((c, strength));
        }
        self.ingest_scored(&scored, incoming.order, trace)?;

        self.history.push_back(incoming.clone());
        while self.history.len() > self.config.history_window {
            self.history.pop_front();
        }
        self.last_order = Some(incoming.order);
        Ok(())
    }

    /// Judges and stores already-scored candidates, then recomputes the
    /// belief from the active set. Emits nothing when `scored` is empty.
    pub fn ingest_scored(
        &mut self,
        scored: &[(CandidateArgument, f64)],
        order: u64,
        trace: &mut TraceLog,
    ) -> Result<(), EngineError> {
        if scored.is_empty() {
            return Ok(());
        }
        for (candidate, strength) in scored {
            let embedding = self.ports.embedder.embed(&candidate.claim);
            let mut record = ArgumentRecord::from_candidate(candidate, *strength, embedding, order);
            record.id = self.memory.next_id();
            let resolution = if candidate.role == Role::SelfAuthored {
                resolve_self_conflict(&record, &self.memory, self.config.theta_self)?
            } else {
                resolve_conflict(&record, &self.memory, self.config.theta)?
            };
            let (outcome, counterpart) = match resolution.decision {
                Decision::Accepted => (Outcome::Accepted, None),
                Decision::ReplacedExisting(old) => (Outcome::ReplacedExisting, Some(old)),
                Decision::ArchivedNew(kept) => (Outcome::ArchivedNew, Some(kept)),
            };
            for w in &resolution.warnings {
                trace.push(&self.id, EventPayload::Warning { message: w.clone() });
            }
            trace.push(
                &self.id,
                EventPayload::Resolved {
                    claim: record.claim.clone(),
                    polarity: record.polarity,
                    role: record.role,
                    strength: record.strength,
                    outcome,
                    nearest: resolution.nearest.map(|n| n.id),
                    similarity: resolution.nearest.map(|n| n.similarity),
                    counterpart,
                },
            );
            let id = self.memory.admit(record, &resolution)?;
            let stored = self.memory.get(id).expect("admitted record is present");
            let gamma = self.profile.weight(stored.role);
            trace.push(
                &self.id,
                EventPayload::Stored {
                    id,
                    claim: stored.claim.clone(),
                    polarity: stored.polarity,
                    role: stored.role,
                    strength: stored.strength,
                    active: stored.active,
                    archived_by: stored.archived_by,
                    inserted_at: stored.inserted_at,
                    gamma,
                    contribution: if stored.active {
                        contribution(stored.polarity.sign(), stored.strength, gamma)
                    } else {
                        0.0
                    },
                },
            );
        }
        self.refresh_belief(trace)
    }

    /// Full recompute: prior offset plus the evidence sum over the active set.
    pub fn refresh_belief(&mut self, trace: &mut TraceLog) -> Result<(), EngineError> {
        let before = self.belief;
        let evidence = compute_log_odds(self.memory.active(), &self.profile)?;
        let after = BeliefState::from_log_odds(self.prior_log_odds + evidence);
        trace.push(
            &self.id,
            EventPayload::Updated {
                uptake: self.profile.uptake(),
                anchoring: self.profile.anchoring(),
                prior_log_odds: self.prior_log_odds,
                log_odds_before: before.log_odds(),
                log_odds_after: after.log_odds(),
                stance_before: before.stance(),
                stance_after: after.stance(),
                delta: after.log_odds() - before.log_odds(),
            },
        );
        self.belief = after;
        Ok(())
    }

    /// Retrieves context, maps the stance to an instruction and asks the
    /// generator for the next utterance. The caller feeds the returned
    /// message back through [`Agent::process_message`].
    pub fn compose_response(&mut self, order: u64, trace: &mut TraceLog) -> Result<Message, EngineError> {
        let retrieved = self.memory.retrieve(self.config.k)?;
        trace.push(
            &self.id,
            EventPayload::Retrieved {
                k_plus: retrieved.k_plus,
                k_minus: retrieved.k_minus,
                ids: retrieved.records.iter().map(|r| r.id).collect(),
            },
        );
        let (bin, label) = stance_to_instruction(self.belief.stance(), &self.config.bin_labels);
        let history: Vec<Message> = self.history.iter().cloned().collect();
        let text = self.ports.generator.generate(label, &retrieved, &history)?;
        if text.trim().is_empty() {
            return Err(GenerateError("generator returned empty text".into()).into());
        }
        trace.push(
            &self.id,
            EventPayload::Composed {
                bin,
                instruction: label.to_string(),
                text: text.clone(),
            },
        );
        Ok(Message::new(text, Author::SelfAuthored, order))
    }

    /// Composes a turn and immediately stores the agent's own arguments.
    pub fn speak(&mut self, order: u64, trace: &mut TraceLog) -> Result<Message, EngineError> {
        let msg = self.compose_response(order, trace)?;
        self.process_message(&msg, trace)?;
        Ok(msg)
    }
}
