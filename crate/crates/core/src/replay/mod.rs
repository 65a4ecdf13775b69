//! Replay of observed pre/post stances and (u, a) calibration.
//!
//! A case's initial stance sets a fixed prior offset `a * logit(clip(S0))`;
//! its received evidence then goes through the same judgement path as a live
//! agent, with no generation and no retrieval.

pub mod calibrate;
pub mod case;
pub mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{
    compute_log_odds, init_prior_from_stance, log_odds_from_stance, clip_stance, stance_from_log_odds, BeliefError,
    UaProfile, DEFAULT_STANCE_CLIP,
};
use crate::engine::{Agent, EngineConfig, EngineError, Ports};
use crate::extraction::{Author, ExtractError, Message};
use crate::judgement::{
    resolve_conflict, score_strength, ArgumentRecord, CandidateArgument, JudgementError, Role, ScoreError,
};
use crate::memory::{MemoryError, MemoryStore};
use crate::trace::{EventPayload, TraceLog};

pub use calibrate::{
    assign_folds, calibrate, calibrate_by_subgroup, summarize, CalibrationGrid, CalibrationReport, FoldAssignment,
    FoldKey, FoldReport, HeldOutPrediction, SubgroupCalibration, SummaryRow, SurfaceCell,
};
pub use case::{read_cases, read_cases_filtered, CaseError, EvidenceItem, EvidenceSource, Ingested, ReplayCase, StanceReport};

/// Deduplication threshold for replayed evidence.
pub const REPLAY_THETA: f64 = 0.85;
/// Default |E| below which a mover counts as weak-signal.
pub const DEFAULT_EPS_WEAK: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("Likert value {0} outside 1..6")]
    Likert(i64),
    #[error("case {participant}: {source}")]
    Case {
        participant: String,
        #[source]
        source: Box<ReplayError>,
    },
    #[error(transparent)]
    Invalid(#[from] CaseError),
    #[error(transparent)]
    Scoring(#[from] ScoreError),
    #[error(transparent)]
    Extraction(#[from] ExtractError),
    #[error(transparent)]
    Judgement(#[from] JudgementError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{predictions} predictions for {observations} observations")]
    LengthMismatch { predictions: usize, observations: usize },
    #[error("invalid calibration grid: {0}")]
    Grid(String),
    #[error("cannot build folds: {0}")]
    Folds(String),
    #[error("invalid synthetic population spec: {0}")]
    Spec(String),
    #[error("no cases to evaluate")]
    Empty,
}

impl ReplayError {
    fn for_case(self, participant: &str) -> Self {
        ReplayError::Case {
            participant: participant.to_string(),
            source: Box::new(self),
        }
    }
}

/// Settings shared by every replayed case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaySettings {
    pub theta: f64,
    pub clip: f64,
}

impl Default for ReplaySettings {
    fn default() -> Self {
        ReplaySettings {
            theta: REPLAY_THETA,
            clip: DEFAULT_STANCE_CLIP,
        }
    }
}

/// `(2v - 7) / 5`: 1 → −1, 6 → +1.
pub fn likert_to_stance(v: i64) -> Result<f64, ReplayError> {
    if !(1..=6).contains(&v) {
        return Err(ReplayError::Likert(v));
    }
    Ok((2 * v - 7) as f64 / 5.0)
}

/// A case after judgement. Everything here is independent of (u, a), so a
/// calibration grid only needs [`predict`] per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgedCase {
    pub initial: f64,
    pub observed: f64,
    /// `logit(clip(initial))`, before anchoring.
    pub prior_logit: f64,
    /// Active records after the whole stream, in insertion order.
    pub accepted: Vec<ArgumentRecord>,
    pub net_evidence: f64,
    pub warnings: Vec<String>,
}

impl JudgedCase {
    pub fn delta(&self) -> f64 {
        self.observed - self.initial
    }
}

/// Candidates and strengths for one evidence item.
fn item_candidates(
    item: &EvidenceItem,
    topic: &str,
    ports: &Ports,
    warnings: &mut Vec<String>,
) -> Result<Vec<(CandidateArgument, f64)>, ReplayError> {
    let candidates = match item.polarity {
        Some(p) => {
            let mut c = CandidateArgument::new(item.claim.as_str(), p, Role::Opponent)?;
            c.strength_hint = item.hint;
            vec![c]
        }
        None => {
            let msg = Message::new(item.claim.as_str(), Author::Opponent, item.order);
            let extraction = ports.extractor.extract(topic, &msg)?;
            warnings.extend(extraction.warnings);
            extraction
                .candidates
                .into_iter()
                .map(|mut c| {
                    c.strength_hint = c.strength_hint.or(item.hint);
                    c
                })
                .collect()
        }
    };
    candidates
        .into_iter()
        .map(|c| {
            let s = match item.strength {
                Some(s) => s,
                None => score_strength(&c, topic, ports.scorer.as_ref())?,
            };
            Ok((c, s))
        })
        .collect()
}

/// Runs the judgement path over a case's stream once.
pub fn prepare_case(case: &ReplayCase, ports: &Ports, settings: &ReplaySettings) -> Result<JudgedCase, ReplayError> {
    let run = || -> Result<JudgedCase, ReplayError> {
        case.validate()?;
        let initial = case.initial_stance();
        let prior_logit = log_odds_from_stance(clip_stance(initial, settings.clip))?;
        let mut memory = MemoryStore::new();
        let mut warnings = Vec::new();
        for item in &case.evidence {
            for (cand, strength) in item_candidates(item, &case.topic, ports, &mut warnings)? {
                let mut record =
                    ArgumentRecord::from_candidate(&cand, strength, ports.embedder.embed(&cand.claim), item.order);
                record.id = memory.next_id();
                let resolution = resolve_conflict(&record, &memory, settings.theta)?;
                warnings.extend(resolution.warnings.iter().cloned());
                memory.admit(record, &resolution)?;
            }
        }
        let accepted: Vec<ArgumentRecord> = memory.active().cloned().collect();
        let net_evidence = accepted.iter().map(|r| r.polarity.sign() * r.strength).sum();
        Ok(JudgedCase {
            initial,
            observed: case.final_stance(),
            prior_logit,
            accepted,
            net_evidence,
            warnings,
        })
    };
    run().map_err(|e| e.for_case(&case.participant))
}

/// Predicted final stance of a judged case under `profile`. Bitwise equal to
/// [`replay_case`] for the same inputs.
pub fn predict(judged: &JudgedCase, profile: &UaProfile) -> Result<f64, BeliefError> {
    let prior = profile.anchoring() * judged.prior_logit;
    let evidence = compute_log_odds(&judged.accepted, profile)?;
    Ok(stance_from_log_odds(prior + evidence))
}

/// Replays one case through a full agent, recording the trace.
pub fn replay_case(
    case: &ReplayCase,
    profile: &UaProfile,
    ports: &Ports,
    settings: &ReplaySettings,
    trace: &mut TraceLog,
) -> Result<f64, ReplayError> {
    let run = |trace: &mut TraceLog| -> Result<f64, ReplayError> {
        case.validate()?;
        let prior = init_prior_from_stance(case.initial_stance(), profile, settings.clip)?;
        let config = EngineConfig {
            theta: settings.theta,
            ..EngineConfig::default()
        };
        let mut agent =
            Agent::new(&case.participant, &case.topic, *profile, config, ports.clone())?.with_prior(prior.log_odds());
        for item in &case.evidence {
            let mut warnings = Vec::new();
            let scored = item_candidates(item, &case.topic, ports, &mut warnings)?;
            for message in warnings {
                trace.push(agent.id(), EventPayload::Warning { message });
            }
            agent.ingest_scored(&scored, item.order, trace)?;
        }
        Ok(agent.stance())
    };
    run(trace).map_err(|e| e.for_case(&case.participant))
}

/// Signed net evidence `Σ p·s` over the records replay would accept.
pub fn net_evidence(case: &ReplayCase, ports: &Ports, settings: &ReplaySettings) -> Result<f64, ReplayError> {
    Ok(prepare_case(case, ports, settings)?.net_evidence)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub beta: f64,
    pub warning: Option<String>,
}

/// Single-coefficient least squares `ΔS ≈ β E` through the origin.
pub fn fit_linear_baseline(pairs: &[(f64, f64)]) -> LinearFit {
    let sxx: f64 = pairs.iter().map(|(e, _)| e * e).sum();
    let sxy: f64 = pairs.iter().map(|(e, d)| e * d).sum();
    if sxx == 0.0 {
        return LinearFit {
            beta: 0.0,
            warning: Some("all training net evidence is zero; beta set to 0".into()),
        };
    }
    LinearFit {
        beta: sxy / sxx,
        warning: None,
    }
}

pub fn linear_predict(initial: f64, beta: f64, net_evidence: f64) -> f64 {
    (initial + beta * net_evidence).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subgroup {
    Aligned,
    Opposed,
    WeakSignal,
    Stable,
}

impl Subgroup {
    pub const ALL: [Subgroup; 4] = [Subgroup::Aligned, Subgroup::Opposed, Subgroup::WeakSignal, Subgroup::Stable];

    pub fn label(self) -> &'static str {
        match self {
            Subgroup::Aligned => "Evidence-aligned movers",
            Subgroup::Opposed => "Evidence-opposed movers",
            Subgroup::WeakSignal => "Weak-signal movers",
            Subgroup::Stable => "Stable participants",
        }
    }
}

pub fn classify_subgroup(delta: f64, net_evidence: f64, eps_weak: f64) -> Subgroup {
    if delta == 0.0 {
        Subgroup::Stable
    } else if net_evidence.abs() < eps_weak {
        Subgroup::WeakSignal
    } else if (delta > 0.0) == (net_evidence > 0.0) {
        Subgroup::Aligned
    } else {
        Subgroup::Opposed
    }
}

pub fn rmse(predicted: &[f64], observed: &[f64]) -> Result<f64, ReplayError> {
    if predicted.len() != observed.len() {
        return Err(ReplayError::LengthMismatch {
            predictions: predicted.len(),
            observations: observed.len(),
        });
    }
    if predicted.is_empty() {
        return Err(ReplayError::Empty);
    }
    let sse: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok((sse / predicted.len() as f64).sqrt())
}

pub fn mean_abs_delta(initial: &[f64], observed: &[f64]) -> Result<f64, ReplayError> {
    if initial.len() != observed.len() {
        return Err(ReplayError::LengthMismatch {
            predictions: initial.len(),
            observations: observed.len(),
        });
    }
    if initial.is_empty() {
        return Err(ReplayError::Empty);
    }
    Ok(initial.iter().zip(observed).map(|(i, o)| (o - i).abs()).sum::<f64>() / initial.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub rmse: f64,
    pub mean_abs_delta: f64,
}

/// RMSE of `predicted` against the judged cases' observed finals, plus mean
/// observed movement.
pub fn evaluate(cases: &[JudgedCase], predicted: &[f64]) -> Result<Evaluation, ReplayError> {
    let observed: Vec<f64> = cases.iter().map(|c| c.observed).collect();
    let initial: Vec<f64> = cases.iter().map(|c| c.initial).collect();
    Ok(Evaluation {
        rmse: rmse(predicted, &observed)?,
        mean_abs_delta: mean_abs_delta(&initial, &observed)?,
    })
}
