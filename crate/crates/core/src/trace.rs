//! Audit trail.
//!
//! Every sub-step of the update loop appends a [`TraceEvent`]. Events are
//! written as JSON lines and chained with SHA-256: each digest covers the
//! previous digest and the event's own canonical serialization. The verifier
//! rebuilds each agent's memory from `stored`/`resolved` events and
//! recomputes every `updated` event from scratch.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::belief::{contribution, stance_from_log_odds, UaProfile};
use crate::extraction::Author;
use crate::judgement::{Polarity, RecordId, Role};

/// Absolute tolerance used when re-deriving numeric fields.
pub const VERIFY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractedClaim {
    pub claim: String,
    pub polarity: Polarity,
    pub hint: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    ReplacedExisting,
    ArchivedNew,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventPayload {
    Extracted {
        order: u64,
        author: Author,
        candidates: Vec<ExtractedClaim>,
    },
    Scored {
        claim: String,
        strength: f64,
    },
    Resolved {
        claim: String,
        polarity: Polarity,
        role: Role,
        strength: f64,
        outcome: Outcome,
        nearest: Option<RecordId>,
        similarity: Option<f64>,
        /// Existing record archived (replacement) or kept (archived new).
        counterpart: Option<RecordId>,
    },
    Stored {
        id: RecordId,
        claim: String,
        polarity: Polarity,
        role: Role,
        strength: f64,
        active: bool,
        archived_by: Option<RecordId>,
        inserted_at: u64,
        gamma: f64,
        /// `p * ln(1 + s * gamma)` if the record is active, else 0.
        contribution: f64,
    },
    Updated {
        uptake: f64,
        anchoring: f64,
        prior_log_odds: f64,
        log_odds_before: f64,
        log_odds_after: f64,
        stance_before: f64,
        stance_after: f64,
        delta: f64,
    },
    Retrieved {
        k_plus: usize,
        k_minus: usize,
        ids: Vec<RecordId>,
    },
    Composed {
        bin: usize,
        instruction: String,
        text: String,
    },
    Warning {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub agent: String,
    #[serde(flatten)]
    pub payload: EventPayload,
    pub digest: String,
}

impl TraceEvent {
    fn body_bytes(&self) -> Vec<u8> {
        let mut unsigned = self.clone();
        unsigned.digest.clear();
        serde_json::to_vec(&unsigned).expect("trace events always serialize")
    }

    fn chained_digest(&self, previous: &str) -> String {
        let mut h = Sha256::new();
        h.update(previous.as_bytes());
        h.update(self.body_bytes());
        format!("{:x}", h.finalize())
    }
}

/// Append-only event log shared by the agents of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    events: Vec<TraceEvent>,
    last_digest: String,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, agent: &str, payload: EventPayload) -> &TraceEvent {
        let seq = self.events.len() as u64;
        let mut event = TraceEvent {
            seq,
            agent: agent.to_string(),
            payload,
            digest: String::new(),
        };
        event.digest = event.chained_digest(&self.last_digest);
        self.last_digest = event.digest.clone();
        self.events.push(event);
        self.events.last().expect("just pushed")
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyError {
    pub line: usize,
    pub seq: Option<u64>,
    pub reason: String,
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.seq {
            Some(seq) => write!(f, "event {seq} (line {}): {}", self.line, self.reason),
            None => write!(f, "line {}: {}", self.line, self.reason),
        }
    }
}

impl std::error::Error for VerifyError {}

/// Final reconstructed belief of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSummary {
    pub log_odds: f64,
    pub stance: f64,
    pub records: usize,
    pub active: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifiedTrace {
    pub events: usize,
    pub agents: BTreeMap<String, AgentSummary>,
}

#[derive(Debug, Clone)]
struct ReplicaRecord {
    polarity: Polarity,
    role: Role,
    strength: f64,
    active: bool,
}

#[derive(Debug, Default)]
struct Replica {
    records: BTreeMap<RecordId, ReplicaRecord>,
    next_id: u64,
    log_odds: f64,
    /// Fixed offset announced by the agent's first update.
    prior: Option<f64>,
    pending_archive: Option<RecordId>,
}

impl Replica {
    fn recompute(&self, profile: &UaProfile) -> f64 {
        let mut total = 0.0;
        for r in self.records.values().filter(|r| r.active) {
            total += contribution(r.polarity.sign(), r.strength, profile.weight(r.role));
        }
        total
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VERIFY_TOLERANCE
}

/// Verifies a JSONL trace: canonical encoding, digest chain, sequence
/// numbers, and every belief update against a from-scratch recomputation.
pub fn verify_trace<R: BufRead>(input: R) -> Result<VerifiedTrace, VerifyError> {
    let mut replicas: BTreeMap<String, Replica> = BTreeMap::new();
    let mut last_digest = String::new();
    let mut expected_seq = 0u64;
    let mut count = 0usize;

    for (i, line) in input.split(b'\n').enumerate() {
        let lineno = i + 1;
        let fail = |seq: Option<u64>, reason: String| VerifyError {
            line: lineno,
            seq,
            reason,
        };
        let raw = line.map_err(|e| fail(None, e.to_string()))?;
        if raw.is_empty() {
            continue;
        }
        let event: TraceEvent =
            serde_json::from_slice(&raw).map_err(|e| fail(None, format!("unparseable event: {e}")))?;
        let seq = Some(event.seq);
        let canonical = serde_json::to_vec(&event).map_err(|e| fail(seq, e.to_string()))?;
        if canonical != raw {
            return Err(fail(seq, "event is not in canonical form".into()));
        }
        if event.seq != expected_seq {
            return Err(fail(seq, format!("expected sequence number {expected_seq}")));
        }
        if event.chained_digest(&last_digest) != event.digest {
            return Err(fail(seq, "digest mismatch".into()));
        }
        last_digest = event.digest.clone();
        expected_seq += 1;
        count += 1;

        let replica = replicas.entry(event.agent.clone()).or_default();
        check_event(replica, &event.payload).map_err(|reason| fail(seq, reason))?;
    }

    let agents = replicas
        .into_iter()
        .map(|(agent, r)| {
            let summary = AgentSummary {
                log_odds: r.log_odds,
                stance: stance_from_log_odds(r.log_odds),
                records: r.records.len(),
                active: r.records.values().filter(|x| x.active).count(),
            };
            (agent, summary)
        })
        .collect();
    Ok(VerifiedTrace {
        events: count,
        agents,
    })
}

fn check_event(replica: &mut Replica, payload: &EventPayload) -> Result<(), String> {
    match payload {
        EventPayload::Resolved {
            outcome, counterpart, ..
        } => {
            replica.pending_archive = None;
            match (outcome, counterpart) {
                (Outcome::Accepted, None) => {}
                (Outcome::ReplacedExisting, Some(old)) => {
                    match replica.records.get(old) {
                        Some(r) if r.active => {}
                        _ => return Err(format!("replaced record {old} is not active")),
                    }
                    replica.pending_archive = Some(*old);
                }
                (Outcome::ArchivedNew, Some(kept)) => match replica.records.get(kept) {
                    Some(r) if r.active => {}
                    _ => return Err(format!("kept record {kept} is not active")),
                },
                _ => return Err("resolution outcome and counterpart disagree".into()),
            }
        }
        EventPayload::Stored {
            id,
            polarity,
            role,
            strength,
            active,
            archived_by,
            gamma,
            contribution: stored_contribution,
            ..
        } => {
            if id.0 != replica.next_id {
                return Err(format!("expected record id {}, got {id}", replica.next_id));
            }
            if !(0.0..=1.0).contains(strength) {
                return Err(format!("strength {strength} outside [0, 1]"));
            }
            let expected = if *active {
                contribution(polarity.sign(), *strength, *gamma)
            } else {
                0.0
            };
            if !close(expected, *stored_contribution) {
                return Err(format!(
                    "contribution {stored_contribution} does not match {expected}"
                ));
            }
            if !*active && archived_by.is_none() {
                return Err("archived record without archived_by".into());
            }
            if let Some(old) = replica.pending_archive.take() {
                if !*active {
                    return Err("replacement stored an inactive record".into());
                }
                if let Some(r) = replica.records.get_mut(&old) {
                    r.active = false;
                }
            }
            replica.records.insert(
                *id,
                ReplicaRecord {
                    polarity: *polarity,
                    role: *role,
                    strength: *strength,
                    active: *active,
                },
            );
            replica.next_id += 1;
        }
        EventPayload::Updated {
            uptake,
            anchoring,
            prior_log_odds,
            log_odds_before,
            log_odds_after,
            stance_before,
            stance_after,
            delta,
        } => {
            let profile =
                UaProfile::new(*uptake, *anchoring).map_err(|e| format!("invalid profile: {e}"))?;
            // an agent's belief starts at its prior, which the first update announces
            let start = match replica.prior {
                None => {
                    replica.prior = Some(*prior_log_odds);
                    replica.log_odds = *prior_log_odds;
                    *prior_log_odds
                }
                Some(p) if p.to_bits() == prior_log_odds.to_bits() => replica.log_odds,
                Some(p) => return Err(format!("prior_log_odds changed from {p} to {prior_log_odds}")),
            };
            if !close(*log_odds_before, start) {
                return Err(format!(
                    "log_odds_before {log_odds_before} does not continue from {}",
                    replica.log_odds
                ));
            }
            let recomputed = prior_log_odds + replica.recompute(&profile);
            if !close(recomputed, *log_odds_after) {
                return Err(format!(
                    "log_odds_after {log_odds_after} differs from recomputed {recomputed}"
                ));
            }
            if !close(*delta, log_odds_after - log_odds_before) {
                return Err(format!("delta {delta} inconsistent with before/after"));
            }
            if !close(*stance_before, stance_from_log_odds(*log_odds_before))
                || !close(*stance_after, stance_from_log_odds(*log_odds_after))
            {
                return Err("stance does not match log-odds".into());
            }
            for (id, r) in &replica.records {
                if r.active && !(0.0..=1.0).contains(&r.strength) {
                    return Err(format!("record {id} strength out of range"));
                }
            }
            replica.log_odds = *log_odds_after;
        }
        EventPayload::Retrieved { ids, .. } => {
            for id in ids {
                match replica.records.get(id) {
                    Some(r) if r.active => {}
                    _ => return Err(format!("retrieved record {id} is not active")),
                }
            }
        }
        EventPayload::Extracted { .. }
        | EventPayload::Scored { .. }
        | EventPayload::Composed { .. }
        | EventPayload::Warning { .. } => {}
    }
    Ok(())
}
