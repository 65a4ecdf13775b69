//! Replay case schema and JSONL ingestion.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judgement::Polarity;

use super::likert_to_stance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceSource {
    Received,
    #[serde(rename = "self")]
    SelfAuthored,
}

fn received() -> EvidenceSource {
    EvidenceSource::Received
}

/// One received item. Without `polarity` the claim text is routed through the
/// extractor; without `strength` the scorer is asked, with `hint` passed along.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceItem {
    pub order: u64,
    pub claim: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<Polarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<f64>,
    #[serde(default = "received")]
    pub source: EvidenceSource,
}

impl EvidenceItem {
    pub fn scored(order: u64, claim: impl Into<String>, polarity: Polarity, strength: f64) -> Self {
        EvidenceItem {
            order,
            claim: claim.into(),
            polarity: Some(polarity),
            strength: Some(strength),
            hint: None,
            source: EvidenceSource::Received,
        }
    }
}

/// A reported stance: a six-point Likert answer or an already mapped value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StanceReport {
    Likert(u8),
    Continuous(f64),
}

impl StanceReport {
    pub fn stance(self) -> f64 {
        match self {
            StanceReport::Likert(v) => likert_to_stance(v as i64).expect("validated on construction"),
            StanceReport::Continuous(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCase", into = "RawCase")]
pub struct ReplayCase {
    pub participant: String,
    pub group: String,
    pub topic: String,
    pub initial: StanceReport,
    pub final_report: StanceReport,
    pub evidence: Vec<EvidenceItem>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaseError {
    #[error("field {0:?} must not be empty")]
    EmptyField(&'static str),
    #[error("exactly one of {0}_likert and {0}_stance is required")]
    StanceFields(&'static str),
    #[error("Likert value {0} outside 1..6")]
    Likert(i64),
    #[error("stance {0} outside [-1, 1]")]
    Stance(f64),
    #[error("evidence order {got} does not follow {prev}")]
    Order { prev: u64, got: u64 },
    #[error("evidence item {0} is self-authored")]
    SelfAuthored(u64),
    #[error("evidence item {order}: {what} {value} outside [0, 1]")]
    Unit { order: u64, what: &'static str, value: f64 },
    #[error("evidence item {0} has an empty claim")]
    EmptyClaim(u64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    participant: String,
    group: String,
    topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_likert: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_stance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    final_likert: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    final_stance: Option<f64>,
    #[serde(default)]
    evidence: Vec<EvidenceItem>,
}

fn check_report(r: StanceReport) -> Result<StanceReport, CaseError> {
    match r {
        StanceReport::Likert(v) if !(1..=6).contains(&v) => Err(CaseError::Likert(v as i64)),
        StanceReport::Continuous(s) if !(s.is_finite() && s.abs() <= 1.0) => Err(CaseError::Stance(s)),
        ok => Ok(ok),
    }
}

fn report(which: &'static str, likert: Option<i64>, stance: Option<f64>) -> Result<StanceReport, CaseError> {
    match (likert, stance) {
        (Some(v), None) => {
            let v = u8::try_from(v).map_err(|_| CaseError::Likert(v))?;
            check_report(StanceReport::Likert(v))
        }
        (None, Some(s)) => check_report(StanceReport::Continuous(s)),
        _ => Err(CaseError::StanceFields(which)),
    }
}

impl TryFrom<RawCase> for ReplayCase {
    type Error = CaseError;

    fn try_from(raw: RawCase) -> Result<Self, CaseError> {
        let case = ReplayCase {
            initial: report("initial", raw.initial_likert, raw.initial_stance)?,
            final_report: report("final", raw.final_likert, raw.final_stance)?,
            participant: raw.participant,
            group: raw.group,
            topic: raw.topic,
            evidence: raw.evidence,
        };
        case.validate()?;
        Ok(case)
    }
}

impl From<ReplayCase> for RawCase {
    fn from(c: ReplayCase) -> Self {
        let split = |r: StanceReport| match r {
            StanceReport::Likert(v) => (Some(v as i64), None),
            StanceReport::Continuous(s) => (None, Some(s)),
        };
        let (initial_likert, initial_stance) = split(c.initial);
        let (final_likert, final_stance) = split(c.final_report);
        RawCase {
            participant: c.participant,
            group: c.group,
            topic: c.topic,
            initial_likert,
            initial_stance,
            final_likert,
            final_stance,
            evidence: c.evidence,
        }
    }
}

impl ReplayCase {
    pub fn validate(&self) -> Result<(), CaseError> {
        for (name, value) in [
            ("participant", &self.participant),
            ("group", &self.group),
            ("topic", &self.topic),
        ] {
            if value.trim().is_empty() {
                return Err(CaseError::EmptyField(name));
            }
        }
        check_report(self.initial)?;
        check_report(self.final_report)?;
        let mut prev: Option<u64> = None;
        for item in &self.evidence {
            if let Some(p) = prev {
                if item.order <= p {
                    return Err(CaseError::Order { prev: p, got: item.order });
                }
            }
            prev = Some(item.order);
            if item.source == EvidenceSource::SelfAuthored {
                return Err(CaseError::SelfAuthored(item.order));
            }
            if item.claim.trim().is_empty() {
                return Err(CaseError::EmptyClaim(item.order));
            }
            for (what, value) in [("strength", item.strength), ("hint", item.hint)] {
                if let Some(v) = value {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(CaseError::Unit {
                            order: item.order,
                            what,
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn initial_stance(&self) -> f64 {
        self.initial.stance()
    }

    pub fn final_stance(&self) -> f64 {
        self.final_report.stance()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub cases: Vec<ReplayCase>,
    pub errors: Vec<LineError>,
    /// Valid cases dropped by the validity filter.
    pub filtered: usize,
}

/// Reads JSONL cases; malformed lines are collected with their line numbers.
/// Cases rejected by `keep` are counted but not returned.
pub fn read_cases_filtered<R: BufRead>(
    input: R,
    keep: &dyn Fn(&ReplayCase) -> bool,
) -> std::io::Result<Ingested> {
    let mut out = Ingested::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ReplayCase>(&line) {
            Ok(case) if keep(&case) => out.cases.push(case),
            Ok(_) => out.filtered += 1,
            Err(e) => out.errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub fn read_cases<R: BufRead>(input: R) -> std::io::Result<Ingested> {
    read_cases_filtered(input, &|_| true)
}
