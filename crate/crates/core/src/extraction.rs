//! Message → candidate arguments.
//!
//! The scripted grammar is one claim per line:
//!
//! ```text
//! CLAIM +0.8: voting strengthens legitimacy
//! CLAIM -0.35: turnout mandates punish the poor
//! ```
//!
//! The sign is the polarity relative to the proposition (`-` or U+2212), the
//! decimal is a strength hint in `[0, 1]`. Lines that do not start with
//! `CLAIM ` are ignored. The same format is used for seed corpora and
//! opponent scripts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judgement::{CandidateArgument, Polarity, Role};
use crate::service::{JsonService, ServiceError};

/// Who wrote a message, from the receiving agent's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    #[serde(rename = "self")]
    SelfAuthored,
    Opponent,
    SeedSource,
}

impl Author {
    pub fn role(self) -> Role {
        match self {
            Author::SelfAuthored => Role::SelfAuthored,
            Author::Opponent => Role::Opponent,
            Author::SeedSource => Role::Seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub text: String,
    pub author: Author,
    pub order: u64,
}

impl Message {
    pub fn new(text: impl Into<String>, author: Author, order: u64) -> Self {
        Message {
            text: text.into(),
            author,
            order,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub candidates: Vec<CandidateArgument>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("extraction service failed: {0}")]
    Service(#[from] ServiceError),
    #[error("extraction response is not a JSON array")]
    NotAnArray,
}

pub trait Extractor: Send + Sync {
    fn extract(&self, topic: &str, message: &Message) -> Result<Extraction, ExtractError>;
}

/// Deterministic extractor over the scripted-claim grammar.
#[derive(Debug, Clone, Default)]
pub struct ScriptedExtractor;

impl Extractor for ScriptedExtractor {
    fn extract(&self, _topic: &str, message: &Message) -> Result<Extraction, ExtractError> {
        Ok(parse_scripted_message(message))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptedLine {
    Claim {
        polarity: Polarity,
        hint: f64,
        text: String,
    },
    Ignored,
    Malformed(String),
}

const PREFIX: &str = "CLAIM ";

pub fn parse_scripted_line(line: &str) -> ScriptedLine {
    let Some(rest) = line.trim().strip_prefix(PREFIX) else {
        return ScriptedLine::Ignored;
    };
    let mut chars = rest.chars();
    let polarity = match chars.next() {
        Some('+') => Polarity::Affirmative,
        Some('-') | Some('\u{2212}') => Polarity::Negative,
        _ => return ScriptedLine::Malformed(format!("missing sign in {line:?}")),
    };
    let rest = chars.as_str();
    let Some((hint_text, claim)) = rest.split_once(':') else {
        return ScriptedLine::Malformed(format!("missing ':' in {line:?}"));
    };
    let hint = match parse_hint(hint_text) {
        Some(h) => h,
        None => return ScriptedLine::Malformed(format!("bad strength hint {hint_text:?} in {line:?}")),
    };
    let text = claim.trim();
    if text.is_empty() {
        return ScriptedLine::Malformed(format!("empty claim in {line:?}"));
    }
    ScriptedLine::Claim {
        polarity,
        hint,
        text: text.to_string(),
    }
}

fn parse_hint(s: &str) -> Option<f64> {
    let digits_ok = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || c == '.')
        && s.chars().filter(|&c| c == '.').count() <= 1
        && s.chars().any(|c| c.is_ascii_digit());
    if !digits_ok {
        return None;
    }
    s.parse::<f64>().ok().filter(|h| (0.0..=1.0).contains(h))
}

/// Parses every `CLAIM` line of a message; malformed lines become warnings.
pub fn parse_scripted_message(message: &Message) -> Extraction {
    let role = message.author.role();
    let mut out = Extraction::default();
    for (i, line) in message.text.lines().enumerate() {
        match parse_scripted_line(line) {
            ScriptedLine::Claim { polarity, hint, text } => {
                // text is non-empty by construction
                if let Ok(c) = CandidateArgument::new(text, polarity, role) {
                    out.candidates.push(c.with_hint(hint));
                }
            }
            ScriptedLine::Ignored => {}
            ScriptedLine::Malformed(why) => {
                out.warnings.push(format!("message {} line {}: {why}", message.order, i + 1))
            }
        }
    }
    out
}

/// Parses a whole scripted file (seed corpus or opponent script).
pub fn parse_scripted_corpus(text: &str, role: Role) -> Extraction {
    let author = match role {
        Role::Seed => Author::SeedSource,
        Role::SelfAuthored => Author::SelfAuthored,
        Role::Opponent => Author::Opponent,
    };
    parse_scripted_message(&Message::new(text, author, 0))
}

/// Renders one claim in the scripted grammar. The hint uses the shortest
/// representation that parses back to the same `f64`.
pub fn format_scripted_claim(polarity: Polarity, strength: f64, claim: &str) -> String {
    let sign = match polarity {
        Polarity::Affirmative => '+',
        Polarity::Negative => '-',
    };
    format!("{PREFIX}{sign}{strength}: {claim}")
}

/// Extractor backed by a service: `{topic, message_text}` in, a JSON array
/// of `{claim, polarity}` out.
#[derive(Debug)]
pub struct ServiceExtractor {
    service: JsonService,
}

impl ServiceExtractor {
    pub fn new(service: JsonService) -> Self {
        ServiceExtractor { service }
    }
}

impl Extractor for ServiceExtractor {
    fn extract(&self, topic: &str, message: &Message) -> Result<Extraction, ExtractError> {
        #[derive(Serialize)]
        struct Request<'a> {
            topic: &'a str,
            message_text: &'a str,
        }
        let body: serde_json::Value = self.service.call(&Request {
            topic,
            message_text: &message.text,
        })?;
        candidates_from_service(body, message.author.role())
    }
}

/// Validates a service response item by item; invalid items are dropped with
/// a warning.
pub fn candidates_from_service(body: serde_json::Value, role: Role) -> Result<Extraction, ExtractError> {
    let serde_json::Value::Array(items) = body else {
        return Err(ExtractError::NotAnArray);
    };
    let mut out = Extraction::default();
    for (i, item) in items.into_iter().enumerate() {
        let claim = item.get("claim").and_then(|c| c.as_str());
        let polarity = item
            .get("polarity")
            .and_then(|p| p.as_i64())
            .and_then(|p| Polarity::try_from(p).ok());
        match (claim, polarity) {
            (Some(claim), Some(polarity)) => match CandidateArgument::new(claim, polarity, role) {
                Ok(c) => out.candidates.push(c),
                Err(e) => out.warnings.push(format!("item {i}: {e}")),
            },
            _ => out
                .warnings
                .push(format!("item {i}: expected {{claim, polarity in {{-1, 1}}}}, got {item}")),
        }
    }
    Ok(out)
}
