//! Bundled scripted corpora for the compulsory-voting proposition.

use crate::extraction::parse_scripted_corpus;
use crate::judgement::{CandidateArgument, Polarity, Role};

use super::SimulationError;

pub const BUNDLED_TOPIC: &str = "We should introduce compulsory voting";

/// 20 affirmative and 20 negative seed claims, hints in [0.9, 1.0].
pub const BUNDLED_SEEDS: &str = include_str!("../../data/compulsory_voting_seeds.txt");

/// All-con counter-argument script, one claim per round.
pub const BUNDLED_OPPONENT: &str = include_str!("../../data/compulsory_voting_opponent.txt");

fn load(text: &str, role: Role, what: &str) -> Result<Vec<CandidateArgument>, SimulationError> {
    let parsed = parse_scripted_corpus(text, role);
    if let Some(w) = parsed.warnings.first() {
        return Err(SimulationError::Corpus(format!("{what}: {w}")));
    }
    Ok(parsed.candidates)
}

/// Parses a seed corpus; any malformed `CLAIM` line is an error.
pub fn load_seed_corpus(text: &str) -> Result<Vec<CandidateArgument>, SimulationError> {
    load(text, Role::Seed, "seed corpus")
}

/// Parses an opponent script. Every claim must be negative and the script
/// must not be empty.
pub fn load_opponent_script(text: &str) -> Result<Vec<CandidateArgument>, SimulationError> {
    let claims = load(text, Role::Opponent, "opponent script")?;
    if claims.is_empty() {
        return Err(SimulationError::Corpus("opponent script has no claims".into()));
    }
    if let Some(c) = claims.iter().find(|c| c.polarity != Polarity::Negative) {
        return Err(SimulationError::Corpus(format!(
            "opponent script must be all-con, found affirmative claim {:?}",
            c.claim
        )));
    }
    Ok(claims)
}

pub fn bundled_seeds() -> Vec<CandidateArgument> {
    load_seed_corpus(BUNDLED_SEEDS).expect("bundled seed corpus parses")
}

pub fn bundled_opponent() -> Vec<CandidateArgument> {
    load_opponent_script(BUNDLED_OPPONENT).expect("bundled opponent script parses")
}
