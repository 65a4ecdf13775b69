//! Log-odds belief state and the uptake/anchoring update rule.
//!
//! Evidence enters as `p * ln(1 + s * gamma)` where `gamma` is the anchoring
//! weight `a` for seed records and the uptake weight `u` for everything else.
//! The stance readout is `2 * sigmoid(L) - 1`, computed as `tanh(L / 2)` so
//! that the sign of the stance always matches the sign of the log-odds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judgement::{ArgumentRecord, Role};

/// Bound applied to a stance before it is inverted into log-odds.
pub const DEFAULT_STANCE_CLIP: f64 = 0.995;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("uptake and anchoring must be finite and non-negative (u={uptake}, a={anchoring})")]
    InvalidProfile { uptake: f64, anchoring: f64 },
    #[error("confirmation asymmetry must be 0.0, got {0}")]
    UnsupportedAsymmetry(f64),
    #[error("record {id} has strength {strength} outside [0, 1]")]
    StrengthOutOfRange { id: u64, strength: f64 },
    #[error("record {0} is archived and cannot contribute to the belief state")]
    InactiveRecord(u64),
    #[error("stance {0} has no finite log-odds")]
    StanceOutOfDomain(f64),
    #[error("clip bound {0} must lie in (0, 1)")]
    InvalidClip(f64),
    #[error("records were archived since the last increment; recompute from the active set")]
    StaleIncrement,
}

/// The (u, a) control pair.
///
/// Confirmation asymmetry is carried for configuration compatibility but only
/// `0.0` is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileFields", into = "ProfileFields")]
pub struct UaProfile {
    uptake: f64,
    anchoring: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFields {
    uptake: f64,
    anchoring: f64,
    #[serde(default)]
    confirmation_asymmetry: f64,
}

impl TryFrom<ProfileFields> for UaProfile {
    type Error = BeliefError;

    fn try_from(f: ProfileFields) -> Result<Self, Self::Error> {
        UaProfile::with_asymmetry(f.uptake, f.anchoring, f.confirmation_asymmetry)
    }
}

impl From<UaProfile> for ProfileFields {
    fn from(p: UaProfile) -> Self {
        ProfileFields {
            uptake: p.uptake,
            anchoring: p.anchoring,
            confirmation_asymmetry: 0.0,
        }
    }
}

impl UaProfile {
    /// Open-minded agents: high uptake, weak anchoring.
    pub const OPEN_MINDED: UaProfile = UaProfile {
        uptake: 0.40,
        anchoring: 0.20,
    };
    /// Stubborn agents: low uptake, strong anchoring.
    pub const STUBBORN: UaProfile = UaProfile {
        uptake: 0.10,
        anchoring: 0.80,
    };

    pub fn new(uptake: f64, anchoring: f64) -> Result<Self, BeliefError> {
        Self::with_asymmetry(uptake, anchoring, 0.0)
    }

    pub fn with_asymmetry(uptake: f64, anchoring: f64, asymmetry: f64) -> Result<Self, BeliefError> {
        let valid = |x: f64| x.is_finite() && x >= 0.0;
        if !valid(uptake) || !valid(anchoring) {
            return Err(BeliefError::InvalidProfile { uptake, anchoring });
        }
        if asymmetry != 0.0 {
            return Err(BeliefError::UnsupportedAsymmetry(asymmetry));
        }
        Ok(UaProfile { uptake, anchoring })
    }

    pub fn uptake(&self) -> f64 {
        self.uptake
    }

    pub fn anchoring(&self) -> f64 {
        self.anchoring
    }

    pub fn confirmation_asymmetry(&self) -> f64 {
        0.0
    }

    /// Weight applied to a record of the given role.
    pub fn weight(&self, role: Role) -> f64 {
        match role {
            Role::Seed => self.anchoring,
            Role::SelfAuthored | Role::Opponent => self.uptake,
        }
    }
}

/// Accumulated log-odds and the stance derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    log_odds: f64,
    stance: f64,
}

impl Default for BeliefState {
    fn default() -> Self {
        BeliefState::from_log_odds(0.0)
    }
}

impl BeliefState {
    pub fn from_log_odds(log_odds: f64) -> Self {
        BeliefState {
            log_odds,
            stance: stance_from_log_odds(log_odds),
        }
    }

    pub fn log_odds(&self) -> f64 {
        self.log_odds
    }

    pub fn stance(&self) -> f64 {
        self.stance
    }
}

/// Log-odds contribution of one piece of evidence.
#[inline]
pub fn contribution(sign: f64, strength: f64, gamma: f64) -> f64 {
    sign * (strength * gamma).ln_1p()
}

/// Recomputes the evidence sum over an active record set.
///
/// Records are summed in iteration order. Archived records and strengths
/// outside `[0, 1]` are contract violations.
pub fn compute_log_odds<'a, I>(active: I, profile: &UaProfile) -> Result<f64, BeliefError>
where
    I: IntoIterator<Item = &'a ArgumentRecord>,
{
    let mut total = 0.0;
    for record in active {
        total += record_contribution(record, profile)?;
    }
    Ok(total)
}

fn record_contribution(record: &ArgumentRecord, profile: &UaProfile) -> Result<f64, BeliefError> {
    if !record.active {
        return Err(BeliefError::InactiveRecord(record.id.0));
    }
    if !(0.0..=1.0).contains(&record.strength) {
        return Err(BeliefError::StrengthOutOfRange {
            id: record.id.0,
            strength: record.strength,
        });
    }
    Ok(contribution(
        record.polarity.sign(),
        record.strength,
        profile.weight(record.role),
    ))
}

/// `2 * sigmoid(L) - 1`, evaluated as `tanh(L / 2)`.
pub fn stance_from_log_odds(log_odds: f64) -> f64 {
    (0.5 * log_odds).tanh()
}

/// Inverse of [`stance_from_log_odds`]; rejects `|S| >= 1`.
pub fn log_odds_from_stance(stance: f64) -> Result<f64, BeliefError> {
    if !stance.is_finite() || stance.abs() >= 1.0 {
        return Err(BeliefError::StanceOutOfDomain(stance));
    }
    Ok(stance.ln_1p() - (-stance).ln_1p())
}

pub fn clip_stance(stance: f64, bound: f64) -> f64 {
    stance.clamp(-bound, bound)
}

/// Replay prior: `L0 = a * logit(clip(S_init))`.
pub fn init_prior_from_stance(
    initial_stance: f64,
    profile: &UaProfile,
    clip: f64,
) -> Result<BeliefState, BeliefError> {
    if !(clip > 0.0 && clip < 1.0) {
        return Err(BeliefError::InvalidClip(clip));
    }
    let logit = log_odds_from_stance(clip_stance(initial_stance, clip))?;
    Ok(BeliefState::from_log_odds(profile.anchoring() * logit))
}

/// Adds one newly admitted record to the running log-odds.
///
/// Only valid while nothing has been archived since the previous increment;
/// otherwise the caller has to go through [`compute_log_odds`].
pub fn update_incremental(
    state: &BeliefState,
    record: &ArgumentRecord,
    profile: &UaProfile,
    archived_since_last: bool,
) -> Result<BeliefState, BeliefError> {
    if archived_since_last {
        return Err(BeliefError::StaleIncrement);
    }
    let delta = record_contribution(record, profile)?;
    Ok(BeliefState::from_log_odds(state.log_odds + delta))
}
