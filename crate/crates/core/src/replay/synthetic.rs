//! Synthetic replay populations with known generating profiles.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::belief::UaProfile;
use crate::engine::Ports;
use crate::judgement::Polarity;

use super::{predict, prepare_case, EvidenceItem, ReplayCase, ReplayError, ReplaySettings, StanceReport};

const WORDS: &[&str] = &[
    "ballot", "turnout", "fine", "duty", "freedom", "poll", "citizen", "council", "budget", "queue", "postal",
    "rural", "youth", "pension", "tax", "habit", "trust", "media", "party", "courts", "school", "weekend", "rent",
    "wage", "clinic", "island", "harbour", "railway", "forest", "market", "museum", "library", "bridge", "village",
    "festival", "garden", "factory", "choir", "lantern", "orchard", "quarry", "meadow", "canal", "glacier", "volcano",
    "puzzle", "violin", "kettle", "saddle", "compass",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub cases: usize,
    pub groups: usize,
    pub topics: usize,
    pub min_items: usize,
    pub max_items: usize,
    /// Probability that an item points in the case's dominant direction.
    pub bias: f64,
    pub seed: u64,
    pub id_prefix: String,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            cases: 400,
            groups: 40,
            topics: 8,
            min_items: 4,
            max_items: 10,
            bias: 0.8,
            seed: 7,
            id_prefix: "p".into(),
        }
    }
}

/// How a synthetic participant's final stance is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Response {
    /// Replay prediction at `profile`, plus Gaussian noise, clamped to [−1, 1].
    Replay { profile: UaProfile, noise_sd: f64 },
    /// Final Likert equals initial Likert.
    Stable,
    /// Moves by the replay prediction's shift, in the opposite direction.
    Opposed { profile: UaProfile },
}

fn claim_text(rng: &mut ChaCha8Rng) -> String {
    (0..6).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// Generates cases with interior initial Likert values (2..=5) and scored,
/// pre-extracted evidence.
pub fn generate(
    spec: &PopulationSpec,
    response: Response,
    ports: &Ports,
    settings: &ReplaySettings,
) -> Result<Vec<ReplayCase>, ReplayError> {
    if spec.groups == 0 || spec.topics == 0 || spec.min_items > spec.max_items {
        return Err(ReplayError::Spec("needs groups, topics and min_items <= max_items".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = match response {
        Response::Replay { noise_sd, .. } if noise_sd > 0.0 => {
            Some(Normal::new(0.0, noise_sd).map_err(|e| ReplayError::Spec(e.to_string()))?)
        }
        _ => None,
    };
    let mut out = Vec::with_capacity(spec.cases);
    for i in 0..spec.cases {
        let g = i % spec.groups;
        let initial = rng.gen_range(2u8..=5);
        let direction = if rng.gen_bool(0.5) {
            Polarity::Affirmative
        } else {
            Polarity::Negative
        };
        let n_items = rng.gen_range(spec.min_items..=spec.max_items);
        let evidence = (0..n_items)
            .map(|j| {
                let polarity = if rng.gen_bool(spec.bias) {
                    direction
                } else {
                    direction.opposite()
                };
                let strength = rng.gen_range(0.3..=1.0);
                EvidenceItem::scored(j as u64 + 1, claim_text(&mut rng), polarity, strength)
            })
            .collect();
        let mut case = ReplayCase {
            participant: format!("{}{i:04}", spec.id_prefix),
            group: format!("g{g:02}"),
            topic: format!("t{}", g % spec.topics),
            initial: StanceReport::Likert(initial),
            final_report: StanceReport::Likert(initial),
            evidence,
        };
        case.final_report = match response {
            Response::Stable => StanceReport::Likert(initial),
            Response::Replay { profile, .. } => {
                let judged = prepare_case(&case, ports, settings)?;
                let mut s = predict(&judged, &profile)?;
                if let Some(n) = &noise {
                    s += n.sample(&mut rng);
                }
                StanceReport::Continuous(s.clamp(-1.0, 1.0))
            }
            Response::Opposed { profile } => {
                let judged = prepare_case(&case, ports, settings)?;
                let shift = predict(&judged, &profile)? - judged.initial;
                StanceReport::Continuous((judged.initial - shift).clamp(-1.0, 1.0))
            }
        };
        out.push(case);
    }
    Ok(out)
}

/// 40% evidence-aligned high-uptake movers, 30% stable, 30% anti-evidence
/// movers, sharing one set of group keys.
pub fn mixed_population(
    cases: usize,
    seed: u64,
    ports: &Ports,
    settings: &ReplaySettings,
) -> Result<Vec<ReplayCase>, ReplayError> {
    let high = UaProfile::new(0.6, 1.0).expect("valid profile");
    let n_aligned = cases * 4 / 10;
    let n_stable = cases * 3 / 10;
    let parts = [
        (n_aligned, Response::Replay { profile: high, noise_sd: 0.02 }, "aligned"),
        (n_stable, Response::Stable, "stable"),
        (cases - n_aligned - n_stable, Response::Opposed { profile: high }, "opposed"),
    ];
    let mut out = Vec::with_capacity(cases);
    for (k, (n, response, prefix)) in parts.into_iter().enumerate() {
        let spec = PopulationSpec {
            cases: n,
            seed: seed.wrapping_add(k as u64),
            id_prefix: format!("{prefix}-"),
            ..PopulationSpec::default()
        };
        out.extend(generate(&spec, response, ports, settings)?);
    }
    Ok(out)
}
