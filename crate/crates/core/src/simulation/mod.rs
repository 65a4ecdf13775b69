//! Generated-agent experiments: seeding, scripted-opponent sweeps and
//! two-agent profile debates.

pub mod corpus;
pub mod metrics;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{compute_log_odds, contribution, stance_from_log_odds, UaProfile};
use crate::engine::{Agent, EngineConfig, EngineError, Ports};
use crate::extraction::{format_scripted_claim, Author, Message};
use crate::judgement::{score_strength, CandidateArgument, Polarity, Role};
use crate::trace::{EventPayload, TraceLog};

pub use metrics::{compute_metrics, trial_metrics, MetricSummary, MetricsError, TrialMetrics, TrialStances};

/// Seeding accepts a scaled stance within this distance of its target.
pub const SEED_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("need {needed} {polarity:?} seed claims, corpus has {available}")]
    NotEnoughSeeds {
        needed: usize,
        available: usize,
        polarity: Polarity,
    },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("invalid corpus: {0}")]
    Corpus(String),
    #[error("trial {trial}: {source}")]
    Engine {
        trial: usize,
        #[source]
        source: EngineError,
        /// Events recorded up to the failure.
        trace: Box<TraceLog>,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn engine_err(trial: usize, trace: &TraceLog) -> impl FnOnce(EngineError) -> SimulationError + '_ {
    move |source| SimulationError::Engine {
        trial,
        source,
        trace: Box::new(trace.clone()),
    }
}

/// Seed strength scale chosen by [`fit_seed_scale`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedScale {
    pub lambda: f64,
    /// Stance after seeding at `lambda`.
    pub stance: f64,
    /// Whether `stance` lies within [`SEED_TOLERANCE`] of the target.
    pub reached: bool,
}

/// Draws `n` claims of one polarity without replacement, preserving corpus
/// order.
pub fn select_seeds(
    corpus: &[CandidateArgument],
    polarity: Polarity,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<CandidateArgument>, SimulationError> {
    let pool: Vec<&CandidateArgument> = corpus.iter().filter(|c| c.polarity == polarity).collect();
    if pool.len() < n {
        return Err(SimulationError::NotEnoughSeeds {
            needed: n,
            available: pool.len(),
            polarity,
        });
    }
    let mut picked = index::sample(rng, pool.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|i| CandidateArgument {
            role: Role::Seed,
            ..pool[i].clone()
        })
        .collect())
}

/// Scores seed claims through the agent's scorer.
pub fn score_seeds(
    agent: &Agent,
    seeds: &[CandidateArgument],
) -> Result<Vec<(CandidateArgument, f64)>, EngineError> {
    seeds
        .iter()
        .map(|c| {
            let c = CandidateArgument {
                role: Role::Seed,
                ..c.clone()
            };
            let s = score_strength(&c, agent.topic(), agent.ports().scorer.as_ref())?;
            Ok((c, s))
        })
        .collect()
}

/// Finds one global scale `λ ∈ (0, 1]` for the seed strengths so that the
/// post-seeding stance hits `target`.
///
/// The seeds are judged once on a scratch copy of the agent; uniform scaling
/// does not change which of them survive deduplication. If the target lies
/// outside the range reachable on `(0, 1]`, `λ = 1`.
pub fn fit_seed_scale(
    agent: &Agent,
    scored: &[(CandidateArgument, f64)],
    target: f64,
) -> Result<SeedScale, EngineError> {
    let mut scratch = agent.clone();
    let first_new = scratch.memory().next_id();
    scratch.ingest_scored(scored, 0, &mut TraceLog::new())?;
    let profile = *agent.profile();
    let (mut base, mut batch) = (agent.prior_log_odds(), Vec::new());
    for r in scratch.memory().active() {
        if r.id >= first_new {
            batch.push((r.polarity.sign(), r.strength, profile.weight(r.role)));
        } else {
            base += compute_log_odds(std::iter::once(r), &profile)?;
        }
    }
    let stance_at = |lambda: f64| {
        let l: f64 = batch.iter().map(|&(p, s, g)| contribution(p, lambda * s, g)).sum();
        stance_from_log_odds(base + l)
    };

    let g1 = stance_at(1.0) - target;
    let g0 = stance_at(0.0) - target;
    let lambda = if g1 == 0.0 || (g0 != 0.0 && g0.signum() == g1.signum()) {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = stance_at(mid) - target;
            if g == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if g.signum() == g0.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo > 0.0 && (stance_at(lo) - target).abs() < (stance_at(hi) - target).abs() {
            lo
        } else {
            hi
        }
    };
    let stance = stance_at(lambda);
    Ok(SeedScale {
        lambda,
        stance,
        reached: (stance - target).abs() <= SEED_TOLERANCE,
    })
}

/// Ingests already-scored seeds at `lambda` times their strength, at order 0.
pub fn apply_seeds(
    agent: &mut Agent,
    scored: &[(CandidateArgument, f64)],
    scale: &SeedScale,
    target: f64,
    trace: &mut TraceLog,
) -> Result<(), EngineError> {
    if !scale.reached {
        trace.push(
            agent.id(),
            EventPayload::Warning {
                message: format!(
                    "seed target {target} unreachable; using lambda=1 (stance {})",
                    scale.stance
                ),
            },
        );
    }
    let scaled: Vec<_> = scored
        .iter()
        .map(|(c, s)| (c.clone(), (scale.lambda * s).clamp(0.0, 1.0)))
        .collect();
    agent.ingest_scored(&scaled, 0, trace)
}

/// Seeds an agent with the first `n` claims of `seeds`, scaled toward `target`.
pub fn seed_agent(
    agent: &mut Agent,
    seeds: &[CandidateArgument],
    n: usize,
    target: f64,
    trace: &mut TraceLog,
) -> Result<SeedScale, SimulationError> {
    if seeds.len() < n {
        return Err(SimulationError::NotEnoughSeeds {
            needed: n,
            available: seeds.len(),
            polarity: seeds.first().map_or(Polarity::Affirmative, |c| c.polarity),
        });
    }
    let run = |agent: &mut Agent, trace: &mut TraceLog| -> Result<SeedScale, EngineError> {
        let scored = score_seeds(agent, &seeds[..n])?;
        let scale = fit_seed_scale(agent, &scored, target)?;
        apply_seeds(agent, &scored, &scale, target, trace)?;
        Ok(scale)
    };
    run(agent, trace).map_err(|source| SimulationError::Engine {
        trial: 0,
        source,
        trace: Box::new(trace.clone()),
    })
}

fn trial_rng(base: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base.wrapping_add(trial as u64))
}

fn as_heard(msg: &Message) -> Message {
    Message {
        author: Author::Opponent,
        ..msg.clone()
    }
}

fn check_target(t: f64) -> Result<(), SimulationError> {
    if t.is_finite() && t.abs() <= 1.0 {
        Ok(())
    } else {
        Err(SimulationError::Config(format!("stance target {t} outside [-1, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Uptake,
    Anchoring,
}

impl SweepAxis {
    pub fn symbol(self) -> &'static str {
        match self {
            SweepAxis::Uptake => "u",
            SweepAxis::Anchoring => "a",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub topic: String,
    pub rounds: usize,
    pub seeds: usize,
    pub target: f64,
    pub u_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    /// Anchoring held fixed while sweeping uptake.
    pub fixed_a: f64,
    /// Uptake held fixed while sweeping anchoring.
    pub fixed_u: f64,
    pub trials: usize,
    pub rng_seed: u64,
    pub engine: EngineConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let grid = vec![0.2, 0.4, 0.6, 0.8, 1.0];
        SweepConfig {
            topic: corpus::BUNDLED_TOPIC.to_string(),
            rounds: 15,
            seeds: 10,
            target: 0.99,
            u_grid: grid.clone(),
            a_grid: grid,
            fixed_a: 0.70,
            fixed_u: 0.40,
            trials: 5,
            rng_seed: 0,
            engine: EngineConfig::sweep(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.u_grid.is_empty() || self.a_grid.is_empty() {
            return Err(SimulationError::Config("sweep grids must not be empty".into()));
        }
        for &v in self.u_grid.iter().chain(&self.a_grid).chain([&self.fixed_a, &self.fixed_u]) {
            UaProfile::new(v, v).map_err(|e| SimulationError::Config(e.to_string()))?;
        }
        if self.trials == 0 {
            return Err(SimulationError::Config("trials must be at least 1".into()));
        }
        check_target(self.target)?;
        self.engine
            .validate()
            .map_err(|e| SimulationError::Config(e.to_string()))
    }

    /// The profile seed strengths are fitted under.
    pub fn reference_profile(&self) -> UaProfile {
        UaProfile::new(self.fixed_u, self.fixed_a).expect("validated")
    }

    fn profile_for(&self, axis: SweepAxis, value: f64) -> UaProfile {
        match axis {
            SweepAxis::Uptake => UaProfile::new(value, self.fixed_a),
            SweepAxis::Anchoring => UaProfile::new(self.fixed_u, value),
        }
        .expect("validated")
    }

    fn grid(&self, axis: SweepAxis) -> &[f64] {
        match axis {
            SweepAxis::Uptake => &self.u_grid,
            SweepAxis::Anchoring => &self.a_grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub axis: SweepAxis,
    pub value: f64,
    pub trial: usize,
    pub lambda: f64,
    /// Stance after each round, starting with the post-seeding point.
    pub trajectory: Vec<f64>,
}

impl SweepRun {
    pub fn seeded_stance(&self) -> f64 {
        self.trajectory[0]
    }

    pub fn final_stance(&self) -> f64 {
        *self.trajectory.last().expect("trajectory is never empty")
    }

    pub fn label(&self) -> String {
        format!("{}={}_trial{}", self.axis.symbol(), self.value, self.trial)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub runs: Vec<SweepRun>,
    /// One trace per run, in the same order as `runs`.
    pub traces: Vec<TraceLog>,
}

impl SweepResult {
    /// Trial-averaged final stance per grid value, in grid order.
    pub fn final_means(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64, usize)> = Vec::new();
        for r in &self.runs {
            match out.iter_mut().find(|(v, _, _)| *v == r.value) {
                Some(slot) => {
                    slot.1 += r.final_stance();
                    slot.2 += 1;
                }
                None => out.push((r.value, r.final_stance(), 1)),
            }
        }
        out.into_iter().map(|(v, s, n)| (v, s / n as f64)).collect()
    }
}

/// Single pro agent against a fixed all-con script.
///
/// Seed strengths are fitted once per trial under the reference profile and
/// then held fixed across the grid, so the swept parameter is the only thing
/// that differs between runs of the same trial.
pub fn run_scripted_opponent_sweep(
    config: &SweepConfig,
    axis: SweepAxis,
    seed_corpus: &[CandidateArgument],
    opponent: &[CandidateArgument],
    ports: &Ports,
) -> Result<SweepResult, SimulationError> {
    config.validate()?;
    if opponent.is_empty() {
        return Err(SimulationError::Corpus("opponent script has no claims".into()));
    }
    let mut runs = Vec::new();
    let mut traces = Vec::new();
    for trial in 0..config.trials {
        let mut rng = trial_rng(config.rng_seed, trial);
        let seeds = select_seeds(seed_corpus, Polarity::Affirmative, config.seeds, &mut rng)?;
        let reference = Agent::new(
            "agent",
            &config.topic,
            config.reference_profile(),
            config.engine.clone(),
            ports.clone(),
        )
        .map_err(|e| SimulationError::Config(e.to_string()))?;
        let scratch = TraceLog::new();
        let scored = score_seeds(&reference, &seeds).map_err(engine_err(trial, &scratch))?;
        let scale = fit_seed_scale(&reference, &scored, config.target).map_err(engine_err(trial, &scratch))?;

        for &value in config.grid(axis) {
            let mut trace = TraceLog::new();
            let mut agent = Agent::new(
                "agent",
                &config.topic,
                config.profile_for(axis, value),
                config.engine.clone(),
                ports.clone(),
            )
            .map_err(|e| SimulationError::Config(e.to_string()))?;
            let result = (|| {
                apply_seeds(&mut agent, &scored, &scale, config.target, &mut trace)?;
                let mut trajectory = vec![agent.stance()];
                for round in 1..=config.rounds as u64 {
                    agent.speak(2 * round - 1, &mut trace)?;
                    let c = &opponent[(round as usize - 1) % opponent.len()];
                    let hint = c.strength_hint.unwrap_or(0.5);
                    let line = format_scripted_claim(c.polarity, hint, &c.claim);
                    agent.process_message(&Message::new(line, Author::Opponent, 2 * round), &mut trace)?;
                    trajectory.push(agent.stance());
                }
                Ok(trajectory)
            })();
            let trajectory = result.map_err(engine_err(trial, &trace))?;
            runs.push(SweepRun {
                axis,
                value,
                trial,
                lambda: scale.lambda,
                trajectory,
            });
            traces.push(trace);
        }
    }
    Ok(SweepResult { axis, runs, traces })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebateConfig {
    pub topic: String,
    pub rounds: usize,
    pub seeds_per_side: usize,
    pub pro: UaProfile,
    pub con: UaProfile,
    pub pro_target: f64,
    pub con_target: f64,
    pub trials: usize,
    pub rng_seed: u64,
    pub engine: EngineConfig,
}

impl Default for DebateConfig {
    fn default() -> Self {
        DebateConfig {
            topic: corpus::BUNDLED_TOPIC.to_string(),
            rounds: 15,
            seeds_per_side: 10,
            pro: UaProfile::OPEN_MINDED,
            con: UaProfile::OPEN_MINDED,
            pro_target: 0.75,
            con_target: -0.75,
            trials: 3,
            rng_seed: 0,
            engine: EngineConfig::default(),
        }
    }
}

impl DebateConfig {
    /// Zero rounds is allowed: the result then holds only the seeded state.
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.trials == 0 {
            return Err(SimulationError::Config("trials must be at least 1".into()));
        }
        check_target(self.pro_target)?;
        check_target(self.con_target)?;
        self.engine
            .validate()
            .map_err(|e| SimulationError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct DebateTrial {
    pub trial: usize,
    pub pro_scale: SeedScale,
    pub con_scale: SeedScale,
    /// Stance after each round; index 0 is the post-seeding point.
    pub pro_series: Vec<f64>,
    pub con_series: Vec<f64>,
    pub trace: TraceLog,
}

impl DebateTrial {
    pub fn stances(&self) -> TrialStances {
        TrialStances {
            pro_init: self.pro_series[0],
            con_init: self.con_series[0],
            pro_final: *self.pro_series.last().expect("non-empty"),
            con_final: *self.con_series.last().expect("non-empty"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DebateResult {
    pub trials: Vec<DebateTrial>,
    pub summary: MetricSummary,
}

/// Runs one turn: the speaker composes, the listener hears it, then the
/// speaker stores its own claims.
fn turn(
    speaker: &mut Agent,
    listener: &mut Agent,
    order: u64,
    trace: &mut TraceLog,
) -> Result<(), EngineError> {
    let msg = speaker.compose_response(order, trace)?;
    listener.process_message(&as_heard(&msg), trace)?;
    speaker.process_message(&msg, trace)
}

/// Symmetric two-agent debate, pro speaking first in every round.
pub fn run_two_agent_debate(
    config: &DebateConfig,
    seed_corpus: &[CandidateArgument],
    ports: &Ports,
) -> Result<DebateResult, SimulationError> {
    config.validate()?;
    let mut trials = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let mut rng = trial_rng(config.rng_seed, trial);
        let pro_seeds = select_seeds(seed_corpus, Polarity::Affirmative, config.seeds_per_side, &mut rng)?;
        let con_seeds = select_seeds(seed_corpus, Polarity::Negative, config.seeds_per_side, &mut rng)?;
        let make = |id: &str, profile: UaProfile| {
            Agent::new(id, &config.topic, profile, config.engine.clone(), ports.clone())
                .map_err(|e| SimulationError::Config(e.to_string()))
        };
        let mut pro = make("pro", config.pro)?;
        let mut con = make("con", config.con)?;
        let mut trace = TraceLog::new();
        let result = (|| {
            let seed = |agent: &mut Agent, seeds: &[CandidateArgument], target: f64, trace: &mut TraceLog| {
                let scored = score_seeds(agent, seeds)?;
                let scale = fit_seed_scale(agent, &scored, target)?;
                apply_seeds(agent, &scored, &scale, target, trace)?;
                Ok::<_, EngineError>(scale)
            };
            let pro_scale = seed(&mut pro, &pro_seeds, config.pro_target, &mut trace)?;
            let con_scale = seed(&mut con, &con_seeds, config.con_target, &mut trace)?;
            let mut pro_series = vec![pro.stance()];
            let mut con_series = vec![con.stance()];
            for round in 1..=config.rounds as u64 {
                turn(&mut pro, &mut con, 2 * round - 1, &mut trace)?;
                turn(&mut con, &mut pro, 2 * round, &mut trace)?;
                pro_series.push(pro.stance());
                con_series.push(con.stance());
            }
            Ok((pro_scale, con_scale, pro_series, con_series))
        })();
        let (pro_scale, con_scale, pro_series, con_series) = result.map_err(engine_err(trial, &trace))?;
        trials.push(DebateTrial {
            trial,
            pro_scale,
            con_scale,
            pro_series,
            con_series,
            trace,
        });
    }
    let stances: Vec<_> = trials.iter().map(DebateTrial::stances).collect();
    let summary = compute_metrics(&stances)?;
    Ok(DebateResult { trials, summary })
}

/// The four (pro, con) profile pairings, labelled `pro/con`.
pub fn default_pairings() -> Vec<(String, UaProfile, UaProfile)> {
    let named = [("Open", UaProfile::OPEN_MINDED), ("Stubborn", UaProfile::STUBBORN)];
    let mut out = Vec::new();
    for (pn, p) in named {
        for (cn, c) in named {
            out.push((format!("{pn}/{cn}"), p, c));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PairingResult {
    pub label: String,
    pub pro: UaProfile,
    pub con: UaProfile,
    pub result: DebateResult,
}

/// Runs the debate once per pairing, with everything else from `base`.
pub fn run_profile_grid(
    base: &DebateConfig,
    pairings: &[(String, UaProfile, UaProfile)],
    seed_corpus: &[CandidateArgument],
    ports: &Ports,
) -> Result<Vec<PairingResult>, SimulationError> {
    pairings
        .iter()
        .map(|(label, pro, con)| {
            let config = DebateConfig {
                pro: *pro,
                con: *con,
                ..base.clone()
            };
            Ok(PairingResult {
                label: label.clone(),
                pro: *pro,
                con: *con,
                result: run_two_agent_debate(&config, seed_corpus, ports)?,
            })
        })
        .collect()
}
