//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use belief_engine::belief::{
    compute_log_odds, init_prior_from_stance, stance_from_log_odds, update_incremental, BeliefState,
};
use belief_engine::engine::{Agent, EngineConfig, Ports};
use belief_engine::judgement::{CandidateArgument, Polarity, RecordId, Role};
use belief_engine::memory::{allocate_slots, MemoryStore};
use belief_engine::replay::synthetic::{generate, mixed_population, PopulationSpec, Response};
use belief_engine::replay::{
    assign_folds, calibrate, calibrate_by_subgroup, fit_linear_baseline, likert_to_stance, prepare_case,
    replay_case, summarize, CalibrationGrid, EvidenceItem, JudgedCase, ReplayCase, ReplaySettings, StanceReport,
    Subgroup, DEFAULT_EPS_WEAK,
};
use belief_engine::simulation::corpus::{bundled_opponent, bundled_seeds};
use belief_engine::simulation::metrics::{compute_metrics, trial_metrics, TrialStances};
use belief_engine::simulation::{
    default_pairings, run_profile_grid, run_scripted_opponent_sweep, DebateConfig, SweepAxis, SweepConfig,
};
use belief_engine::{verify_trace, TraceLog, UaProfile};

use common::*;

const LOG_ODDS_TOL: f64 = 1e-10;
const TANH_TOL: f64 = 1e-12;
const INCREMENTAL_TOL: f64 = 1e-12;
const GAP_IDENTITY_TOL: f64 = 1e-12;
const METRIC_TOL: f64 = 1e-12;
/// Table rows are printed to two decimals.
const TABLE_ROUNDING: f64 = 0.005;
const RECOVERY_TOL: f64 = 1e-12;
const STABLE_RMSE_MAX: f64 = 0.01;
/// Lower edge of the "high uptake" region of the calibration grid.
const HIGH_UPTAKE: f64 = 0.4;
const BETA_TOL: f64 = 1e-8;
const DEDUP_LOG_ODDS_TOL: f64 = 1e-10;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("{what} took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn random_role(rng: &mut ChaCha8Rng) -> Role {
    [Role::Seed, Role::Opponent, Role::SelfAuthored][rng.gen_range(0..3)]
}

fn random_polarity(rng: &mut ChaCha8Rng) -> Polarity {
    if rng.gen_bool(0.5) {
        Polarity::Affirmative
    } else {
        Polarity::Negative
    }
}

// 1
fn update_rule_exactness() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for set in 0..1000 {
        let u = rng.gen_range(0.0..=1.0);
        let a = rng.gen_range(0.0..=1.5);
        let profile = UaProfile::new(u, a).unwrap();
        let n = rng.gen_range(0..=50);
        let records: Vec<_> = (0..n)
            .map(|i| record(i, random_polarity(&mut rng), rng.gen_range(0.0..=1.0), random_role(&mut rng)))
            .collect();
        let items: Vec<_> = records
            .iter()
            .map(|r| (r.polarity.sign(), r.strength, r.role == Role::Seed))
            .collect();
        let got = compute_log_odds(&records, &profile).map_err(|e| e.to_string())?;
        let want = oracle_log_odds(&items, u, a);
        let err = (got - want).abs().max((stance_from_log_odds(got) - oracle_stance(want)).abs());
        worst = worst.max(err);
        ensure(err <= LOG_ODDS_TOL, || format!("set {set}: engine {got} vs oracle {want}"))?;
    }
    for i in 0..=4000 {
        let l = -40.0 + i as f64 * 0.02;
        let logistic = 2.0 / (1.0 + (-l).exp()) - 1.0;
        let err = (stance_from_log_odds(l) - logistic).abs();
        ensure(err <= TANH_TOL, || format!("tanh identity off by {err} at L={l}"))?;
    }
    let took = within(start, Duration::from_secs(5), "1000 sets")?;
    Ok(format!("max error {worst:.1e}, {took:.2?}"))
}

// 2
fn batch_incremental_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for seq in 0..200 {
        let profile = UaProfile::new(rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.5)).unwrap();
        let mut memory = MemoryStore::new();
        let mut state = BeliefState::default();
        for i in 0..rng.gen_range(1..=60) {
            let r = record(i, random_polarity(&mut rng), rng.gen_range(0.0..=1.0), random_role(&mut rng));
            memory.insert(r.clone()).map_err(|e| e.to_string())?;
            state = update_incremental(&state, &r, &profile, false).map_err(|e| e.to_string())?;
            let batch = compute_log_odds(memory.active(), &profile).map_err(|e| e.to_string())?;
            let err = (state.log_odds() - batch).abs();
            worst = worst.max(err);
            ensure(err <= INCREMENTAL_TOL, || format!("sequence {seq} step {i}: {} vs {batch}", state.log_odds()))?;
        }
    }
    Ok(format!("max error {worst:.1e}"))
}

// 3
fn monotone_control(traces: &mut Vec<(String, TraceLog)>) -> Check {
    let start = Instant::now();
    let config = SweepConfig::default();
    let ports = Ports::default();
    let (seeds, opponent) = (bundled_seeds(), bundled_opponent());
    let u = run_scripted_opponent_sweep(&config, SweepAxis::Uptake, &seeds, &opponent, &ports).map_err(|e| e.to_string())?;
    let a =
        run_scripted_opponent_sweep(&config, SweepAxis::Anchoring, &seeds, &opponent, &ports).map_err(|e| e.to_string())?;
    let took = within(start, Duration::from_secs(1), "both sweeps")?;
    let u_means = u.final_means();
    let a_means = a.final_means();
    ensure(u_means.windows(2).all(|w| w[1].1 < w[0].1), || format!("u sweep not decreasing: {u_means:?}"))?;
    ensure(a_means.windows(2).all(|w| w[1].1 > w[0].1), || format!("a sweep not increasing: {a_means:?}"))?;
    for r in [u, a] {
        for (run, trace) in r.runs.iter().zip(r.traces) {
            traces.push((format!("sweep {}", run.label()), trace));
        }
    }
    let fmt = |m: &[(f64, f64)]| m.iter().map(|(_, s)| format!("{s:+.3}")).collect::<Vec<_>>().join(" ");
    Ok(format!("u: {} | a: {} | {took:.2?}", fmt(&u_means), fmt(&a_means)))
}

fn random_case(rng: &mut ChaCha8Rng, id: usize) -> ReplayCase {
    let report = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            StanceReport::Likert(rng.gen_range(1..=6))
        } else {
            StanceReport::Continuous(rng.gen_range(-1.0..=1.0))
        }
    };
    let n = rng.gen_range(0..=12);
    let evidence = (0..n)
        .map(|j| {
            let words: Vec<usize> = (0..3).map(|_| rng.gen_range(0..CLAIM_WORDS.len())).collect();
            EvidenceItem::scored(j + 1, claim_from(&words), random_polarity(rng), rng.gen_range(0.0..=1.0))
        })
        .collect();
    ReplayCase {
        participant: format!("c{id}"),
        group: "g".into(),
        topic: "t".into(),
        initial: report(rng),
        final_report: report(rng),
        evidence,
    }
}

// 4
fn inertness_and_neutrality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ports = Ports::default();
    let settings = ReplaySettings::default();
    for i in 0..100 {
        let case = random_case(&mut rng, i);
        let profile = UaProfile::new(0.0, rng.gen_range(0.0..=1.5)).unwrap();
        let prior = init_prior_from_stance(case.initial_stance(), &profile, settings.clip).map_err(|e| e.to_string())?;
        let replayed = replay_case(&case, &profile, &ports, &settings, &mut TraceLog::new()).map_err(|e| e.to_string())?;
        ensure(replayed == prior.stance(), || format!("stream {i}: u=0 moved {} to {replayed}", prior.stance()))?;

        // a = 0 with seeds only
        let seeds: Vec<(CandidateArgument, f64)> = (0..rng.gen_range(1..=20))
            .map(|j| {
                let c = CandidateArgument::new(format!("seed {i} {j}"), random_polarity(&mut rng), Role::Seed).unwrap();
                (c, rng.gen_range(0.0..=1.0))
            })
            .collect();
        let profile = UaProfile::new(rng.gen_range(0.0..=1.0), 0.0).unwrap();
        let mut agent =
            Agent::new("a", "t", profile, EngineConfig::default(), ports.clone()).map_err(|e| e.to_string())?;
        agent.ingest_scored(&seeds, 0, &mut TraceLog::new()).map_err(|e| e.to_string())?;
        ensure(agent.stance() == 0.0, || format!("stream {i}: a=0 gave stance {}", agent.stance()))?;
    }
    Ok("100 streams exact".into())
}

struct Step {
    claim: String,
    polarity: Polarity,
    strength: f64,
    role: Role,
}

fn random_steps(rng: &mut ChaCha8Rng, roles: &[Role]) -> Vec<Step> {
    (0..rng.gen_range(1..=25))
        .map(|_| {
            let words: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..6)).collect();
            Step {
                claim: claim_from(&words),
                polarity: random_polarity(rng),
                strength: [0.3, 0.5, 0.7, 0.9][rng.gen_range(0..4)],
                role: roles[rng.gen_range(0..roles.len())],
            }
        })
        .collect()
}

fn ingest_all(agent: &mut Agent, steps: &[&Step]) -> Result<(), String> {
    for (i, s) in steps.iter().enumerate() {
        let c = CandidateArgument::new(s.claim.as_str(), s.polarity, s.role).map_err(|e| e.to_string())?;
        agent
            .ingest_scored(&[(c, s.strength)], i as u64 + 1, &mut TraceLog::new())
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn active_signature(agent: &Agent) -> Vec<(String, i64, u64, Role)> {
    agent
        .memory()
        .active()
        .map(|r| (r.claim.clone(), r.polarity.value(), r.strength.to_bits(), r.role))
        .collect()
}

// 5
fn dedup_semantics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ports = Ports::default();
    let all_roles = [Role::Seed, Role::Opponent, Role::SelfAuthored];
    let mut archived_total = 0usize;
    for scenario in 0..500 {
        let (theta, theta_self) = match scenario % 3 {
            0 => (0.60, 0.45),
            1 => (0.80, 0.50),
            _ => (rng.gen_range(0.3..=1.0), rng.gen_range(0.3..=1.0)),
        };
        let config = EngineConfig {
            theta,
            theta_self,
            ..EngineConfig::default()
        };
        let profile = UaProfile::new(rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)).unwrap();
        let fresh = || Agent::new("a", "t", profile, config.clone(), ports.clone()).map_err(|e| e.to_string());
        let steps = random_steps(&mut rng, &all_roles);

        // pairwise oracle, step by step
        let mut agent = fresh()?;
        let mut oracle = OracleStore::default();
        let mut ever_archived = BTreeSet::new();
        for (i, s) in steps.iter().enumerate() {
            ingest_all(&mut agent, &[s]).map_err(|e| format!("scenario {scenario}: {e}"))?;
            oracle.insert(s.polarity, s.strength, s.role, ports.embedder.embed(&s.claim), theta, theta_self);
            let records = agent.memory().records();
            for (j, (got, want)) in records.iter().zip(&oracle.records).enumerate() {
                let by = got.archived_by.map(|RecordId(b)| b as usize);
                ensure(got.active == want.active && by == want.archived_by, || {
                    format!("scenario {scenario} step {i}: record {j} is ({}, {by:?}), oracle ({}, {:?})", got.active, want.active, want.archived_by)
                })?;
                if !got.active {
                    ever_archived.insert(j);
                }
            }
            for &j in &ever_archived {
                ensure(!records[j].active, || format!("scenario {scenario}: archived record {j} re-entered"))?;
            }
            let want = oracle.log_odds(profile.uptake(), profile.anchoring());
            ensure((agent.belief().log_odds() - want).abs() <= DEDUP_LOG_ODDS_TOL, || {
                format!("scenario {scenario} step {i}: log-odds {} vs oracle {want}", agent.belief().log_odds())
            })?;
        }
        archived_total += ever_archived.len();

        // stronger record survives; ties keep the existing one
        let records = agent.memory().records();
        for r in records.iter().filter(|r| !r.active) {
            let by = &records[r.archived_by.expect("archived records name their replacement").0 as usize];
            let ok = if by.id > r.id { by.strength > r.strength } else { by.strength >= r.strength };
            ensure(ok, || format!("scenario {scenario}: record {} ({}) lost to {} ({})", r.id, r.strength, by.id, by.strength))?;
        }

        // polarity isolation
        for polarity in [Polarity::Affirmative, Polarity::Negative] {
            let mut alone = fresh()?;
            let subset: Vec<&Step> = steps.iter().filter(|s| s.polarity == polarity).collect();
            ingest_all(&mut alone, &subset)?;
            let mixed: Vec<_> = active_signature(&agent).into_iter().filter(|s| s.1 == polarity.value()).collect();
            ensure(active_signature(&alone) == mixed, || format!("scenario {scenario}: {polarity:?} side depends on the other side"))?;
        }

        // idempotence on duplicate insertion, uniform comparison pool
        let uniform = random_steps(&mut rng, &[Role::Seed, Role::Opponent]);
        let once: Vec<&Step> = uniform.iter().collect();
        let twice: Vec<&Step> = uniform.iter().flat_map(|s| [s, s]).collect();
        let (mut a1, mut a2) = (fresh()?, fresh()?);
        ingest_all(&mut a1, &once)?;
        ingest_all(&mut a2, &twice)?;
        ensure(
            active_signature(&a1) == active_signature(&a2) && a1.belief() == a2.belief(),
            || format!("scenario {scenario}: duplicate insertion changed the state"),
        )?;

        // explicit tie
        let mut tie = fresh()?;
        let dup = Step {
            claim: "fines raise turnout".into(),
            polarity: Polarity::Negative,
            strength: 0.5,
            role: Role::Opponent,
        };
        ingest_all(&mut tie, &[&dup, &dup])?;
        let r = tie.memory().records();
        ensure(r[0].active && !r[1].active && r[1].archived_by == Some(r[0].id), || "tie did not keep the existing record".into())?;
    }
    Ok(format!("500 scenarios, {archived_total} archivals cross-checked"))
}

// 6
fn retrieval_allocation() -> Check {
    let start = Instant::now();
    let mut cases = 0;
    for n_plus in 0..=20 {
        for n_minus in 0..=20 {
            for k in 1..=8 {
                let (kp, km) = allocate_slots(k, n_plus, n_minus);
                ensure(kp + km == k, || format!("{kp}+{km} != {k}"))?;
                ensure((kp, km) == oracle_allocation(k, n_plus, n_minus), || {
                    format!("k={k} n+={n_plus} n-={n_minus}: got ({kp}, {km})")
                })?;
                cases += 1;
            }
        }
    }
    let empty = MemoryStore::new();
    for k in 1..=8 {
        let ctx = empty.retrieve(k).map_err(|e| e.to_string())?;
        ensure(ctx.k_plus == k.div_ceil(2) && ctx.k_minus == k / 2 && ctx.records.is_empty(), || {
            format!("empty memory, k={k}: ({}, {})", ctx.k_plus, ctx.k_minus)
        })?;
    }
    let took = within(start, Duration::from_secs(1), "exhaustive allocation")?;
    Ok(format!("{cases} combinations, {took:.2?}"))
}

// 7
fn profile_ordering(traces: &mut Vec<(String, TraceLog)>) -> Check {
    let base = DebateConfig {
        seeds_per_side: 12,
        trials: 3,
        ..DebateConfig::default()
    };
    let grid = run_profile_grid(&base, &default_pairings(), &bundled_seeds(), &Ports::default())
        .map_err(|e| e.to_string())?;
    let by_label: BTreeMap<&str, _> = grid.iter().map(|p| (p.label.as_str(), &p.result)).collect();
    let gaps = |label: &str| -> Vec<f64> {
        by_label[label]
            .trials
            .iter()
            .map(|t| trial_metrics(&t.stances()).abs_final_gap)
            .collect()
    };
    let (ss, so, oo) = (gaps("Stubborn/Stubborn"), gaps("Stubborn/Open"), gaps("Open/Open"));
    for t in 0..3 {
        ensure(ss[t] > so[t] && so[t] > oo[t], || {
            format!("trial {t}: SS {:.3} SO {:.3} OO {:.3}", ss[t], so[t], oo[t])
        })?;
    }
    for p in &grid {
        for t in &p.result.trials {
            let m = trial_metrics(&t.stances());
            let err = (m.gap_reduction + m.abs_final_gap - 1.5).abs();
            ensure(err <= GAP_IDENTITY_TOL, || format!("{} trial {}: identity off by {err:e}", p.label, t.trial))?;
        }
    }
    for p in grid {
        for t in p.result.trials {
            traces.push((format!("debate {} trial {}", p.label, t.trial), t.trace));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(format!("mean final gap SS {:.3} > SO {:.3} > OO {:.3}", mean(&ss), mean(&so), mean(&oo)))
}

// 8
fn metric_arithmetic() -> Check {
    let t = |pro_final, con_final| TrialStances {
        pro_init: 0.75,
        con_init: -0.75,
        pro_final,
        con_final,
    };
    // three trials whose averages land on the social-media row
    let row = compute_metrics(&[t(0.18, 0.30), t(0.45, -0.06), t(0.45, -0.06)]).map_err(|e| e.to_string())?;
    ensure((row.gap_reduction - 1.12).abs() <= METRIC_TOL, || format!("gap reduction {}", row.gap_reduction))?;
    ensure((row.abs_final_gap - 0.38).abs() <= METRIC_TOL, || format!("final gap {}", row.abs_final_gap))?;
    for (name, got, want) in [
        ("final pro", row.final_pro, 0.36),
        ("final con", row.final_con, 0.06),
        ("mean abs shift", row.mean_abs_shift, 0.60),
        ("centre shift", row.centre_shift, 0.60),
        ("crossing rate", row.crossing_rate, 0.33),
    ] {
        ensure((got - want).abs() < TABLE_ROUNDING, || format!("{name}: {got} vs {want}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut trials = Vec::new();
    for i in 0..1000 {
        let trial = TrialStances {
            pro_init: rng.gen_range(-1.0..=1.0),
            con_init: rng.gen_range(-1.0..=1.0),
            pro_final: rng.gen_range(-1.0..=1.0),
            con_final: rng.gen_range(-1.0..=1.0),
        };
        let m = trial_metrics(&trial);
        ensure(m.mean_abs_shift >= m.centre_shift.abs(), || format!("trial {i}: {m:?}"))?;
        trials.push(trial);
    }
    let s = compute_metrics(&trials).map_err(|e| e.to_string())?;
    ensure(s.mean_abs_shift >= s.centre_shift.abs(), || format!("summary: {s:?}"))?;
    Ok(format!("gap reduction {:.2}, 1000 random trials", row.gap_reduction))
}

fn judged(cases: &[ReplayCase], ports: &Ports, settings: &ReplaySettings) -> Result<Vec<JudgedCase>, String> {
    cases
        .iter()
        .map(|c| prepare_case(c, ports, settings).map_err(|e| e.to_string()))
        .collect()
}

// 9
fn calibration_recovery() -> Check {
    let start = Instant::now();
    let ports = Ports::default();
    let settings = ReplaySettings::default();
    let truth = UaProfile::new(0.15, 0.5).unwrap();
    let grid = CalibrationGrid::default();

    let exact = generate(&PopulationSpec::default(), Response::Replay { profile: truth, noise_sd: 0.0 }, &ports, &settings)
        .map_err(|e| e.to_string())?;
    ensure(exact.len() == 400, || format!("{} cases", exact.len()))?;
    // generation goes through predict; spot-check it against the agent path
    for c in exact.iter().take(20) {
        let r = replay_case(c, &truth, &ports, &settings, &mut TraceLog::new()).map_err(|e| e.to_string())?;
        ensure(r == c.final_stance(), || format!("{}: replay {r} vs generated {}", c.participant, c.final_stance()))?;
    }
    let j = judged(&exact, &ports, &settings)?;
    let keys: Vec<&str> = exact.iter().map(|c| c.group.as_str()).collect();
    let report = calibrate(&j, &keys, &grid, 5, 42).map_err(|e| e.to_string())?;
    ensure(report.folds.len() == 5, || format!("{} folds", report.folds.len()))?;
    for f in &report.folds {
        ensure((f.u, f.a) == (0.15, 0.5) && f.heldout_rmse <= RECOVERY_TOL, || {
            format!("fold {}: selected ({}, {}), held-out RMSE {}", f.fold, f.u, f.a, f.heldout_rmse)
        })?;
    }

    let noisy = generate(&PopulationSpec::default(), Response::Replay { profile: truth, noise_sd: 0.05 }, &ports, &settings)
        .map_err(|e| e.to_string())?;
    let j = judged(&noisy, &ports, &settings)?;
    let mean_delta = j.iter().map(|c| c.delta().abs()).sum::<f64>() / j.len() as f64;
    ensure(mean_delta > 0.1, || format!("mean |Δ| {mean_delta}"))?;
    let keys: Vec<&str> = noisy.iter().map(|c| c.group.as_str()).collect();
    let report = calibrate(&j, &keys, &grid, 5, 42).map_err(|e| e.to_string())?;
    let wins = report.folds.iter().filter(|f| f.heldout_rmse < f.no_change_rmse).count();
    ensure(wins >= 4, || format!("BE beat no-change in {wins} of 5 folds"))?;
    let took = within(start, Duration::from_secs(30), "calibration recovery")?;
    Ok(format!("exact in 5/5 folds; noisy: BE < no-change in {wins}/5, mean |Δ| {mean_delta:.3}, {took:.2?}"))
}

// 10
fn subgroup_discrimination() -> Check {
    let ports = Ports::default();
    let settings = ReplaySettings::default();
    let grid = CalibrationGrid::default();
    let cases = mixed_population(400, 11, &ports, &settings).map_err(|e| e.to_string())?;
    let j = judged(&cases, &ports, &settings)?;
    let keys: Vec<&str> = cases.iter().map(|c| c.group.as_str()).collect();
    let pooled = calibrate(&j, &keys, &grid, 5, 42).map_err(|e| e.to_string())?;
    let subs = calibrate_by_subgroup(&j, &keys, &grid, 5, 42, DEFAULT_EPS_WEAK).map_err(|e| e.to_string())?;
    let report = |g: Subgroup| {
        subs.iter()
            .find(|s| s.subgroup == g)
            .and_then(|s| s.report.as_ref())
            .ok_or_else(|| format!("no calibration for {}", g.label()))
    };
    let aligned = report(Subgroup::Aligned)?;
    let stable = report(Subgroup::Stable)?;
    ensure(aligned.folds.iter().all(|f| f.u >= HIGH_UPTAKE), || {
        format!("aligned u*: {:?}", aligned.folds.iter().map(|f| f.u).collect::<Vec<_>>())
    })?;
    ensure(stable.folds.iter().all(|f| f.u == grid.u[0]), || {
        format!("stable u*: {:?}", stable.folds.iter().map(|f| f.u).collect::<Vec<_>>())
    })?;
    let rows = summarize(&j, &pooled, &subs);
    let row = |g: Subgroup| rows.iter().find(|r| r.group == g.label()).ok_or_else(|| format!("no row for {}", g.label()));
    let (a_row, s_row) = (row(Subgroup::Aligned)?, row(Subgroup::Stable)?);
    let stable_be = s_row.be.ok_or("stable row has no BE value")?;
    ensure(stable_be <= STABLE_RMSE_MAX, || format!("stable BE RMSE {stable_be}"))?;
    let (a_be, a_lin) = (a_row.be.ok_or("aligned BE missing")?, a_row.linear.ok_or("aligned linear missing")?);
    ensure(a_be < a_lin, || format!("aligned BE {a_be} vs linear {a_lin}"))?;
    Ok(format!("aligned u* >= {HIGH_UPTAKE}, BE {a_be:.3} < linear {a_lin:.3}; stable u* = {}, BE {stable_be:.4}", grid.u[0]))
}

// 11
fn linear_baseline_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for set in 0..100 {
        let pairs: Vec<(f64, f64)> = (0..rng.gen_range(1..=60))
            .map(|_| (rng.gen_range(-3.0..=3.0), rng.gen_range(-2.0..=2.0)))
            .collect();
        let fit = fit_linear_baseline(&pairs);
        let want = oracle_beta(&pairs);
        let err = (fit.beta - want).abs();
        worst = worst.max(err);
        ensure(err <= BETA_TOL, || format!("set {set}: closed form {} vs numeric {want}", fit.beta))?;
    }
    Ok(format!("max error {worst:.1e}"))
}

// 12
fn likert_mapping() -> Check {
    let got: Vec<f64> = (1..=6).map(|v| likert_to_stance(v).unwrap()).collect();
    ensure(got == [-1.0, -0.6, -0.2, 0.2, 0.6, 1.0], || format!("{got:?}"))?;
    ensure(likert_to_stance(0).is_err() && likert_to_stance(7).is_err(), || "out-of-range Likert accepted".into())?;
    Ok(format!("{got:?}"))
}

// 13
fn audit_soundness(traces: &[(String, TraceLog)]) -> Check {
    ensure(!traces.is_empty(), || "no traces collected".into())?;
    let mut encoded = Vec::with_capacity(traces.len());
    for (name, trace) in traces {
        let mut bytes = Vec::new();
        trace.write_jsonl(&mut bytes).map_err(|e| e.to_string())?;
        verify_trace(bytes.as_slice()).map_err(|e| format!("{name}: {e}"))?;
        encoded.push(bytes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let flips = 200;
    for _ in 0..flips {
        let i = rng.gen_range(0..encoded.len());
        let mut bytes = encoded[i].clone();
        let pos = rng.gen_range(0..bytes.len());
        bytes[pos] ^= 1 << rng.gen_range(0..8);
        ensure(verify_trace(bytes.as_slice()).is_err(), || format!("{}: flip at byte {pos} went unnoticed", traces[i].0))?;
    }
    Ok(format!("{} traces verified, {flips} single-bit flips rejected", traces.len()))
}

// 14
fn fold_cohesion() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for set in 0..1000 {
        let vocab: Vec<String> = (0..rng.gen_range(1..=40)).map(|i| format!("key{i}-{}", rng.gen::<u16>())).collect();
        let keys: Vec<&str> = (0..rng.gen_range(1..=200))
            .map(|_| vocab.choose(&mut rng).unwrap().as_str())
            .collect();
        let folds = rng.gen_range(2..=8);
        let a = assign_folds(&keys, folds, 42).map_err(|e| e.to_string())?;
        let b = assign_folds(&keys, folds, 42).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("set {set}: not reproducible"))?;
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        for (k, &f) in keys.iter().zip(&a.fold_of) {
            ensure(f < a.folds, || format!("set {set}: fold {f} out of range"))?;
            let first = *seen.entry(k).or_insert(f);
            ensure(first == f, || format!("set {set}: key {k} split across folds {first} and {f}"))?;
        }
        ensure(a.folds == folds.min(seen.len()), || format!("set {set}: {} folds", a.folds))?;
        let used: BTreeSet<usize> = a.fold_of.iter().copied().collect();
        ensure(used.len() == a.folds, || format!("set {set}: empty fold"))?;
    }
    Ok("1000 key sets".into())
}

fn main() {
    let mut traces = Vec::new();
    let results: Vec<(&str, Check)> = vec![
        ("update-rule exactness", update_rule_exactness()),
        ("batch-incremental equivalence", batch_incremental_equivalence()),
        ("monotone control", monotone_control(&mut traces)),
        ("u=0 inertness and a=0 neutrality", inertness_and_neutrality()),
        ("dedup semantics", dedup_semantics()),
        ("retrieval allocation", retrieval_allocation()),
        ("profile ordering", profile_ordering(&mut traces)),
        ("metric arithmetic", metric_arithmetic()),
        ("calibration recovery", calibration_recovery()),
        ("subgroup discrimination", subgroup_discrimination()),
        ("linear baseline oracle", linear_baseline_oracle()),
        ("Likert mapping", likert_mapping()),
        ("audit soundness", audit_soundness(&traces)),
        ("fold cohesion and determinism", fold_cohesion()),
    ];
    let mut failed = 0;
    for (i, (name, result)) in results.iter().enumerate() {
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
