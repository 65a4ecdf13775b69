use sha2::{Digest, Sha256};

use belief_engine::engine::Ports;
use belief_engine::simulation::corpus::bundled_seeds;
use belief_engine::simulation::{run_two_agent_debate, DebateConfig};
use belief_engine::trace::{EventPayload, TraceEvent};
use belief_engine::{verify_trace, TraceLog};

fn debate_trace() -> (TraceLog, f64, f64) {
    let config = DebateConfig {
        rounds: 4,
        seeds_per_side: 12,
        trials: 1,
        ..DebateConfig::default()
    };
    let mut result = run_two_agent_debate(&config, &bundled_seeds(), &Ports::default()).unwrap();
    let t = result.trials.remove(0);
    let (pro, con) = (*t.pro_series.last().unwrap(), *t.con_series.last().unwrap());
    (t.trace, pro, con)
}

fn encode(trace: &TraceLog) -> Vec<u8> {
    let mut out = Vec::new();
    trace.write_jsonl(&mut out).unwrap();
    out
}

fn events(bytes: &[u8]) -> Vec<TraceEvent> {
    bytes
        .split(|b| *b == b'\n')
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_slice(l).unwrap())
        .collect()
}

/// Re-signs a modified event list so that only semantic checks can catch it.
fn rechain(mut evs: Vec<TraceEvent>) -> Vec<u8> {
    let mut prev = String::new();
    let mut out = Vec::new();
    for (i, e) in evs.iter_mut().enumerate() {
        e.seq = i as u64;
        e.digest.clear();
        let body = serde_json::to_vec(&*e).unwrap();
        let mut h = Sha256::new();
        h.update(prev.as_bytes());
        h.update(&body);
        e.digest = format!("{:x}", h.finalize());
        prev = e.digest.clone();
        out.extend(serde_json::to_vec(&*e).unwrap());
        out.push(b'\n');
    }
    out
}

#[test]
fn debate_trace_reconstructs_final_stances() {
    let (trace, pro, con) = debate_trace();
    let v = verify_trace(encode(&trace).as_slice()).unwrap();
    assert_eq!(v.events, trace.len());
    assert!((v.agents["pro"].stance - pro).abs() <= 1e-12);
    assert!((v.agents["con"].stance - con).abs() <= 1e-12);
}

#[test]
fn rechained_trace_is_accepted() {
    // sanity check on the forging helper itself
    let (trace, _, _) = debate_trace();
    let bytes = encode(&trace);
    assert_eq!(rechain(events(&bytes)), bytes);
}

#[test]
fn forged_contribution_is_caught() {
    let (trace, _, _) = debate_trace();
    let mut evs = events(&encode(&trace));
    let target = evs
        .iter_mut()
        .find_map(|e| match &mut e.payload {
            EventPayload::Stored {
                contribution, active: true, ..
            } => Some(contribution),
            _ => None,
        })
        .unwrap();
    *target += 0.01;
    assert!(verify_trace(rechain(evs).as_slice()).is_err());
}

#[test]
fn forged_update_is_caught() {
    let (trace, _, _) = debate_trace();
    let mut evs = events(&encode(&trace));
    let target = evs
        .iter_mut()
        .rev()
        .find_map(|e| match &mut e.payload {
            EventPayload::Updated { log_odds_after, .. } => Some(log_odds_after),
            _ => None,
        })
        .unwrap();
    *target -= 1e-6;
    assert!(verify_trace(rechain(evs).as_slice()).is_err());
}

#[test]
fn forged_strength_is_caught() {
    let (trace, _, _) = debate_trace();
    let mut evs = events(&encode(&trace));
    let target = evs
        .iter_mut()
        .find_map(|e| match &mut e.payload {
            EventPayload::Stored { strength, .. } => Some(strength),
            _ => None,
        })
        .unwrap();
    *target *= 0.5;
    assert!(verify_trace(rechain(evs).as_slice()).is_err());
}

#[test]
fn dropped_and_swapped_events_are_caught() {
    let (trace, _, _) = debate_trace();
    let bytes = encode(&trace);
    let lines: Vec<&[u8]> = bytes.split(|b| *b == b'\n').filter(|l| !l.is_empty()).collect();

    let dropped: Vec<u8> = lines
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != 5)
        .flat_map(|(_, l)| l.iter().copied().chain(*b"\n"))
        .collect();
    assert!(verify_trace(dropped.as_slice()).is_err());

    let mut swapped = lines.clone();
    swapped.swap(3, 4);
    let swapped: Vec<u8> = swapped.iter().flat_map(|l| l.iter().copied().chain(*b"\n")).collect();
    assert!(verify_trace(swapped.as_slice()).is_err());

    // dropping a whole event and re-signing still breaks the replay
    let mut evs = events(&bytes);
    let i = evs
        .iter()
        .position(|e| matches!(e.payload, EventPayload::Stored { active: true, .. }))
        .unwrap();
    evs.remove(i);
    assert!(verify_trace(rechain(evs).as_slice()).is_err());
}

#[test]
fn non_canonical_whitespace_is_caught() {
    let (trace, _, _) = debate_trace();
    let bytes = encode(&trace);
    let spaced = String::from_utf8(bytes).unwrap().replacen("\"seq\":0,", "\"seq\": 0,", 1);
    assert!(verify_trace(spaced.as_bytes()).is_err());
}

#[test]
fn empty_trace_verifies_to_nothing() {
    let v = verify_trace(&b""[..]).unwrap();
    assert_eq!(v.events, 0);
    assert!(v.agents.is_empty());
}

#[test]
fn shifted_prior_is_caught() {
    let (trace, _, _) = debate_trace();
    let mut evs = events(&encode(&trace));
    let target = evs
        .iter_mut()
        .filter_map(|e| match &mut e.payload {
            EventPayload::Updated { prior_log_odds, .. } if e.agent == "pro" => Some(prior_log_odds),
            _ => None,
        })
        .nth(1)
        .unwrap();
    *target = 0.25;
    assert!(verify_trace(rechain(evs).as_slice()).is_err());
}
