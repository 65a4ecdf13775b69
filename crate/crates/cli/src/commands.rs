use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use belief_engine::engine::Ports;
use belief_engine::judgement::CandidateArgument;
use belief_engine::replay::{
    calibrate, calibrate_by_subgroup, prepare_case, read_cases, replay_case, summarize, CalibrationReport, FoldKey,
    JudgedCase, ReplayError,
};
use belief_engine::simulation::corpus::{bundled_opponent, bundled_seeds, load_opponent_script, load_seed_corpus};
use belief_engine::simulation::{
    run_scripted_opponent_sweep, run_two_agent_debate, trial_metrics, DebateConfig, SimulationError, SweepAxis,
};
use belief_engine::{verify_trace, TraceLog, UaProfile};

use crate::config::RunConfig;
use crate::CliError;

/// A loaded config with its command-line overrides applied.
pub struct Context {
    pub config: RunConfig,
    pub ports: Ports,
}

impl Context {
    pub fn load(path: Option<&Path>, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut config = match path {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        config.ports.apply_env(|v| std::env::var(v).ok().filter(|s| !s.is_empty()));
        if let Some(out) = out {
            config.output = out;
        }
        if let Some(seed) = seed {
            config.sweep.rng_seed = seed;
            config.debate.rng_seed = seed;
            config.replay.seed = seed;
        }
        if let Some(engine) = &config.engine {
            engine.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        }
        let ports = config.ports.build(config.embedding_dim())?;
        Ok(Context { config, ports })
    }

    fn out(&self) -> &Path {
        &self.config.output
    }

    fn traces_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out().join("traces");
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Canonical JSON of everything the run depends on, written before any
    /// work starts.
    fn write_resolved(&self, command: &str, concrete: serde_json::Value) -> Result<(), CliError> {
        fs::create_dir_all(self.out())?;
        let snapshot = json!({
            "command": command,
            "config": self.config,
            "resolved": concrete,
        });
        let mut text = serde_json::to_string_pretty(&snapshot).expect("config serialises");
        text.push('\n');
        fs::write(self.out().join("resolved_config.json"), text)?;
        Ok(())
    }
}

fn write_trace(path: &Path, trace: &TraceLog) -> Result<(), CliError> {
    let file = BufWriter::new(File::create(path)?);
    trace.write_jsonl(file)?;
    Ok(())
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<File>, CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

fn file_name_safe(label: &str) -> String {
    label.replace(['/', '\\', ' '], "-")
}

/// Turns a simulation failure into an exit status, saving the partial trace
/// of a failed trial first.
fn simulation_failure(e: SimulationError, dir: &Path, label: &str) -> CliError {
    match e {
        SimulationError::Engine { trial, source, trace } => {
            let path = dir.join(format!("failed_{}_trial{trial}.jsonl", file_name_safe(label)));
            match write_trace(&path, &trace) {
                Ok(()) => CliError::Runtime(format!(
                    "{label} trial {trial}: {source} (partial trace in {})",
                    path.display()
                )),
                Err(w) => CliError::Runtime(format!("{label} trial {trial}: {source} (saving trace failed: {w})")),
            }
        }
        SimulationError::Metrics(m) => CliError::Runtime(m.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn read_text(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {what} {}: {e}", path.display())))
}

fn seed_corpus(path: Option<&Path>) -> Result<Vec<CandidateArgument>, CliError> {
    match path {
        Some(p) => load_seed_corpus(&read_text(p, "seed corpus")?).map_err(|e| CliError::Validation(e.to_string())),
        None => Ok(bundled_seeds()),
    }
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.config.sweep_config();
    cfg.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let seeds = seed_corpus(ctx.config.sweep.seed_corpus.as_deref())?;
    let opponent = match ctx.config.sweep.opponent_script.as_deref() {
        Some(p) => load_opponent_script(&read_text(p, "opponent script")?)
            .map_err(|e| CliError::Validation(e.to_string()))?,
        None => bundled_opponent(),
    };
    ctx.write_resolved("sweep", json!({ "sweep": cfg }))?;
    let traces = ctx.traces_dir()?;

    let mut trajectories = csv_writer(
        &ctx.out().join("sweep_trajectories.csv"),
        &["axis", "value", "trial", "lambda", "round", "stance"],
    )?;
    let mut finals = csv_writer(
        &ctx.out().join("sweep_final.csv"),
        &["axis", "value", "trial", "lambda", "seeded_stance", "final_stance"],
    )?;
    for axis in [SweepAxis::Uptake, SweepAxis::Anchoring] {
        let result = run_scripted_opponent_sweep(&cfg, axis, &seeds, &opponent, &ctx.ports)
            .map_err(|e| simulation_failure(e, &traces, &format!("sweep_{}", axis.symbol())))?;
        for (run, trace) in result.runs.iter().zip(&result.traces) {
            let symbol = axis.symbol();
            for (round, stance) in run.trajectory.iter().enumerate() {
                trajectories.serialize((symbol, run.value, run.trial, run.lambda, round, stance))?;
            }
            finals.serialize((
                symbol,
                run.value,
                run.trial,
                run.lambda,
                run.seeded_stance(),
                run.final_stance(),
            ))?;
            write_trace(&traces.join(format!("sweep_{}.jsonl", run.label())), trace)?;
        }
        for (value, mean) in result.final_means() {
            println!("{}={value}: mean final stance {mean:+.3}", axis.symbol());
        }
    }
    trajectories.flush()?;
    finals.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PairingSnapshot<'a> {
    label: &'a str,
    pro: UaProfile,
    con: UaProfile,
}

pub fn debate(ctx: &Context) -> Result<(), CliError> {
    let base = ctx.config.debate_config();
    base.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let pairings = ctx.config.pairings()?;
    let seeds = seed_corpus(ctx.config.debate.seed_corpus.as_deref())?;
    let snapshot: Vec<_> = pairings
        .iter()
        .map(|(label, pro, con)| PairingSnapshot {
            label,
            pro: *pro,
            con: *con,
        })
        .collect();
    ctx.write_resolved("debate", json!({ "debate": base, "pairings": snapshot }))?;
    let traces = ctx.traces_dir()?;
    let topic = base.topic.as_str();

    let mut metrics = csv_writer(
        &ctx.out().join("debate_metrics.csv"),
        &[
            "topic",
            "pairing",
            "trial",
            "pro_lambda",
            "con_lambda",
            "final_pro",
            "final_con",
            "abs_final_gap",
            "gap_reduction",
            "mean_abs_shift",
            "centre_shift",
            "crossing",
        ],
    )?;
    let mut summary = csv_writer(
        &ctx.out().join("debate_summary.csv"),
        &[
            "topic",
            "pairing",
            "trials",
            "final_pro",
            "final_con",
            "abs_final_gap",
            "gap_reduction",
            "mean_abs_shift",
            "centre_shift",
            "crossing_rate",
        ],
    )?;
    let mut series = csv_writer(
        &ctx.out().join("debate_series.csv"),
        &["topic", "pairing", "trial", "round", "pro", "con"],
    )?;
    let mut convergence = csv_writer(&ctx.out().join("convergence.csv"), &["topic", "pairing", "convergence"])?;

    for (label, pro, con) in &pairings {
        let config = DebateConfig {
            pro: *pro,
            con: *con,
            ..base.clone()
        };
        let result = run_two_agent_debate(&config, &seeds, &ctx.ports)
            .map_err(|e| simulation_failure(e, &traces, &format!("debate_{label}")))?;
        for t in &result.trials {
            let m = trial_metrics(&t.stances());
            metrics.serialize((
                topic,
                label,
                t.trial,
                t.pro_scale.lambda,
                t.con_scale.lambda,
                m.final_pro,
                m.final_con,
                m.abs_final_gap,
                m.gap_reduction,
                m.mean_abs_shift,
                m.centre_shift,
                m.crossing,
            ))?;
            for (round, (p, c)) in t.pro_series.iter().zip(&t.con_series).enumerate() {
                series.serialize((topic, label, t.trial, round, p, c))?;
            }
            let name = format!("debate_{}_trial{}.jsonl", file_name_safe(label), t.trial);
            write_trace(&traces.join(name), &t.trace)?;
        }
        let s = &result.summary;
        summary.serialize((
            topic,
            label,
            s.trials,
            s.final_pro,
            s.final_con,
            s.abs_final_gap,
            s.gap_reduction,
            s.mean_abs_shift,
            s.centre_shift,
            s.crossing_rate,
        ))?;
        convergence.serialize((topic, label, s.convergence))?;
        println!(
            "{label}: final {:+.3} / {:+.3}, gap {:.3}, convergence {:.3}",
            s.final_pro, s.final_con, s.abs_final_gap, s.convergence
        );
    }
    for w in [&mut metrics, &mut summary, &mut series, &mut convergence] {
        w.flush()?;
    }
    Ok(())
}

pub struct ReplayOptions {
    pub cases: Option<PathBuf>,
    pub key: Option<FoldKey>,
    pub strict: bool,
    pub trace: bool,
}

fn replay_failure(e: ReplayError) -> CliError {
    fn is_input(e: &ReplayError) -> bool {
        match e {
            ReplayError::Case { source, .. } => is_input(source),
            ReplayError::Likert(_)
            | ReplayError::Invalid(_)
            | ReplayError::Grid(_)
            | ReplayError::Folds(_)
            | ReplayError::Spec(_)
            | ReplayError::Empty => true,
            _ => false,
        }
    }
    if is_input(&e) {
        CliError::Validation(e.to_string())
    } else {
        CliError::Runtime(e.to_string())
    }
}

fn fmt3(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.3}"))
}

pub fn replay(ctx: &Context, opts: &ReplayOptions) -> Result<(), CliError> {
    let r = &ctx.config.replay;
    let path = opts
        .cases
        .clone()
        .or_else(|| r.cases.clone())
        .ok_or_else(|| CliError::Validation("no case file: set replay.cases or pass --cases".into()))?;
    let key = opts.key.unwrap_or(r.key);
    let grid = ctx.config.grid()?;
    let settings = r.settings();
    if !(settings.clip > 0.0 && settings.clip < 1.0) {
        return Err(CliError::Validation(format!("replay.clip must lie in (0, 1), got {}", settings.clip)));
    }
    if !(0.0..=1.0).contains(&settings.theta) {
        return Err(CliError::Validation(format!("replay.theta must lie in [0, 1], got {}", settings.theta)));
    }
    if r.folds == 0 {
        return Err(CliError::Validation("replay.folds must be at least 1".into()));
    }

    let file = File::open(&path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let ingested = read_cases(BufReader::new(file))?;
    for e in &ingested.errors {
        eprintln!("{}:{}: {}", path.display(), e.line, e.message);
    }
    if opts.strict && !ingested.errors.is_empty() {
        return Err(CliError::Validation(format!(
            "{} malformed case line(s) in {}",
            ingested.errors.len(),
            path.display()
        )));
    }
    let cases = ingested.cases;
    if cases.is_empty() {
        return Err(CliError::Validation(format!("no valid cases in {}", path.display())));
    }

    ctx.write_resolved(
        "replay",
        json!({
            "cases": path,
            "key": key,
            "grid": grid,
            "settings": settings,
            "folds": r.folds,
            "seed": r.seed,
            "eps_weak": r.eps_weak,
        }),
    )?;

    let judged: Vec<JudgedCase> = cases
        .iter()
        .map(|c| prepare_case(c, &ctx.ports, &settings))
        .collect::<Result<_, _>>()
        .map_err(replay_failure)?;
    let warned = judged.iter().filter(|j| !j.warnings.is_empty()).count();
    if warned > 0 {
        eprintln!("warning: {warned} case(s) had extraction or scoring warnings");
    }
    let keys: Vec<&str> = cases.iter().map(|c| key.of(c)).collect();
    let pooled = calibrate(&judged, &keys, &grid, r.folds, r.seed).map_err(replay_failure)?;
    let subgroups =
        calibrate_by_subgroup(&judged, &keys, &grid, r.folds, r.seed, r.eps_weak).map_err(replay_failure)?;
    for w in pooled.warnings.iter().chain(subgroups.iter().filter_map(|s| s.warning.as_ref())) {
        eprintln!("warning: {w}");
    }

    let mut reports: Vec<(&str, &CalibrationReport)> = vec![("All participants", &pooled)];
    for s in &subgroups {
        if let Some(rep) = &s.report {
            reports.push((s.subgroup.label(), rep));
        }
    }

    let mut folds = csv_writer(
        &ctx.out().join("replay_folds.csv"),
        &[
            "subset",
            "fold",
            "u",
            "a",
            "train_rmse",
            "heldout_rmse",
            "n_train",
            "n_heldout",
            "beta",
            "linear_rmse",
            "no_change_rmse",
        ],
    )?;
    let mut surface = csv_writer(&ctx.out().join("replay_surface.csv"), &["subset", "u", "a", "rmse", "excess"])?;
    for (subset, rep) in &reports {
        for f in &rep.folds {
            folds.serialize((
                subset,
                f.fold,
                f.u,
                f.a,
                f.train_rmse,
                f.heldout_rmse,
                f.n_train,
                f.n_heldout,
                f.beta,
                f.linear_rmse,
                f.no_change_rmse,
            ))?;
        }
        for c in &rep.surface {
            surface.serialize((subset, c.u, c.a, c.rmse, c.excess))?;
        }
    }
    folds.flush()?;
    surface.flush()?;

    let labels = belief_engine::replay::calibrate::subgroup_labels(&judged, r.eps_weak);
    let mut predictions = csv_writer(
        &ctx.out().join("replay_predictions.csv"),
        &[
            "participant",
            "group",
            "topic",
            "subgroup",
            "fold",
            "initial",
            "observed",
            "net_evidence",
            "be",
            "linear",
            "no_change",
        ],
    )?;
    for ((c, j), (p, label)) in cases.iter().zip(&judged).zip(pooled.predictions.iter().zip(&labels)) {
        predictions.serialize((
            &c.participant,
            &c.group,
            &c.topic,
            label.label(),
            p.fold,
            j.initial,
            j.observed,
            j.net_evidence,
            p.be,
            p.linear,
            p.no_change,
        ))?;
    }
    predictions.flush()?;

    let rows = summarize(&judged, &pooled, &subgroups);
    let mut summary = csv_writer(
        &ctx.out().join("replay_summary.csv"),
        &["Group", "N", "|Δ|", "No-ch.", "Linear", "BE", "Gain"],
    )?;
    for row in &rows {
        summary.write_record([
            row.group.clone(),
            row.n.to_string(),
            format!("{:.3}", row.mean_abs_delta),
            format!("{:.3}", row.no_change),
            fmt3(row.linear),
            fmt3(row.be),
            fmt3(row.gain),
        ])?;
        println!(
            "{:<18} n={:<5} no-change {:.3}  linear {:>5}  BE {:>5}",
            row.group,
            row.n,
            row.no_change,
            fmt3(row.linear),
            fmt3(row.be)
        );
    }
    summary.flush()?;

    if opts.trace {
        let mut trace = TraceLog::new();
        for (c, p) in cases.iter().zip(&pooled.predictions) {
            let f = &pooled.folds[p.fold];
            let profile = UaProfile::new(f.u, f.a).map_err(|e| CliError::Runtime(e.to_string()))?;
            if let Err(e) = replay_case(c, &profile, &ctx.ports, &settings, &mut trace) {
                let partial = ctx.traces_dir()?.join("replay_partial.jsonl");
                write_trace(&partial, &trace)?;
                return Err(CliError::Runtime(format!("{e} (partial trace in {})", partial.display())));
            }
        }
        write_trace(&ctx.traces_dir()?.join("replay.jsonl"), &trace)?;
    }
    Ok(())
}

pub fn trace_verify(path: &Path) -> Result<(), CliError> {
    let file = File::open(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let verified = verify_trace(BufReader::new(file)).map_err(|e| CliError::Verification(e.to_string()))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "ok: {} events, {} agents", verified.events, verified.agents.len())?;
    for (id, a) in &verified.agents {
        writeln!(
            out,
            "{id}: L={} S={} records={} active={}",
            a.log_odds, a.stance, a.records, a.active
        )?;
    }
    Ok(())
}
