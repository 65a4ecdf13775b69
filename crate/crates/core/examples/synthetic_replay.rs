//! Writes a synthetic replay case file as JSONL.
//!
//! ```text
//! cargo run -p belief-engine --example synthetic_replay -- exact cases.jsonl
//! cargo run -p belief-engine --example synthetic_replay -- mixed cases.jsonl
//! ```
//!
//! `exact` answers every case with the noiseless replay at u=0.15, a=0.5, so
//! calibration should recover that cell. `mixed` blends aligned, stable and
//! opposed movers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use belief_engine::engine::Ports;
use belief_engine::replay::synthetic::{generate, mixed_population, PopulationSpec, Response};
use belief_engine::replay::ReplaySettings;
use belief_engine::UaProfile;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (kind, path) = match args.as_slice() {
        [kind, path] => (kind.as_str(), path.as_str()),
        _ => {
            eprintln!("usage: synthetic_replay exact|mixed OUT.jsonl");
            return ExitCode::from(1);
        }
    };
    let ports = Ports::default();
    let settings = ReplaySettings::default();
    let cases = match kind {
        "exact" => generate(
            &PopulationSpec { cases: 200, ..PopulationSpec::default() },
            Response::Replay { profile: UaProfile::new(0.15, 0.5).expect("valid"), noise_sd: 0.0 },
            &ports,
            &settings,
        ),
        "mixed" => mixed_population(400, 11, &ports, &settings),
        other => {
            eprintln!("unknown population {other:?}");
            return ExitCode::from(1);
        }
    };
    let cases = match cases {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let write = || -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for c in &cases {
            serde_json::to_writer(&mut out, c)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    if let Err(e) = write() {
        eprintln!("error: {path}: {e}");
        return ExitCode::from(2);
    }
    println!("wrote {} cases to {path}", cases.len());
    ExitCode::SUCCESS
}
