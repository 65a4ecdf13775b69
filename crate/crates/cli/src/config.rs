//! TOML run configuration, environment overrides and port wiring.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use belief_engine::engine::{EngineConfig, Generator, Ports, ServiceGenerator, TemplateGenerator};
use belief_engine::extraction::{Extractor, ScriptedExtractor, ServiceExtractor};
use belief_engine::judgement::{BuiltinScorer, ServiceScorer, StrengthScorer, TableScorer, TrigramEmbedder};
use belief_engine::replay::{CalibrationGrid, FoldKey, ReplaySettings, DEFAULT_EPS_WEAK, REPLAY_THETA};
use belief_engine::belief::DEFAULT_STANCE_CLIP;
use belief_engine::service::{JsonService, ServiceConfig};
use belief_engine::simulation::{DebateConfig, SweepConfig};
use belief_engine::UaProfile;

use crate::CliError;

pub const SCORER_URL_VAR: &str = "BELIEF_SCORER_URL";
pub const EXTRACTOR_URL_VAR: &str = "BELIEF_EXTRACTOR_URL";
pub const GENERATOR_URL_VAR: &str = "BELIEF_GENERATOR_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: PathBuf,
    /// Replaces the per-command engine defaults when present.
    pub engine: Option<EngineConfig>,
    pub profiles: BTreeMap<String, UaProfile>,
    pub debate: DebateSection,
    pub sweep: SweepSection,
    pub replay: ReplaySection,
    pub ports: PortsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output: PathBuf::from("out"),
            engine: None,
            profiles: BTreeMap::from([
                ("Open".to_string(), UaProfile::OPEN_MINDED),
                ("Stubborn".to_string(), UaProfile::STUBBORN),
            ]),
            debate: DebateSection::default(),
            sweep: SweepSection::default(),
            replay: ReplaySection::default(),
            ports: PortsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pairing {
    pub pro: String,
    pub con: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebateSection {
    pub topic: String,
    pub rounds: usize,
    pub seeds_per_side: usize,
    pub pro_target: f64,
    pub con_target: f64,
    pub trials: usize,
    pub rng_seed: u64,
    /// Scripted seed corpus; the bundled one when absent.
    pub seed_corpus: Option<PathBuf>,
    pub pairings: Vec<Pairing>,
}

impl Default for DebateSection {
    fn default() -> Self {
        let d = DebateConfig::default();
        let names = ["Open", "Stubborn"];
        DebateSection {
            topic: d.topic,
            rounds: d.rounds,
            seeds_per_side: d.seeds_per_side,
            pro_target: d.pro_target,
            con_target: d.con_target,
            trials: d.trials,
            rng_seed: d.rng_seed,
            seed_corpus: None,
            pairings: names
                .iter()
                .flat_map(|p| {
                    names.iter().map(move |c| Pairing {
                        pro: p.to_string(),
                        con: c.to_string(),
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub topic: String,
    pub rounds: usize,
    pub seeds: usize,
    pub target: f64,
    pub u_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub fixed_a: f64,
    pub fixed_u: f64,
    pub trials: usize,
    pub rng_seed: u64,
    pub seed_corpus: Option<PathBuf>,
    pub opponent_script: Option<PathBuf>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let s = SweepConfig::default();
        SweepSection {
            topic: s.topic,
            rounds: s.rounds,
            seeds: s.seeds,
            target: s.target,
            u_grid: s.u_grid,
            a_grid: s.a_grid,
            fixed_a: s.fixed_a,
            fixed_u: s.fixed_u,
            trials: s.trials,
            rng_seed: s.rng_seed,
            seed_corpus: None,
            opponent_script: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaySection {
    pub cases: Option<PathBuf>,
    pub u_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub folds: usize,
    pub key: FoldKey,
    pub seed: u64,
    pub eps_weak: f64,
    pub clip: f64,
    pub theta: f64,
}

impl Default for ReplaySection {
    fn default() -> Self {
        let grid = CalibrationGrid::default();
        ReplaySection {
            cases: None,
            u_grid: grid.u,
            a_grid: grid.a,
            folds: 5,
            key: FoldKey::Group,
            seed: 42,
            eps_weak: DEFAULT_EPS_WEAK,
            clip: DEFAULT_STANCE_CLIP,
            theta: REPLAY_THETA,
        }
    }
}

impl ReplaySection {
    pub fn settings(&self) -> ReplaySettings {
        ReplaySettings {
            theta: self.theta,
            clip: self.clip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub url: String,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
    pub max_in_flight: Option<usize>,
}

impl Endpoint {
    fn from_url(url: String) -> Self {
        Endpoint {
            url,
            timeout_ms: None,
            retries: None,
            max_in_flight: None,
        }
    }

    fn service(&self) -> JsonService {
        let mut c = ServiceConfig::new(&self.url);
        if let Some(t) = self.timeout_ms {
            c.timeout_ms = t;
        }
        if let Some(r) = self.retries {
            c.retries = r;
        }
        if let Some(m) = self.max_in_flight {
            c.max_in_flight = m;
        }
        JsonService::new(c)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerPort {
    /// Scripted hints, else a stable hash.
    #[default]
    Builtin,
    /// `topic,claim,score` CSV.
    Table {
        path: PathBuf,
        #[serde(default)]
        hint_fallback: bool,
    },
    Service(Endpoint),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExtractorPort {
    #[default]
    Scripted,
    Service(Endpoint),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorPort {
    #[default]
    Template,
    Service(Endpoint),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortsSection {
    pub scorer: ScorerPort,
    pub extractor: ExtractorPort,
    pub generator: GeneratorPort,
}

impl PortsSection {
    /// Points a port at a service when its environment variable is set.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(url) = var(SCORER_URL_VAR) {
            self.scorer = ScorerPort::Service(Endpoint::from_url(url));
        }
        if let Some(url) = var(EXTRACTOR_URL_VAR) {
            self.extractor = ExtractorPort::Service(Endpoint::from_url(url));
        }
        if let Some(url) = var(GENERATOR_URL_VAR) {
            self.generator = GeneratorPort::Service(Endpoint::from_url(url));
        }
    }

    pub fn build(&self, embedding_dim: usize) -> Result<Ports, CliError> {
        let scorer: Arc<dyn StrengthScorer> = match &self.scorer {
            ScorerPort::Builtin => Arc::new(BuiltinScorer),
            ScorerPort::Table { path, hint_fallback } => {
                let file = fs::File::open(path)
                    .map_err(|e| CliError::Validation(format!("scorer table {}: {e}", path.display())))?;
                let table = TableScorer::from_csv(file).map_err(|e| CliError::Validation(e.to_string()))?;
                Arc::new(if *hint_fallback {
                    table.with_hint_fallback()
                } else {
                    table
                })
            }
            ScorerPort::Service(ep) => Arc::new(ServiceScorer::new(ep.service())),
        };
        let extractor: Arc<dyn Extractor> = match &self.extractor {
            ExtractorPort::Scripted => Arc::new(ScriptedExtractor),
            ExtractorPort::Service(ep) => Arc::new(ServiceExtractor::new(ep.service())),
        };
        let generator: Arc<dyn Generator> = match &self.generator {
            GeneratorPort::Template => Arc::new(TemplateGenerator),
            GeneratorPort::Service(ep) => Arc::new(ServiceGenerator::new(ep.service())),
        };
        Ok(Ports {
            extractor,
            scorer,
            generator,
            embedder: Arc::new(TrigramEmbedder::new(embedding_dim)),
        })
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Parses a TOML file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut output = Some(config.output.clone());
        rebase(base, &mut output);
        config.output = output.expect("set above");
        rebase(base, &mut config.debate.seed_corpus);
        rebase(base, &mut config.sweep.seed_corpus);
        rebase(base, &mut config.sweep.opponent_script);
        rebase(base, &mut config.replay.cases);
        if let ScorerPort::Table { path, .. } = &mut config.ports.scorer {
            let mut p = Some(path.clone());
            rebase(base, &mut p);
            *path = p.expect("set above");
        }
        Ok(config)
    }

    pub fn profile(&self, name: &str) -> Result<UaProfile, CliError> {
        self.profiles
            .get(name)
            .copied()
            .ok_or_else(|| CliError::Validation(format!("unknown profile {name:?}")))
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let s = &self.sweep;
        SweepConfig {
            topic: s.topic.clone(),
            rounds: s.rounds,
            seeds: s.seeds,
            target: s.target,
            u_grid: s.u_grid.clone(),
            a_grid: s.a_grid.clone(),
            fixed_a: s.fixed_a,
            fixed_u: s.fixed_u,
            trials: s.trials,
            rng_seed: s.rng_seed,
            engine: self.engine.clone().unwrap_or_else(EngineConfig::sweep),
        }
    }

    /// Base debate config; the pairing loop fills in the profiles.
    pub fn debate_config(&self) -> DebateConfig {
        let d = &self.debate;
        DebateConfig {
            topic: d.topic.clone(),
            rounds: d.rounds,
            seeds_per_side: d.seeds_per_side,
            pro_target: d.pro_target,
            con_target: d.con_target,
            trials: d.trials,
            rng_seed: d.rng_seed,
            engine: self.engine.clone().unwrap_or_default(),
            ..DebateConfig::default()
        }
    }

    pub fn pairings(&self) -> Result<Vec<(String, UaProfile, UaProfile)>, CliError> {
        if self.debate.pairings.is_empty() {
            return Err(CliError::Validation("debate.pairings must not be empty".into()));
        }
        self.debate
            .pairings
            .iter()
            .map(|p| Ok((format!("{}/{}", p.pro, p.con), self.profile(&p.pro)?, self.profile(&p.con)?)))
            .collect()
    }

    pub fn grid(&self) -> Result<CalibrationGrid, CliError> {
        CalibrationGrid::new(self.replay.u_grid.clone(), self.replay.a_grid.clone())
            .map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn embedding_dim(&self) -> usize {
        self.engine.as_ref().map_or_else(|| EngineConfig::default().embedding_dim, |e| e.embedding_dim)
    }
}
