//! Belief-engine agents: a log-odds stance over a deduplicated memory of
//! scored arguments, driven by two parameters (uptake and anchoring).

pub mod belief;
pub mod engine;
pub mod extraction;
pub mod judgement;
pub mod memory;
pub mod replay;
pub mod service;
pub mod simulation;
pub mod trace;

pub use belief::{BeliefError, BeliefState, UaProfile};
pub use engine::{Agent, EngineConfig, EngineError, Generator, Ports, TemplateGenerator};
pub use extraction::{Author, Message};
pub use judgement::{ArgumentRecord, CandidateArgument, Polarity, RecordId, Role};
pub use memory::{MemoryStore, RetrievalContext};
pub use trace::{verify_trace, TraceLog};
