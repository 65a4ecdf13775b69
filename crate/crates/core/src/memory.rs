//! Argument memory: an append-only record store with an active/archived
//! partition and composition-proportional retrieval.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::judgement::{ArgumentRecord, Decision, Embedder, Polarity, RecordId, Resolution};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("record id {0} already present in the store")]
    DuplicateId(RecordId),
    #[error("record {0} not found")]
    UnknownRecord(RecordId),
    #[error("record {0} is already archived")]
    AlreadyArchived(RecordId),
    #[error("retrieval size must be at least 1")]
    EmptyRetrieval,
    #[error("memory dump line {line}: {message}")]
    Dump { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryStore {
    records: Vec<ArgumentRecord>,
    next_id: u64,
}

/// Records handed to the generator, plus the slot allocation used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalContext {
    pub records: Vec<ArgumentRecord>,
    pub k_plus: usize,
    pub k_minus: usize,
}

/// `k_plus = round_half_up(k * n_plus / (n_plus + n_minus))`, `k_minus = k - k_plus`.
/// Empty memory splits evenly with the odd slot on the affirmative side.
pub fn allocate_slots(k: usize, n_plus: usize, n_minus: usize) -> (usize, usize) {
    let total = n_plus + n_minus;
    let k_plus = if total == 0 {
        k.div_ceil(2)
    } else {
        // floor(k*n/t + 1/2) in exact integer arithmetic
        (2 * k * n_plus + total) / (2 * total)
    };
    (k_plus, k - k_plus)
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[ArgumentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The id the next insert will receive.
    pub fn next_id(&self) -> RecordId {
        RecordId(self.next_id)
    }

    pub fn get(&self, id: RecordId) -> Option<&ArgumentRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Appends a record, assigning it the next id.
    pub fn insert(&mut self, mut record: ArgumentRecord) -> Result<RecordId, MemoryError> {
        let id = self.next_id();
        if self.get(id).is_some() {
            return Err(MemoryError::DuplicateId(id));
        }
        record.id = id;
        self.records.push(record);
        self.next_id += 1;
        Ok(id)
    }

    /// Marks a record as superseded. Archival is permanent.
    pub fn archive(&mut self, id: RecordId, by: RecordId) -> Result<(), MemoryError> {
        let rec = self
            .records
            .iter_mut()
            .find(|r| r.id == id)
            .ok_or(MemoryError::UnknownRecord(id))?;
        if !rec.active {
            return Err(MemoryError::AlreadyArchived(id));
        }
        rec.active = false;
        rec.archived_by = Some(by);
        Ok(())
    }

    /// Stores a judged record according to its conflict-resolution outcome.
    pub fn admit(
        &mut self,
        mut record: ArgumentRecord,
        resolution: &Resolution,
    ) -> Result<RecordId, MemoryError> {
        match resolution.decision {
            Decision::Accepted => {
                record.active = true;
                self.insert(record)
            }
            Decision::ReplacedExisting(old) => {
                if !self.get(old).is_some_and(|r| r.active) {
                    return Err(MemoryError::UnknownRecord(old));
                }
                record.active = true;
                let id = self.insert(record)?;
                self.archive(old, id)?;
                Ok(id)
            }
            Decision::ArchivedNew(kept) => {
                record.active = false;
                record.archived_by = Some(kept);
                self.insert(record)
            }
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &ArgumentRecord> {
        self.records.iter().filter(|r| r.active)
    }

    /// Active records in insertion order.
    pub fn active_set(&self) -> Vec<&ArgumentRecord> {
        self.active().collect()
    }

    pub fn active_counts(&self) -> (usize, usize) {
        self.active().fold((0, 0), |(p, m), r| match r.polarity {
            Polarity::Affirmative => (p + 1, m),
            Polarity::Negative => (p, m + 1),
        })
    }

    /// Strongest active records on each side, allocated by active composition.
    pub fn retrieve(&self, k: usize) -> Result<RetrievalContext, MemoryError> {
        if k < 1 {
            return Err(MemoryError::EmptyRetrieval);
        }
        let (n_plus, n_minus) = self.active_counts();
        let (k_plus, k_minus) = allocate_slots(k, n_plus, n_minus);
        let mut records = self.strongest(Polarity::Affirmative, k_plus);
        records.extend(self.strongest(Polarity::Negative, k_minus));
        Ok(RetrievalContext {
            records,
            k_plus,
            k_minus,
        })
    }

    fn strongest(&self, polarity: Polarity, n: usize) -> Vec<ArgumentRecord> {
        let mut side: Vec<&ArgumentRecord> = self.active().filter(|r| r.polarity == polarity).collect();
        // ties: older record first
        side.sort_by(|a, b| b.strength.total_cmp(&a.strength).then(a.id.cmp(&b.id)));
        side.into_iter().take(n).cloned().collect()
    }

    /// One JSON object per record, archived records included.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), MemoryError> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Restores a dump, recomputing embeddings with `embedder`.
    pub fn read_jsonl<R: BufRead>(input: R, embedder: &dyn Embedder) -> Result<Self, MemoryError> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut r: ArgumentRecord = serde_json::from_str(&line).map_err(|e| MemoryError::Dump {
                line: i + 1,
                message: e.to_string(),
            })?;
            if !seen.insert(r.id) {
                return Err(MemoryError::DuplicateId(r.id));
            }
            r.embedding = embedder.embed(&r.claim);
            records.push(r);
        }
        let next_id = records.iter().map(|r| r.id.0 + 1).max().unwrap_or(0);
        Ok(MemoryStore { records, next_id })
    }
}
