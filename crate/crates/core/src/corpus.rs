//! Contrastive story pairs, loaded from JSON Lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("corpus file not found or unreadable: {0}")]
    MissingFile(String),
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate pair_id {0}")]
    DuplicatePairId(u32),
    #[error("pair_ids are not contiguous from 0: expected {expected}, found {found}")]
    NonContiguousIds { expected: u32, found: u32 },
    #[error("corpus contains no pairs")]
    EmptyCorpus,
}

/// One subject with two stories that differ in a targeted attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub pair_id: u32,
    pub subject: String,
    #[serde(default)]
    pub subject_description_1: String,
    #[serde(default)]
    pub subject_description_2: String,
    pub story_1: String,
    pub story_2: String,
}

/// Returns every invariant the pair violates, in a fixed order.
pub fn validate_pair(pair: &ContrastivePair) -> Vec<&'static str> {
    let mut violations = Vec::new();
    if pair.subject.is_empty() {
        violations.push("empty subject");
    }
    if pair.story_1.is_empty() {
        violations.push("empty story_1");
    }
    if pair.story_2.is_empty() {
        violations.push("empty story_2");
    }
    if pair.story_1.as_bytes() == pair.story_2.as_bytes() {
        violations.push("stories identical");
    }
    violations
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastiveCorpus {
    pairs: Vec<ContrastivePair>,
    source_path: String,
}

// Mirrors the on-disk record with every key optional, so a missing key can be
// reported by name instead of as a generic serde error.
#[derive(Deserialize)]
struct RawRecord {
    pair_id: Option<u32>,
    subject: Option<String>,
    subject_description_1: Option<String>,
    subject_description_2: Option<String>,
    story_1: Option<String>,
    story_2: Option<String>,
}

impl ContrastiveCorpus {
    /// Loads and validates a JSON Lines corpus. Blank lines are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CorpusError::MissingFile(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.display().to_string())
    }

    pub fn parse(text: &str, source_path: impl Into<String>) -> Result<Self, CorpusError> {
        let mut by_id: BTreeMap<u32, ContrastivePair> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| CorpusError::MalformedRecord {
                line: line_no,
                reason,
            };
            let raw: RawRecord =
                serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
            let pair = ContrastivePair {
                pair_id: raw.pair_id.ok_or_else(|| malformed("missing pair_id".into()))?,
                subject: raw.subject.ok_or_else(|| malformed("missing subject".into()))?,
                subject_description_1: raw.subject_description_1.unwrap_or_default(),
                subject_description_2: raw.subject_description_2.unwrap_or_default(),
                story_1: raw.story_1.ok_or_else(|| malformed("missing story_1".into()))?,
                story_2: raw.story_2.ok_or_else(|| malformed("missing story_2".into()))?,
            };
            let violations = validate_pair(&pair);
            if !violations.is_empty() {
                return Err(malformed(violations.join(", ")));
            }
            if by_id.contains_key(&pair.pair_id) {
                return Err(CorpusError::DuplicatePairId(pair.pair_id));
            }
            by_id.insert(pair.pair_id, pair);
        }
        if by_id.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        for (expected, &found) in by_id.keys().enumerate() {
            if found != expected as u32 {
                return Err(CorpusError::NonContiguousIds {
                    expected: expected as u32,
                    found,
                });
            }
        }
        Ok(Self {
            pairs: by_id.into_values().collect(),
            source_path: source_path.into(),
        })
    }

    pub fn pairs(&self) -> &[ContrastivePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn get(&self, pair_id: u32) -> Option<&ContrastivePair> {
        // ids are contiguous from 0, so the id is the index
        self.pairs.get(pair_id as usize)
    }

    pub fn contains(&self, pair_id: u32) -> bool {
        (pair_id as usize) < self.pairs.len()
    }
}
