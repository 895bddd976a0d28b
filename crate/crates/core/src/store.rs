//! Sparse SAE activation archives and their story-level summaries.
//!
//! On disk an archive is little-endian:
//!
//! ```text
//! "CEBA" | version u32 = 1 | latent_dim u32 | pair_count u32 | label_len u16 | label utf8
//! per pair:  pair_id u32
//!   per story (1 then 2):  token_count u32
//!     per token:  nnz u32, nnz x (neuron_index u32, value f32)
//! ```
//!
//! Absent entries are exact zeros. Summaries are accumulated in `f64` in
//! ascending token order and then ascending neuron order, so results do not
//! depend on how work is scheduled.

use std::fs;
use std::io::{self, Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"CEBA";
pub const FORMAT_VERSION: u32 = 1;
/// Activations at or below this magnitude do not count as active.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("bad magic bytes, not an activation archive")]
    BadMagic,
    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt record at byte offset {0}")]
    CorruptRecord(u64),
    #[error("neuron index {0} out of range for latent dimension {1}")]
    IndexOutOfRange(u32, u32),
    #[error("non-finite activation value")]
    NonFiniteValue,
    #[error("neuron indices not strictly increasing within a token")]
    UnsortedIndices,
    #[error("pair_ids not strictly increasing at pair_id {0}")]
    UnsortedPairs(u32),
    #[error("story has no tokens")]
    EmptyStory,
    #[error("archive has no pairs")]
    EmptyArchive,
    #[error("latent dimension must be positive")]
    ZeroLatentDim,
    #[error("sae label longer than {} bytes", u16::MAX)]
    LabelTooLong,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Active latents for one token, sorted by neuron index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenActivation {
    entries: Vec<(u32, f32)>,
}

impl TokenActivation {
    /// Builds a token from `(neuron_index, value)` entries, which must be
    /// strictly increasing in index and finite.
    pub fn new(entries: Vec<(u32, f32)>) -> Result<Self, StoreError> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(StoreError::UnsortedIndices);
        }
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(StoreError::NonFiniteValue);
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(u32, f32)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoryActivations {
    pub tokens: Vec<TokenActivation>,
}

impl StoryActivations {
    pub fn new(tokens: Vec<TokenActivation>) -> Self {
        Self { tokens }
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub pair_id: u32,
    pub story_1: StoryActivations,
    pub story_2: StoryActivations,
}

/// All latent activations one SAE produced over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationArchive {
    latent_dim: u32,
    sae_label: String,
    records: Vec<PairRecord>,
}

impl ActivationArchive {
    pub fn new(
        latent_dim: u32,
        sae_label: impl Into<String>,
        records: Vec<PairRecord>,
    ) -> Result<Self, StoreError> {
        let archive = Self {
            latent_dim,
            sae_label: sae_label.into(),
            records,
        };
        archive.validate()?;
        Ok(archive)
    }

    fn validate(&self) -> Result<(), StoreError> {
        if self.latent_dim == 0 {
            return Err(StoreError::ZeroLatentDim);
        }
        if self.sae_label.len() > u16::MAX as usize {
            return Err(StoreError::LabelTooLong);
        }
        for w in self.records.windows(2) {
            if w[0].pair_id >= w[1].pair_id {
                return Err(StoreError::UnsortedPairs(w[1].pair_id));
            }
        }
        for record in &self.records {
            for story in [&record.story_1, &record.story_2] {
                if story.tokens.is_empty() {
                    return Err(StoreError::EmptyStory);
                }
                for token in &story.tokens {
                    if let Some(&(idx, _)) = token.entries.last() {
                        if idx >= self.latent_dim {
                            return Err(StoreError::IndexOutOfRange(idx, self.latent_dim));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim as usize
    }

    pub fn sae_label(&self) -> &str {
        &self.sae_label
    }

    pub fn records(&self) -> &[PairRecord] {
        &self.records
    }

    pub fn pair_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.records.iter().map(|r| r.pair_id)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        // writes into a Vec cannot fail
        out.write_u32::<LittleEndian>(FORMAT_VERSION).unwrap();
        out.write_u32::<LittleEndian>(self.latent_dim).unwrap();
        out.write_u32::<LittleEndian>(self.records.len() as u32).unwrap();
        out.write_u16::<LittleEndian>(self.sae_label.len() as u16).unwrap();
        out.extend_from_slice(self.sae_label.as_bytes());
        for record in &self.records {
            out.write_u32::<LittleEndian>(record.pair_id).unwrap();
            for story in [&record.story_1, &record.story_2] {
                out.write_u32::<LittleEndian>(story.tokens.len() as u32).unwrap();
                for token in &story.tokens {
                    out.write_u32::<LittleEndian>(token.entries.len() as u32).unwrap();
                    for &(idx, value) in &token.entries {
                        out.write_u32::<LittleEndian>(idx).unwrap();
                        out.write_f32::<LittleEndian>(value).unwrap();
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(|_| StoreError::BadMagic)?;
        if &magic != MAGIC {
            return Err(StoreError::BadMagic);
        }
        let version = read_u32(&mut cur)?;
        if version != FORMAT_VERSION {
            return Err(StoreError::UnsupportedVersion(version));
        }
        let latent_dim = read_u32(&mut cur)?;
        if latent_dim == 0 {
            return Err(StoreError::ZeroLatentDim);
        }
        let pair_count = read_u32(&mut cur)?;
        let label_offset = cur.position();
        let label_len = cur
            .read_u16::<LittleEndian>()
            .map_err(|_| StoreError::CorruptRecord(label_offset))?;
        let mut label = vec![0u8; label_len as usize];
        cur.read_exact(&mut label)
            .map_err(|_| StoreError::CorruptRecord(label_offset))?;
        let sae_label =
            String::from_utf8(label).map_err(|_| StoreError::CorruptRecord(label_offset))?;

        let mut records = Vec::new();
        let mut prev_id: Option<u32> = None;
        for _ in 0..pair_count {
            let offset = cur.position();
            let pair_id = read_u32(&mut cur)?;
            if prev_id.is_some_and(|p| p >= pair_id) {
                return Err(StoreError::CorruptRecord(offset));
            }
            prev_id = Some(pair_id);
            let story_1 = read_story(&mut cur, latent_dim)?;
            let story_2 = read_story(&mut cur, latent_dim)?;
            records.push(PairRecord {
                pair_id,
                story_1,
                story_2,
            });
        }
        if cur.position() != bytes.len() as u64 {
            return Err(StoreError::CorruptRecord(cur.position()));
        }
        Ok(Self {
            latent_dim,
            sae_label,
            records,
        })
    }
}

fn read_u32(cur: &mut Cursor<&[u8]>) -> Result<u32, StoreError> {
    let offset = cur.position();
    cur.read_u32::<LittleEndian>()
        .map_err(|_| StoreError::CorruptRecord(offset))
}

fn read_story(cur: &mut Cursor<&[u8]>, latent_dim: u32) -> Result<StoryActivations, StoreError> {
    let offset = cur.position();
    let token_count = read_u32(cur)?;
    if token_count == 0 {
        return Err(StoreError::CorruptRecord(offset));
    }
    let remaining = cur.get_ref().len() as u64 - cur.position();
    // each token needs at least its nnz word
    if token_count as u64 * 4 > remaining {
        return Err(StoreError::CorruptRecord(offset));
    }
    let mut tokens = Vec::with_capacity(token_count as usize);
    for _ in 0..token_count {
        let token_offset = cur.position();
        let nnz = read_u32(cur)?;
        let remaining = cur.get_ref().len() as u64 - cur.position();
        if nnz as u64 * 8 > remaining {
            return Err(StoreError::CorruptRecord(token_offset));
        }
        let mut entries = Vec::with_capacity(nnz as usize);
        for _ in 0..nnz {
            let entry_offset = cur.position();
            let idx = read_u32(cur)?;
            let value = cur
                .read_f32::<LittleEndian>()
                .map_err(|_| StoreError::CorruptRecord(entry_offset))?;
            if idx >= latent_dim {
                return Err(StoreError::IndexOutOfRange(idx, latent_dim));
            }
            if !value.is_finite() {
                return Err(StoreError::NonFiniteValue);
            }
            if entries.last().is_some_and(|&(prev, _)| prev >= idx) {
                return Err(StoreError::CorruptRecord(entry_offset));
            }
            entries.push((idx, value));
        }
        tokens.push(TokenActivation { entries });
    }
    Ok(StoryActivations { tokens })
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<ActivationArchive, StoreError> {
    let bytes = fs::read(path)?;
    ActivationArchive::from_bytes(&bytes)
}

pub fn write_archive(archive: &ActivationArchive, path: impl AsRef<Path>) -> Result<(), StoreError> {
    fs::write(path, archive.to_bytes())?;
    Ok(())
}

/// Dense mean activation vector of one story.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSummary(pub Vec<f64>);

impl ActivationSummary {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Mean activation of every neuron across the story's tokens, absent entries
/// counting as zero.
pub fn story_mean(story: &StoryActivations, latent_dim: usize) -> Result<ActivationSummary, StoreError> {
    Ok(ActivationSummary(sparse_story_mean(story)?.to_dense(latent_dim)))
}

/// Sparse story mean: only neurons that fired at least once are stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMean {
    /// `(neuron_index, mean)` sorted by index.
    pub entries: Vec<(u32, f64)>,
}

impl SparseMean {
    pub fn to_dense(&self, latent_dim: usize) -> Vec<f64> {
        let mut dense = vec![0.0; latent_dim];
        for &(idx, v) in &self.entries {
            dense[idx as usize] = v;
        }
        dense
    }
}

/// Same arithmetic as [`story_mean`] without materialising `d` zeros.
pub fn sparse_story_mean(story: &StoryActivations) -> Result<SparseMean, StoreError> {
    if story.tokens.is_empty() {
        return Err(StoreError::EmptyStory);
    }
    // Per-neuron running sums in token order. A BTreeMap keeps the result
    // sorted; per-neuron addition order is token order, as in the dense path.
    let mut sums: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
    for token in &story.tokens {
        for &(idx, v) in &token.entries {
            *sums.entry(idx).or_insert(0.0) += v as f64;
        }
    }
    let n = story.tokens.len() as f64;
    Ok(SparseMean {
        entries: sums.into_iter().map(|(idx, s)| (idx, s / n)).collect(),
    })
}

/// Mean active fraction per token over both stories of every pair.
///
/// A latent is active when `|value| > epsilon`. The result lies in `[0, 1]`.
pub fn archive_sparsity(archive: &ActivationArchive, epsilon: f64) -> Result<f64, StoreError> {
    if archive.is_empty() {
        return Err(StoreError::EmptyArchive);
    }
    let d = archive.latent_dim() as f64;
    let mut total = 0.0;
    let mut tokens = 0usize;
    for record in archive.records() {
        for story in [&record.story_1, &record.story_2] {
            for token in &story.tokens {
                let active = token
                    .entries
                    .iter()
                    .filter(|(_, v)| (*v as f64).abs() > epsilon)
                    .count();
                total += active as f64 / d;
                tokens += 1;
            }
        }
    }
    Ok(total / tokens as f64)
}
