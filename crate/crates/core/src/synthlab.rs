//! Synthetic activation archives with planted contrast.
//!
//! Each pair has one designated neuron that fires in every token of story 1
//! with mean `contrast_strength` and never in story 2 (one-sided plant).
//! Every neuron additionally fires as background in both stories with
//! probability `background_density` and magnitude `noise_scale * u`,
//! `u ~ U[0, 1)`. The planted value is jittered by `noise_scale * (2u - 1)`
//! and clamped at zero.
//!
//! Randomness comes from ChaCha8 seeded with `seed` via
//! `SeedableRng::seed_from_u64`. The stream is consumed in a fixed pattern
//! whatever the `PlantSpec` values: for each pair, story, token and neuron two draws
//! (fire, magnitude), plus a third jitter draw at the planted neuron. Archives
//! that differ only in `contrast_strength` therefore share every random draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{ActivationArchive, PairRecord, StoryActivations, TokenActivation};

/// Recorded in every generated archive's label.
pub const GENERATOR_ID: &str = "chacha8-seed_from_u64";

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid plant spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub latent_dim: u32,
    pub pair_count: u32,
    pub tokens_per_story: u32,
    /// Contrast neuron of each pair, `pair_count` entries.
    pub planted_neurons: Vec<u32>,
    pub contrast_strength: f64,
    pub noise_scale: f64,
    pub background_density: f64,
    pub seed: u64,
}

impl PlantSpec {
    /// Spec whose planted neurons cycle through `0..latent_dim`.
    pub fn round_robin(latent_dim: u32, pair_count: u32, tokens_per_story: u32, seed: u64) -> Self {
        Self {
            latent_dim,
            pair_count,
            tokens_per_story,
            planted_neurons: (0..pair_count).map(|i| i % latent_dim.max(1)).collect(),
            contrast_strength: 1.0,
            noise_scale: 0.0,
            background_density: 0.0,
            seed,
        }
    }

    pub fn with_strength(mut self, contrast_strength: f64) -> Self {
        self.contrast_strength = contrast_strength;
        self
    }

    pub fn with_noise(mut self, noise_scale: f64, background_density: f64) -> Self {
        self.noise_scale = noise_scale;
        self.background_density = background_density;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |s: String| Err(SynthError::InvalidSpec(s));
        if self.latent_dim == 0 {
            return invalid("latent_dim must be positive".into());
        }
        if self.pair_count == 0 {
            return invalid("pair_count must be positive".into());
        }
        if self.tokens_per_story == 0 {
            return invalid("tokens_per_story must be positive".into());
        }
        if self.planted_neurons.len() != self.pair_count as usize {
            return invalid(format!(
                "{} planted neurons for {} pairs",
                self.planted_neurons.len(),
                self.pair_count
            ));
        }
        if let Some(&j) = self.planted_neurons.iter().find(|&&j| j >= self.latent_dim) {
            return invalid(format!("planted neuron {j} >= latent_dim {}", self.latent_dim));
        }
        if !(self.contrast_strength.is_finite() && self.contrast_strength >= 0.0) {
            return invalid("contrast_strength must be finite and >= 0".into());
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return invalid("noise_scale must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.background_density) {
            return invalid("background_density must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!(
            "synthlab/{GENERATOR_ID}/seed={}/strength={}",
            self.seed, self.contrast_strength
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedGroundTruth {
    pub spec: PlantSpec,
    /// Position in the intended interpretability ordering, 0 = least.
    pub expected_rank: usize,
}

pub fn generate_planted_archive(
    spec: &PlantSpec,
) -> Result<(ActivationArchive, PlantedGroundTruth), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.latent_dim;
    let mut records = Vec::with_capacity(spec.pair_count as usize);
    for (pair_id, &planted) in spec.planted_neurons.iter().enumerate() {
        let mut stories = [Vec::new(), Vec::new()];
        for (story_idx, tokens) in stories.iter_mut().enumerate() {
            for _ in 0..spec.tokens_per_story {
                let mut entries = Vec::new();
                for j in 0..d {
                    let fire: f64 = rng.gen();
                    let magnitude: f64 = rng.gen();
                    let jitter: f64 = if j == planted { rng.gen() } else { 0.0 };
                    let mut value = 0.0;
                    if fire < spec.background_density {
                        value += spec.noise_scale * magnitude;
                    }
                    if j == planted && story_idx == 0 {
                        value += (spec.contrast_strength + spec.noise_scale * (2.0 * jitter - 1.0)).max(0.0);
                    }
                    let value = value as f32;
                    if value != 0.0 {
                        entries.push((j, value));
                    }
                }
                tokens.push(TokenActivation::new(entries).expect("ascending finite entries"));
            }
        }
        let [s1, s2] = stories;
        records.push(PairRecord {
            pair_id: pair_id as u32,
            story_1: StoryActivations::new(s1),
            story_2: StoryActivations::new(s2),
        });
    }
    let archive = ActivationArchive::new(d, spec.label(), records)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    Ok((
        archive,
        PlantedGroundTruth {
            spec: spec.clone(),
            expected_rank: 0,
        },
    ))
}

/// One archive per strength, all sharing `base`'s seed so only the planted
/// strength differs. `expected_rank` follows the strength order.
pub fn generate_suite(
    base: &PlantSpec,
    strengths: &[f64],
) -> Result<Vec<(ActivationArchive, PlantedGroundTruth)>, SynthError> {
    if strengths.len() < 2 {
        return Err(SynthError::InvalidSpec("need at least 2 strengths".into()));
    }
    if strengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SynthError::InvalidSpec("strengths not ascending".into()));
    }
    strengths
        .iter()
        .enumerate()
        .map(|(rank, &s)| {
            let (archive, mut truth) = generate_planted_archive(&base.clone().with_strength(s))?;
            truth.expected_rank = rank;
            Ok((archive, truth))
        })
        .collect()
}
