//! Contrastive and independence scores, pooling, and the sparsity-aware
//! interpretability score.
//!
//! For each pair the story means `V1`, `V2` give a contrastive row
//! `|V1 - V2|` and an independence row `|I1 - I_avg|`, where `I1 = V1 + V2`
//! and `I_avg` is the mean `I1` over all pairs. Each neuron is min-max
//! normalised across pairs, each pair's row is pooled to a scalar, and the
//! pooled values are averaged over pairs. The final score is
//! `C + I - alpha * S`.
//!
//! The archive is processed in two passes. Pass one computes sparse story
//! means per pair. Pass two rebuilds dense rows one pair at a time: first to
//! collect per-neuron min/max, then to normalise and pool. Only `O(d)` dense
//! state is alive per worker, and every reduction that depends on order runs
//! sequentially in ascending pair order, so results are bit-identical for any
//! thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::{self, ActivationArchive, ActivationSummary, SparseMean, StoreError};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no input rows")]
    EmptyInput,
    #[error("cannot pool an empty vector")]
    EmptyVector,
    #[error("pair_id {0} not present in archive")]
    UnknownPair(u32),
    #[error("invalid score config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// How a neuron-score row is reduced to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Max,
    Mean,
    /// Number of entries further than one population standard deviation from
    /// the row mean.
    #[serde(rename = "outlier1sigma")]
    OutlierCount1Sigma,
}

impl Pooling {
    pub const ALL: [Pooling; 3] = [Pooling::Max, Pooling::Mean, Pooling::OutlierCount1Sigma];

    pub fn name(self) -> &'static str {
        match self {
            Pooling::Max => "max",
            Pooling::Mean => "mean",
            Pooling::OutlierCount1Sigma => "outlier1sigma",
        }
    }
}

impl std::str::FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Pooling::Max),
            "mean" => Ok(Pooling::Mean),
            "outlier1sigma" | "outlier_count_1sigma" => Ok(Pooling::OutlierCount1Sigma),
            other => Err(format!("unknown pooling strategy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub alpha: f64,
    pub pooling: Pooling,
    pub epsilon: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            pooling: Pooling::Max,
            epsilon: store::DEFAULT_EPSILON,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<(), ScoringError> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(ScoringError::InvalidConfig(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(ScoringError::InvalidConfig(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Thread usage for [`evaluate_sae_with`]. Results do not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    /// Rayon's global pool.
    #[default]
    Global,
    Threads(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Contrastive,
    Independence,
}

/// Per-neuron scores of one kind for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronScoreVector {
    pub pair_id: u32,
    pub kind: ScoreKind,
    pub values: Vec<f64>,
}

/// `|V1 - V2|`, element-wise.
pub fn raw_contrast(v1: &ActivationSummary, v2: &ActivationSummary) -> Result<Vec<f64>, ScoringError> {
    if v1.len() != v2.len() {
        return Err(ScoringError::DimensionMismatch(v1.len(), v2.len()));
    }
    Ok(v1.0.iter().zip(&v2.0).map(|(a, b)| (a - b).abs()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceBasis {
    /// `I1 = V1 + V2` for each pair, in input order.
    pub per_pair: Vec<Vec<f64>>,
    /// Mean of `I1` over pairs.
    pub average: Vec<f64>,
}

/// Builds `I1` for each pair and their mean. Pairs must be in ascending
/// pair_id order for the mean to be reproducible.
pub fn independence_basis(
    summaries: &[(ActivationSummary, ActivationSummary)],
) -> Result<IndependenceBasis, ScoringError> {
    let d = summaries.first().ok_or(ScoringError::EmptyInput)?.0.len();
    let mut per_pair = Vec::with_capacity(summaries.len());
    let mut sum = vec![0.0; d];
    for (v1, v2) in summaries {
        for v in [v1, v2] {
            if v.len() != d {
                return Err(ScoringError::DimensionMismatch(d, v.len()));
            }
        }
        let i1: Vec<f64> = v1.0.iter().zip(&v2.0).map(|(a, b)| a + b).collect();
        for (s, x) in sum.iter_mut().zip(&i1) {
            *s += x;
        }
        per_pair.push(i1);
    }
    let n = summaries.len() as f64;
    let average = sum.into_iter().map(|s| s / n).collect();
    Ok(IndependenceBasis { per_pair, average })
}

/// `|I1 - I_avg|`, element-wise.
pub fn raw_independence(i1: &[f64], average: &[f64]) -> Result<Vec<f64>, ScoringError> {
    if i1.len() != average.len() {
        return Err(ScoringError::DimensionMismatch(i1.len(), average.len()));
    }
    Ok(i1.iter().zip(average).map(|(a, b)| (a - b).abs()).collect())
}

#[inline]
fn min_max_scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Min-max normalises every neuron (column) across the given rows.
/// Constant columns map to zero.
pub fn normalize_per_neuron(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ScoringError> {
    let d = rows.first().ok_or(ScoringError::EmptyInput)?.len();
    let mut stats = ColumnStats::new(d);
    for row in rows {
        if row.len() != d {
            return Err(ScoringError::DimensionMismatch(d, row.len()));
        }
        stats.observe(row);
    }
    Ok(rows.iter().map(|row| stats.normalize(row)).collect())
}

/// Reduces a row to a scalar with the given strategy.
pub fn pool(values: &[f64], strategy: Pooling) -> Result<f64, ScoringError> {
    if values.is_empty() {
        return Err(ScoringError::EmptyVector);
    }
    Ok(match strategy {
        Pooling::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Pooling::Mean => mean(values),
        Pooling::OutlierCount1Sigma => {
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if lo == hi {
                // rounding in the mean would otherwise invent deviations
                return Ok(0.0);
            }
            let mu = mean(values);
            let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64;
            let sigma = var.sqrt();
            values.iter().filter(|v| (*v - mu).abs() > sigma).count() as f64
        }
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone)]
struct ColumnStats {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl ColumnStats {
    fn new(d: usize) -> Self {
        Self {
            min: vec![f64::INFINITY; d],
            max: vec![f64::NEG_INFINITY; d],
        }
    }

    fn observe(&mut self, row: &[f64]) {
        for ((lo, hi), &v) in self.min.iter_mut().zip(self.max.iter_mut()).zip(row) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.min.iter_mut().zip(other.min) {
            *a = a.min(b);
        }
        for (a, b) in self.max.iter_mut().zip(other.max) {
            *a = a.max(b);
        }
        self
    }

    fn normalize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| min_max_scale(v, self.min[j], self.max[j]))
            .collect()
    }
}

/// Pooled scores for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pair_id: u32,
    pub contrastive: f64,
    pub independence: f64,
    /// Neuron with the highest normalised contrastive score.
    pub argmax_contrastive: u32,
    /// Neuron with the highest normalised independence score.
    pub argmax_independence: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SAEEvaluation {
    pub sae_label: String,
    pub latent_dim: usize,
    pub contrastive_agg: f64,
    pub independence_agg: f64,
    pub sparsity: f64,
    pub interpretability: f64,
    pub config: ScoreConfig,
    pub per_pair: Vec<PairScore>,
}

impl SAEEvaluation {
    /// `C + I - alpha * S` for a different alpha.
    pub fn rescored(&self, alpha: f64) -> f64 {
        self.contrastive_agg + self.independence_agg - alpha * self.sparsity
    }
}

struct PairMeans {
    pair_id: u32,
    v1: SparseMean,
    v2: SparseMean,
}

/// Pass-one state for an archive: sparse story means, `I_avg`, and the
/// per-neuron ranges of both raw score kinds.
pub struct PreparedArchive {
    latent_dim: usize,
    pairs: Vec<PairMeans>,
    independence_avg: Vec<f64>,
    contrast_stats: ColumnStats,
    independence_stats: ColumnStats,
}

/// Neuron-wise scores of one pair, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PairNeuronScores {
    pub contrastive: NeuronScoreVector,
    pub independence: NeuronScoreVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeuronScale {
    #[default]
    Normalized,
    /// Before min-max normalisation.
    Raw,
}

impl PreparedArchive {
    pub fn new(archive: &ActivationArchive, parallelism: Parallelism) -> Result<Self, ScoringError> {
        with_parallelism(parallelism, |parallel| Self::build(archive, parallel))
    }

    fn build(archive: &ActivationArchive, parallel: bool) -> Result<Self, ScoringError> {
        if archive.is_empty() {
            return Err(StoreError::EmptyArchive.into());
        }
        let d = archive.latent_dim();
        let pairs: Vec<PairMeans> = map_ordered(parallel, archive.records(), |r| {
            Ok::<_, ScoringError>(PairMeans {
                pair_id: r.pair_id,
                v1: store::sparse_story_mean(&r.story_1)?,
                v2: store::sparse_story_mean(&r.story_2)?,
            })
        })
        .into_iter()
        .collect::<Result<_, _>>()?;

        // Ascending pair order; per neuron this adds the same terms in the
        // same order as a dense accumulation (adding 0.0 is exact).
        let mut sum = vec![0.0; d];
        let mut scratch = DenseScratch::new(d);
        for p in &pairs {
            scratch.load(p);
            for (s, (a, b)) in sum.iter_mut().zip(scratch.v1.iter().zip(&scratch.v2)) {
                *s += a + b;
            }
        }
        let n = pairs.len() as f64;
        let independence_avg: Vec<f64> = sum.into_iter().map(|s| s / n).collect();

        let mut prepared = Self {
            latent_dim: d,
            pairs,
            independence_avg,
            contrast_stats: ColumnStats::new(d),
            independence_stats: ColumnStats::new(d),
        };
        // min/max are exact and order-free, so a parallel fold is deterministic
        let observe = |(mut cs, mut is, mut scratch): (ColumnStats, ColumnStats, DenseScratch), p: &PairMeans| {
            let (c, dv) = prepared.raw_rows_with(&mut scratch, p);
            cs.observe(&c);
            is.observe(&dv);
            (cs, is, scratch)
        };
        let init = || (ColumnStats::new(d), ColumnStats::new(d), DenseScratch::new(d));
        let (cs, is) = if parallel {
            prepared
                .pairs
                .par_iter()
                .fold(init, observe)
                .map(|(c, i, _)| (c, i))
                .reduce(
                    || (ColumnStats::new(d), ColumnStats::new(d)),
                    |(c1, i1), (c2, i2)| (c1.merge(c2), i1.merge(i2)),
                )
        } else {
            let (c, i, _) = prepared.pairs.iter().fold(init(), observe);
            (c, i)
        };
        prepared.contrast_stats = cs;
        prepared.independence_stats = is;
        Ok(prepared)
    }

    fn raw_rows_with(&self, scratch: &mut DenseScratch, p: &PairMeans) -> (Vec<f64>, Vec<f64>) {
        scratch.load(p);
        let c = scratch
            .v1
            .iter()
            .zip(&scratch.v2)
            .map(|(a, b)| (a - b).abs())
            .collect();
        let dv = scratch
            .v1
            .iter()
            .zip(&scratch.v2)
            .zip(&self.independence_avg)
            .map(|((a, b), avg)| (a + b - avg).abs())
            .collect();
        (c, dv)
    }

    fn normalized_rows_with(&self, scratch: &mut DenseScratch, p: &PairMeans) -> (Vec<f64>, Vec<f64>) {
        let (c, dv) = self.raw_rows_with(scratch, p);
        (
            self.contrast_stats.normalize(&c),
            self.independence_stats.normalize(&dv),
        )
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn independence_average(&self) -> &[f64] {
        &self.independence_avg
    }

    /// Neuron-wise contrastive and independence scores of one pair.
    pub fn pair_scores(&self, pair_id: u32, scale: NeuronScale) -> Result<PairNeuronScores, ScoringError> {
        let p = self
            .pairs
            .binary_search_by_key(&pair_id, |p| p.pair_id)
            .map(|i| &self.pairs[i])
            .map_err(|_| ScoringError::UnknownPair(pair_id))?;
        let mut scratch = DenseScratch::new(self.latent_dim);
        let (c, dv) = match scale {
            NeuronScale::Normalized => self.normalized_rows_with(&mut scratch, p),
            NeuronScale::Raw => self.raw_rows_with(&mut scratch, p),
        };
        Ok(PairNeuronScores {
            contrastive: NeuronScoreVector {
                pair_id,
                kind: ScoreKind::Contrastive,
                values: c,
            },
            independence: NeuronScoreVector {
                pair_id,
                kind: ScoreKind::Independence,
                values: dv,
            },
        })
    }

    /// Pools every pair's normalised rows, in ascending pair order.
    pub fn pooled(&self, pooling: Pooling, parallelism: Parallelism) -> Result<Vec<PairScore>, ScoringError> {
        with_parallelism(parallelism, |parallel| {
            map_ordered_with(
                parallel,
                &self.pairs,
                || DenseScratch::new(self.latent_dim),
                |scratch, p| {
                    let (c, dv) = self.normalized_rows_with(scratch, p);
                    Ok(PairScore {
                        pair_id: p.pair_id,
                        contrastive: pool(&c, pooling)?,
                        independence: pool(&dv, pooling)?,
                        argmax_contrastive: argmax(&c).unwrap_or(0) as u32,
                        argmax_independence: argmax(&dv).unwrap_or(0) as u32,
                    })
                },
            )
            .into_iter()
            .collect()
        })
    }
}

struct DenseScratch {
    v1: Vec<f64>,
    v2: Vec<f64>,
}

impl DenseScratch {
    fn new(d: usize) -> Self {
        Self {
            v1: vec![0.0; d],
            v2: vec![0.0; d],
        }
    }

    fn load(&mut self, p: &PairMeans) {
        self.v1.fill(0.0);
        self.v2.fill(0.0);
        for &(j, v) in &p.v1.entries {
            self.v1[j as usize] = v;
        }
        for &(j, v) in &p.v2.entries {
            self.v2[j as usize] = v;
        }
    }
}

fn with_parallelism<R: Send>(parallelism: Parallelism, f: impl FnOnce(bool) -> R + Send) -> R {
    match parallelism {
        Parallelism::Sequential | Parallelism::Threads(0 | 1) => f(false),
        Parallelism::Global => f(true),
        Parallelism::Threads(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| f(true)),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}), running sequentially");
                f(false)
            }
        },
    }
}

fn map_ordered<T: Sync, R: Send>(parallel: bool, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn map_ordered_with<T: Sync, S: Send, R: Send>(
    parallel: bool,
    items: &[T],
    init: impl Fn() -> S + Sync + Send,
    f: impl Fn(&mut S, &T) -> R + Sync + Send,
) -> Vec<R> {
    if parallel {
        items.par_iter().map_init(&init, &f).collect()
    } else {
        let mut state = init();
        items.iter().map(|t| f(&mut state, t)).collect()
    }
}

/// Full evaluation of one archive on rayon's global pool.
pub fn evaluate_sae(archive: &ActivationArchive, config: &ScoreConfig) -> Result<SAEEvaluation, ScoringError> {
    evaluate_sae_with(archive, config, Parallelism::Global)
}

pub fn evaluate_sae_with(
    archive: &ActivationArchive,
    config: &ScoreConfig,
    parallelism: Parallelism,
) -> Result<SAEEvaluation, ScoringError> {
    config.validate()?;
    let prepared = PreparedArchive::new(archive, parallelism)?;
    let per_pair = prepared.pooled(config.pooling, parallelism)?;
    evaluation_from_pooled(archive, &prepared, config, per_pair)
}

fn evaluation_from_pooled(
    archive: &ActivationArchive,
    prepared: &PreparedArchive,
    config: &ScoreConfig,
    per_pair: Vec<PairScore>,
) -> Result<SAEEvaluation, ScoringError> {
    let n = per_pair.len() as f64;
    let contrastive_agg = per_pair.iter().map(|p| p.contrastive).sum::<f64>() / n;
    let independence_agg = per_pair.iter().map(|p| p.independence).sum::<f64>() / n;
    let sparsity = store::archive_sparsity(archive, config.epsilon)?;
    Ok(SAEEvaluation {
        sae_label: archive.sae_label().to_string(),
        latent_dim: prepared.latent_dim(),
        contrastive_agg,
        independence_agg,
        sparsity,
        interpretability: contrastive_agg + independence_agg - config.alpha * sparsity,
        config: *config,
        per_pair,
    })
}

/// Evaluates one archive under several pooling strategies, sharing pass one.
pub fn evaluate_poolings(
    archive: &ActivationArchive,
    config: &ScoreConfig,
    poolings: &[Pooling],
    parallelism: Parallelism,
) -> Result<Vec<SAEEvaluation>, ScoringError> {
    config.validate()?;
    let prepared = PreparedArchive::new(archive, parallelism)?;
    poolings
        .iter()
        .map(|&pooling| {
            let cfg = ScoreConfig { pooling, ..*config };
            let per_pair = prepared.pooled(pooling, parallelism)?;
            evaluation_from_pooled(archive, &prepared, &cfg, per_pair)
        })
        .collect()
}
