//! Independent reference implementations and random fixtures shared by the
//! integration tests. Nothing here calls into the scoring path it checks.

#![allow(dead_code)]

use cebench::store::{ActivationArchive, PairRecord, StoryActivations, TokenActivation};
use cebench::{Pooling, ScoreConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct ArchiveShape {
    pub max_dim: u32,
    pub max_pairs: u32,
    pub max_tokens: u32,
}

pub const SMALL: ArchiveShape = ArchiveShape {
    max_dim: 32,
    max_pairs: 16,
    max_tokens: 8,
};

fn random_token(rng: &mut ChaCha8Rng, d: u32, density: f64, signed: bool) -> TokenActivation {
    let mut entries = Vec::new();
    for j in 0..d {
        if rng.gen::<f64>() < density {
            let v: f32 = match rng.gen_range(0..10) {
                0 => 0.0,
                1 => rng.gen_range(0.0..1e-6),
                _ => rng.gen_range(0.0..4.0),
            };
            let v = if signed && rng.gen_bool(0.2) { -v } else { v };
            entries.push((j, v));
        }
    }
    TokenActivation::new(entries).unwrap()
}

/// Random archive with occasional empty tokens, stored zeros, sub-epsilon
/// values, and gaps in pair_ids.
pub fn random_archive(seed: u64, shape: &ArchiveShape) -> ActivationArchive {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(1..=shape.max_dim);
    let pairs = rng.gen_range(1..=shape.max_pairs);
    let density = *[0.0, 0.05, 0.2, 0.5, 1.0].get(rng.gen_range(0..5)).unwrap();
    let signed = rng.gen_bool(0.2);
    let mut records = Vec::new();
    let mut pair_id = 0u32;
    for _ in 0..pairs {
        pair_id += rng.gen_range(1..=2);
        let story = |rng: &mut ChaCha8Rng| {
            let n = rng.gen_range(1..=shape.max_tokens);
            StoryActivations::new((0..n).map(|_| random_token(rng, d, density, signed)).collect())
        };
        let story_1 = story(&mut rng);
        let story_2 = story(&mut rng);
        records.push(PairRecord {
            pair_id,
            story_1,
            story_2,
        });
    }
    ActivationArchive::new(d, format!("random-{seed}"), records).unwrap()
}

fn dense_mean(story: &StoryActivations, d: usize) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = story
        .tokens
        .iter()
        .map(|t| {
            let mut row = vec![0.0; d];
            for &(j, v) in t.entries() {
                row[j as usize] = v as f64;
            }
            row
        })
        .collect();
    (0..d)
        .map(|j| {
            let mut s = 0.0;
            for row in &rows {
                s += row[j];
            }
            s / rows.len() as f64
        })
        .collect()
}

fn oracle_pool(row: &[f64], pooling: Pooling) -> f64 {
    let n = row.len() as f64;
    match pooling {
        Pooling::Max => {
            let mut m = row[0];
            for &v in row {
                if v > m {
                    m = v;
                }
            }
            m
        }
        Pooling::Mean => row.iter().sum::<f64>() / n,
        Pooling::OutlierCount1Sigma => {
            if row.iter().all(|&v| v == row[0]) {
                return 0.0;
            }
            let mu = row.iter().sum::<f64>() / n;
            let sigma = (row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
            row.iter().filter(|&&v| (v - mu).abs() > sigma).count() as f64
        }
    }
}

fn normalize_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let mut out = rows.to_vec();
    for j in 0..d {
        let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
        for (o, r) in out.iter_mut().zip(rows) {
            o[j] = if hi > lo { (r[j] - lo) / (hi - lo) } else { 0.0 };
        }
    }
    out
}

pub struct OracleEvaluation {
    pub contrastive: f64,
    pub independence: f64,
    pub sparsity: f64,
    pub interpretability: f64,
    pub pooled: Vec<(f64, f64)>,
    pub contrast_rows: Vec<Vec<f64>>,
    pub independence_rows: Vec<Vec<f64>>,
}

/// Dense, unoptimised evaluation straight from the definitions.
pub fn oracle_evaluate(archive: &ActivationArchive, cfg: &ScoreConfig) -> OracleEvaluation {
    let d = archive.latent_dim();
    let means: Vec<(Vec<f64>, Vec<f64>)> = archive
        .records()
        .iter()
        .map(|r| (dense_mean(&r.story_1, d), dense_mean(&r.story_2, d)))
        .collect();
    let c_raw: Vec<Vec<f64>> = means
        .iter()
        .map(|(a, b)| (0..d).map(|j| (a[j] - b[j]).abs()).collect())
        .collect();
    let i1: Vec<Vec<f64>> = means
        .iter()
        .map(|(a, b)| (0..d).map(|j| a[j] + b[j]).collect())
        .collect();
    let mut avg = vec![0.0; d];
    for row in &i1 {
        for j in 0..d {
            avg[j] += row[j];
        }
    }
    for a in avg.iter_mut() {
        *a /= i1.len() as f64;
    }
    let d_raw: Vec<Vec<f64>> = i1
        .iter()
        .map(|row| (0..d).map(|j| (row[j] - avg[j]).abs()).collect())
        .collect();
    let c_norm = normalize_columns(&c_raw);
    let d_norm = normalize_columns(&d_raw);
    let pooled: Vec<(f64, f64)> = c_norm
        .iter()
        .zip(&d_norm)
        .map(|(c, dd)| (oracle_pool(c, cfg.pooling), oracle_pool(dd, cfg.pooling)))
        .collect();
    let n = pooled.len() as f64;
    let contrastive = pooled.iter().map(|p| p.0).sum::<f64>() / n;
    let independence = pooled.iter().map(|p| p.1).sum::<f64>() / n;

    let mut active = 0.0;
    let mut tokens = 0.0;
    for r in archive.records() {
        for s in [&r.story_1, &r.story_2] {
            for t in &s.tokens {
                let mut dense = vec![0.0f64; d];
                for &(j, v) in t.entries() {
                    dense[j as usize] = v as f64;
                }
                active += dense.iter().filter(|v| v.abs() > cfg.epsilon).count() as f64 / d as f64;
                tokens += 1.0;
            }
        }
    }
    let sparsity = active / tokens;
    OracleEvaluation {
        contrastive,
        independence,
        sparsity,
        interpretability: contrastive + independence - cfg.alpha * sparsity,
        pooled,
        contrast_rows: c_norm,
        independence_rows: d_norm,
    }
}

/// Concordant / counted over explicitly enumerated pairs, ties excluded.
pub fn oracle_crpr(p: &[f64], r: &[f64]) -> (f64, usize) {
    let sign = |x: f64| {
        if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            0
        }
    };
    let (mut conc, mut counted, mut ties) = (0, 0, 0);
    for i in 0..p.len() {
        for j in 0..p.len() {
            if i >= j {
                continue;
            }
            let s = sign(p[i] - p[j]) * sign(r[i] - r[j]);
            match s {
                0 => ties += 1,
                1 => {
                    conc += 1;
                    counted += 1
                }
                _ => counted += 1,
            }
        }
    }
    let ratio = if counted == 0 {
        1.0
    } else {
        conc as f64 / counted as f64
    };
    (ratio, ties)
}

/// Rank = 1 + #smaller + (#equal - 1) / 2, by counting.
pub fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let eq = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + less + (eq - 1.0) / 2.0
        })
        .collect()
}

/// Pearson via raw sums: (n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2)(n Syy - Sy^2)).
pub fn oracle_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return None;
    }
    Some((n * sxy - sx * sy) / den)
}

/// Tie-free lists use `1 - 6 sum d^2 / (n (n^2 - 1))`; otherwise the
/// Pearson correlation of average ranks.
pub fn oracle_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.iter().all(|&v| v == x[0]) || y.iter().all(|&v| v == y[0]) {
        return None;
    }
    let rx = oracle_ranks(x);
    let ry = oracle_ranks(y);
    let tie_free = |r: &[f64]| r.iter().all(|v| v.fract() == 0.0) && {
        let mut s = r.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).all(|w| w[0] != w[1])
    };
    if tie_free(&rx) && tie_free(&ry) {
        let n = x.len() as f64;
        let sd2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        Some(1.0 - 6.0 * sd2 / (n * (n * n - 1.0)))
    } else {
        oracle_pearson(&rx, &ry)
    }
}

/// Applies a neuron permutation to every token.
pub fn permute_neurons(archive: &ActivationArchive, perm: &[u32]) -> ActivationArchive {
    let map_story = |s: &StoryActivations| {
        StoryActivations::new(
            s.tokens
                .iter()
                .map(|t| {
                    let mut e: Vec<(u32, f32)> =
                        t.entries().iter().map(|&(j, v)| (perm[j as usize], v)).collect();
                    e.sort_by_key(|x| x.0);
                    TokenActivation::new(e).unwrap()
                })
                .collect(),
        )
    };
    let records = archive
        .records()
        .iter()
        .map(|r| PairRecord {
            pair_id: r.pair_id,
            story_1: map_story(&r.story_1),
            story_2: map_story(&r.story_2),
        })
        .collect();
    ActivationArchive::new(archive.latent_dim() as u32, archive.sae_label(), records).unwrap()
}

pub fn swap_stories(archive: &ActivationArchive) -> ActivationArchive {
    let records = archive
        .records()
        .iter()
        .map(|r| PairRecord {
            pair_id: r.pair_id,
            story_1: r.story_2.clone(),
            story_2: r.story_1.clone(),
        })
        .collect();
    ActivationArchive::new(archive.latent_dim() as u32, archive.sae_label(), records).unwrap()
}

/// Every token repeated in place (`[a, b]` becomes `[a, a, b, b]`).
pub fn duplicate_tokens(archive: &ActivationArchive) -> ActivationArchive {
    let dup = |s: &StoryActivations| {
        StoryActivations::new(s.tokens.iter().flat_map(|t| [t.clone(), t.clone()]).collect())
    };
    let records = archive
        .records()
        .iter()
        .map(|r| PairRecord {
            pair_id: r.pair_id,
            story_1: dup(&r.story_1),
            story_2: dup(&r.story_2),
        })
        .collect();
    ActivationArchive::new(archive.latent_dim() as u32, archive.sae_label(), records).unwrap()
}

pub fn random_permutation(rng: &mut ChaCha8Rng, d: usize) -> Vec<u32> {
    use rand::seq::SliceRandom;
    let mut p: Vec<u32> = (0..d as u32).collect();
    p.shuffle(rng);
    p
}
