//! Agreement between predicted and reference interpretability scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("need at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("zero variance in {0} scores")]
    ZeroVariance(&'static str),
    #[error("non-finite score for model '{0}'")]
    NonFinite(String),
    #[error("no alpha candidates given")]
    NoCandidates,
    #[error("{0} component rows but {1} reference scores")]
    LengthMismatch(usize, usize),
}

/// One model's predicted and reference score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredModel {
    pub label: String,
    pub predicted: f64,
    pub reference: f64,
}

impl ScoredModel {
    pub fn new(label: impl Into<String>, predicted: f64, reference: f64) -> Self {
        Self {
            label: label.into(),
            predicted,
            reference,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub crpr: f64,
    pub spearman: f64,
    pub pearson: f64,
    pub n: usize,
    pub ties_excluded: usize,
}

fn check(models: &[ScoredModel]) -> Result<(), AlignmentError> {
    if models.len() < 2 {
        return Err(AlignmentError::TooFewModels(models.len()));
    }
    if let Some(m) = models
        .iter()
        .find(|m| !m.predicted.is_finite() || !m.reference.is_finite())
    {
        return Err(AlignmentError::NonFinite(m.label.clone()));
    }
    Ok(())
}

fn series(models: &[ScoredModel]) -> (Vec<f64>, Vec<f64>) {
    models.iter().map(|m| (m.predicted, m.reference)).unzip()
}

/// Correct Ranking Pair Ratio: the fraction of model pairs ordered the same
/// way by both scores.
///
/// Pairs tied in either score are left out of both counts and reported as
/// the second value. If every pair is tied the ratio is 1.0.
pub fn crpr(models: &[ScoredModel]) -> Result<(f64, usize), AlignmentError> {
    check(models)?;
    let mut concordant = 0usize;
    let mut counted = 0usize;
    let mut ties = 0usize;
    for (i, a) in models.iter().enumerate() {
        for b in &models[i + 1..] {
            let dp = a.predicted.partial_cmp(&b.predicted).unwrap();
            let dr = a.reference.partial_cmp(&b.reference).unwrap();
            if dp.is_eq() || dr.is_eq() {
                ties += 1;
                continue;
            }
            counted += 1;
            if dp == dr {
                concordant += 1;
            }
        }
    }
    let ratio = if counted == 0 {
        1.0
    } else {
        concordant as f64 / counted as f64
    };
    Ok((ratio, ties))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn product_moment(x: &[f64], y: &[f64]) -> Result<f64, AlignmentError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(AlignmentError::ZeroVariance("predicted"));
    }
    if syy == 0.0 {
        return Err(AlignmentError::ZeroVariance("reference"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Spearman's rank correlation, computed as the Pearson correlation of
/// average ranks (identical to the `1 - 6 sum d^2 / (n (n^2 - 1))` form when
/// there are no ties).
pub fn spearman(models: &[ScoredModel]) -> Result<f64, AlignmentError> {
    check(models)?;
    let (p, r) = series(models);
    if is_constant(&p) {
        return Err(AlignmentError::ZeroVariance("predicted"));
    }
    if is_constant(&r) {
        return Err(AlignmentError::ZeroVariance("reference"));
    }
    product_moment(&average_ranks(&p), &average_ranks(&r))
}

/// Pearson product-moment correlation of the raw scores.
pub fn pearson(models: &[ScoredModel]) -> Result<f64, AlignmentError> {
    check(models)?;
    let (p, r) = series(models);
    if is_constant(&p) {
        return Err(AlignmentError::ZeroVariance("predicted"));
    }
    if is_constant(&r) {
        return Err(AlignmentError::ZeroVariance("reference"));
    }
    product_moment(&p, &r)
}

/// All three metrics at once.
pub fn align(models: &[ScoredModel]) -> Result<AlignmentReport, AlignmentError> {
    let (crpr, ties_excluded) = crpr(models)?;
    Ok(AlignmentReport {
        crpr,
        spearman: spearman(models)?,
        pearson: pearson(models)?,
        n: models.len(),
        ties_excluded,
    })
}

/// The score components of one SAE, enough to recompute `C + I - alpha * S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    pub label: String,
    pub contrastive: f64,
    pub independence: f64,
    pub sparsity: f64,
}

impl ComponentScores {
    pub fn interpretability(&self, alpha: f64) -> f64 {
        self.contrastive + self.independence - alpha * self.sparsity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub report: AlignmentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best_alpha: f64,
    pub rows: Vec<AlphaRow>,
}

/// Picks the row with the highest CRPR, then the highest Spearman, then the
/// smallest alpha.
pub fn select_best(rows: &[AlphaRow]) -> Option<&AlphaRow> {
    rows.iter().reduce(|best, row| {
        let better = row
            .report
            .crpr
            .total_cmp(&best.report.crpr)
            .then(row.report.spearman.total_cmp(&best.report.spearman))
            .then(best.alpha.total_cmp(&row.alpha));
        if better.is_gt() {
            row
        } else {
            best
        }
    })
}

/// Scores every alpha candidate against `reference` (index-aligned with
/// `components`). Rows are returned in candidate order.
pub fn grid_search_alpha(
    components: &[ComponentScores],
    reference: &[f64],
    candidates: &[f64],
) -> Result<GridSearch, AlignmentError> {
    if components.len() != reference.len() {
        return Err(AlignmentError::LengthMismatch(components.len(), reference.len()));
    }
    if candidates.is_empty() {
        return Err(AlignmentError::NoCandidates);
    }
    let rows = candidates
        .iter()
        .map(|&alpha| {
            let models: Vec<ScoredModel> = components
                .iter()
                .zip(reference)
                .map(|(c, &r)| ScoredModel::new(c.label.clone(), c.interpretability(alpha), r))
                .collect();
            Ok(AlphaRow {
                alpha,
                report: align(&models)?,
            })
        })
        .collect::<Result<Vec<_>, AlignmentError>>()?;
    let best_alpha = select_best(&rows).map(|r| r.alpha).unwrap_or(candidates[0]);
    Ok(GridSearch { best_alpha, rows })
}
