//! Run reports and the operations behind each CLI subcommand.
//!
//! Reports are JSON (schema version [`SCHEMA_VERSION`]) with all floats at
//! 17 significant digits. Reference scores are a JSON object mapping
//! `sae_label` to a number.

pub mod json;
pub mod plot;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{self, AlignmentError, AlignmentReport, ComponentScores, GridSearch, ScoredModel};
use crate::corpus::{ContrastiveCorpus, CorpusError};
use crate::scoring::{
    self, NeuronScale, Parallelism, Pooling, PreparedArchive, SAEEvaluation, ScoreConfig, ScoringError,
};
use crate::store::{self, ActivationArchive, StoreError};
use crate::synthlab::SynthError;

pub use plot::{emit_pair_diagnostics, PairDiagnostics};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Store { path: String, source: StoreError },
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("archive '{sae_label}' references pair_ids absent from the corpus: {missing:?}")]
    PairMismatch { sae_label: String, missing: Vec<u32> },
    #[error("duplicate sae_label '{0}'")]
    DuplicateLabel(String),
    #[error("no evaluation labelled '{0}' in report")]
    UnknownSae(String),
    #[error("invalid input {path}: {reason}")]
    InvalidInput { path: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("serialization failed: {0}")]
    Serialize(serde_json::Error),
}

impl ReportError {
    /// Stable machine-readable name of the error.
    pub fn kind(&self) -> &'static str {
        match self {
            ReportError::Corpus(e) => match e {
                CorpusError::MissingFile(_) => "MissingFile",
                CorpusError::MalformedRecord { .. } => "MalformedRecord",
                CorpusError::DuplicatePairId(_) => "DuplicatePairId",
                CorpusError::NonContiguousIds { .. } => "NonContiguousIds",
                CorpusError::EmptyCorpus => "EmptyCorpus",
            },
            ReportError::Store { source, .. } => match source {
                StoreError::BadMagic => "BadMagic",
                StoreError::UnsupportedVersion(_) => "UnsupportedVersion",
                StoreError::CorruptRecord(_) => "CorruptRecord",
                StoreError::IndexOutOfRange(..) => "IndexOutOfRange",
                StoreError::NonFiniteValue => "NonFiniteValue",
                StoreError::Io(_) => "MissingFile",
                _ => "InvalidArchive",
            },
            ReportError::Scoring(ScoringError::UnknownPair(_)) => "UnknownPair",
            ReportError::Scoring(_) => "ScoringError",
            ReportError::Alignment(AlignmentError::TooFewModels(_)) => "TooFewModels",
            ReportError::Alignment(AlignmentError::ZeroVariance(_)) => "ZeroVariance",
            ReportError::Alignment(_) => "AlignmentError",
            ReportError::Synth(_) => "InvalidSpec",
            ReportError::PairMismatch { .. } => "PairMismatch",
            ReportError::DuplicateLabel(_) => "DuplicateLabel",
            ReportError::UnknownSae(_) => "UnknownSae",
            ReportError::InvalidInput { .. } => "InvalidInput",
            ReportError::Io { .. } => "IoError",
            ReportError::Serialize(_) => "InternalError",
        }
    }

    /// 2 for bad input, 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Serialize(_) => 3,
            ReportError::Scoring(ScoringError::Store(StoreError::Io(_))) => 3,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let ReportError::PairMismatch { sae_label, missing } = self {
            obj["sae_label"] = serde_json::json!(sae_label);
            obj["missing_pair_ids"] = serde_json::json!(missing);
        }
        obj
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveInput {
    pub path: String,
    pub sae_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: ScoreConfig,
    pub corpus: Option<String>,
    /// In the same order as `evaluations`.
    pub archives: Vec<ArchiveInput>,
    pub evaluations: Vec<SAEEvaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String, ReportError> {
        json::to_string(self).map_err(ReportError::Serialize)
    }

    /// The report without wall-clock fields; equal inputs give equal bodies.
    pub fn body_json(&self) -> Result<String, ReportError> {
        let body = RunReport {
            wall_clock_ms: None,
            ..self.clone()
        };
        body.to_json()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| ReportError::InvalidInput {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ReportError> {
        write_text(path.as_ref(), &self.to_json()?)
    }

    pub fn evaluation(&self, sae_label: &str) -> Option<(&ArchiveInput, &SAEEvaluation)> {
        self.archives
            .iter()
            .zip(&self.evaluations)
            .find(|(_, e)| e.sae_label == sae_label)
    }

    pub fn components(&self) -> Vec<ComponentScores> {
        self.evaluations
            .iter()
            .map(|e| ComponentScores {
                label: e.sae_label.clone(),
                contrastive: e.contrastive_agg,
                independence: e.independence_agg,
                sparsity: e.sparsity,
            })
            .collect()
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_archive(path: &Path) -> Result<ActivationArchive, ReportError> {
    store::read_archive(path).map_err(|source| ReportError::Store {
        path: path.display().to_string(),
        source,
    })
}

pub type ReferenceScores = BTreeMap<String, f64>;

pub fn load_reference(path: impl AsRef<Path>) -> Result<ReferenceScores, ReportError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let scores: ReferenceScores = serde_json::from_str(&text).map_err(|e| ReportError::InvalidInput {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    if let Some((label, _)) = scores.iter().find(|(_, v)| !v.is_finite()) {
        return Err(ReportError::InvalidInput {
            path: path.display().to_string(),
            reason: format!("non-finite score for '{label}'"),
        });
    }
    Ok(scores)
}

#[derive(Debug, Clone)]
pub struct ScoreRequest {
    pub archives: Vec<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub config: ScoreConfig,
    pub parallelism: Parallelism,
}

/// Scores every archive and assembles a report with evaluations sorted by
/// `sae_label`. When a corpus is given, every archive pair_id must be in it.
pub fn score(request: &ScoreRequest) -> Result<RunReport, ReportError> {
    let started = Instant::now();
    request.config.validate()?;
    let corpus = request
        .corpus
        .as_ref()
        .map(ContrastiveCorpus::load)
        .transpose()?;

    let mut scored = Vec::with_capacity(request.archives.len());
    for path in &request.archives {
        let archive = read_archive(path)?;
        if let Some(corpus) = &corpus {
            let missing: Vec<u32> = archive.pair_ids().filter(|&id| !corpus.contains(id)).collect();
            if !missing.is_empty() {
                return Err(ReportError::PairMismatch {
                    sae_label: archive.sae_label().to_string(),
                    missing,
                });
            }
        }
        let evaluation = scoring::evaluate_sae_with(&archive, &request.config, request.parallelism)?;
        log::info!(
            "{}: C={:.4} I={:.4} S={:.4} score={:.4}",
            evaluation.sae_label,
            evaluation.contrastive_agg,
            evaluation.independence_agg,
            evaluation.sparsity,
            evaluation.interpretability
        );
        scored.push((
            ArchiveInput {
                path: path.display().to_string(),
                sae_label: evaluation.sae_label.clone(),
            },
            evaluation,
        ));
    }
    scored.sort_by(|a, b| a.1.sae_label.cmp(&b.1.sae_label));
    if let Some(w) = scored.windows(2).find(|w| w[0].1.sae_label == w[1].1.sae_label) {
        return Err(ReportError::DuplicateLabel(w[0].1.sae_label.clone()));
    }
    let (archives, evaluations) = scored.into_iter().unzip();
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        config: request.config,
        corpus: corpus.map(|c| c.source_path().to_string()),
        archives,
        evaluations,
        alignment: None,
        wall_clock_ms: Some(started.elapsed().as_millis() as u64),
    })
}

/// Labels present on only one side of an alignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Unmatched {
    pub predicted_only: Vec<String>,
    pub reference_only: Vec<String>,
}

fn match_labels<'a, T>(
    predicted: impl IntoIterator<Item = (&'a str, T)>,
    reference: &ReferenceScores,
) -> (Vec<(String, T, f64)>, Unmatched) {
    let mut matched = Vec::new();
    let mut unmatched = Unmatched::default();
    let mut seen = std::collections::BTreeSet::new();
    for (label, value) in predicted {
        seen.insert(label.to_string());
        match reference.get(label) {
            Some(&r) => matched.push((label.to_string(), value, r)),
            None => unmatched.predicted_only.push(label.to_string()),
        }
    }
    unmatched.reference_only = reference.keys().filter(|k| !seen.contains(*k)).cloned().collect();
    (matched, unmatched)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignOutcome {
    pub report: AlignmentReport,
    pub models: Vec<ScoredModel>,
    pub unmatched: Unmatched,
}

/// Aligns a report's interpretability scores with reference scores over
/// the shared labels.
pub fn align(report: &RunReport, reference: &ReferenceScores) -> Result<AlignOutcome, ReportError> {
    let (matched, unmatched) = match_labels(
        report
            .evaluations
            .iter()
            .map(|e| (e.sae_label.as_str(), e.interpretability)),
        reference,
    );
    let models: Vec<ScoredModel> = matched
        .into_iter()
        .map(|(label, p, r)| ScoredModel::new(label, p, r))
        .collect();
    Ok(AlignOutcome {
        report: alignment::align(&models)?,
        models,
        unmatched,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    #[serde(flatten)]
    pub grid: GridSearch,
    pub unmatched: Unmatched,
}

pub fn gridsearch(
    report: &RunReport,
    reference: &ReferenceScores,
    alphas: &[f64],
) -> Result<GridSearchOutcome, ReportError> {
    let components = report.components();
    let (matched, unmatched) = match_labels(components.iter().map(|c| (c.label.as_str(), c)), reference);
    if matched.len() < 2 {
        return Err(AlignmentError::TooFewModels(matched.len()).into());
    }
    let comps: Vec<ComponentScores> = matched.iter().map(|(_, c, _)| (*c).clone()).collect();
    let refs: Vec<f64> = matched.iter().map(|(_, _, r)| *r).collect();
    Ok(GridSearchOutcome {
        grid: alignment::grid_search_alpha(&comps, &refs, alphas)?,
        unmatched,
    })
}

/// One row of a pooling ablation. Correlations are `None` when a series has
/// zero variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingRow {
    pub pooling: Pooling,
    pub crpr: f64,
    pub ties_excluded: usize,
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingAblation {
    pub config: ScoreConfig,
    pub rows: Vec<PoolingRow>,
    pub unmatched: Unmatched,
}

fn optional_metric(result: Result<f64, AlignmentError>) -> Result<Option<f64>, ReportError> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(AlignmentError::ZeroVariance(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Scores every archive under each pooling strategy and aligns each
/// strategy's scores with the reference.
pub fn ablate_pooling(
    archives: &[ActivationArchive],
    reference: &ReferenceScores,
    config: &ScoreConfig,
    parallelism: Parallelism,
) -> Result<PoolingAblation, ReportError> {
    let mut per_archive = Vec::with_capacity(archives.len());
    for archive in archives {
        per_archive.push(scoring::evaluate_poolings(archive, config, &Pooling::ALL, parallelism)?);
    }
    let mut rows = Vec::new();
    let mut unmatched = Unmatched::default();
    for (k, pooling) in Pooling::ALL.into_iter().enumerate() {
        let (matched, um) = match_labels(
            per_archive
                .iter()
                .map(|evals| (evals[k].sae_label.as_str(), evals[k].interpretability)),
            reference,
        );
        unmatched = um;
        let models: Vec<ScoredModel> = matched
            .into_iter()
            .map(|(label, p, r)| ScoredModel::new(label, p, r))
            .collect();
        let (crpr, ties_excluded) = alignment::crpr(&models)?;
        rows.push(PoolingRow {
            pooling,
            crpr,
            ties_excluded,
            spearman: optional_metric(alignment::spearman(&models))?,
            pearson: optional_metric(alignment::pearson(&models))?,
            n: models.len(),
        });
    }
    Ok(PoolingAblation {
        config: *config,
        rows,
        unmatched,
    })
}

/// Recomputes one pair's neuron-wise scores for an evaluation in `report`
/// and writes the plot and its sidecar table.
pub fn plot_pair(
    report: &RunReport,
    sae_label: Option<&str>,
    pair_id: u32,
    scale: NeuronScale,
    out: &Path,
) -> Result<PairDiagnostics, ReportError> {
    let (input, _) = match sae_label {
        Some(label) => report
            .evaluation(label)
            .ok_or_else(|| ReportError::UnknownSae(label.to_string()))?,
        None => report
            .archives
            .iter()
            .zip(&report.evaluations)
            .next()
            .ok_or_else(|| ReportError::UnknownSae("<none>".into()))?,
    };
    let archive = read_archive(Path::new(&input.path))?;
    let prepared = PreparedArchive::new(&archive, Parallelism::Global)?;
    let scores = prepared.pair_scores(pair_id, scale)?;
    emit_pair_diagnostics(&scores, out).map_err(io_err(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_objects_are_machine_readable() {
        let e = ReportError::PairMismatch {
            sae_label: "x".into(),
            missing: vec![21, 22],
        };
        let v = e.to_json();
        assert_eq!(v["error"], "PairMismatch");
        assert_eq!(v["missing_pair_ids"], serde_json::json!([21, 22]));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn label_matching() {
        let reference: ReferenceScores = [("a".to_string(), 1.0), ("c".to_string(), 2.0)].into();
        let (matched, um) = match_labels([("a", 0.5), ("b", 0.7)], &reference);
        assert_eq!(matched, vec![("a".to_string(), 0.5, 1.0)]);
        assert_eq!(um.predicted_only, vec!["b".to_string()]);
        assert_eq!(um.reference_only, vec!["c".to_string()]);
    }
}
