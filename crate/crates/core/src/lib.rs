//! Contrastive, LLM-free interpretability scoring for sparse autoencoders.
//!
//! The crate is organised around the evaluation pipeline:
//!
//! - [`corpus`] loads the contrastive story pairs that drive an evaluation.
//! - [`store`] reads and writes sparse activation archives and summarises them.
//! - [`scoring`] turns an archive into contrastive, independence and
//!   sparsity-aware interpretability scores.
//! - [`alignment`] measures agreement with reference scores (CRPR, Spearman,
//!   Pearson) and searches the sparsity penalty.
//! - [`synthlab`] plants known structure into synthetic archives so the whole
//!   pipeline can be checked without a language model.
//! - [`report`] assembles JSON run reports and neuron-level diagnostics, and
//!   [`cli`] exposes all of it on the command line.

pub mod alignment;
pub mod cli;
pub mod corpus;
pub mod report;
pub mod scoring;
pub mod store;
pub mod synthlab;

pub use alignment::{AlignmentError, AlignmentReport, ScoredModel};
pub use corpus::{ContrastiveCorpus, ContrastivePair, CorpusError};
pub use scoring::{evaluate_sae, Parallelism, Pooling, SAEEvaluation, ScoreConfig, ScoringError};
pub use store::{ActivationArchive, StoreError};
pub use synthlab::{PlantSpec, PlantedGroundTruth, SynthError};
