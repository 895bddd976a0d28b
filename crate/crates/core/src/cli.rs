//! Command-line surface. Exit codes: 0 success, 2 input error, 3 internal
//! error. Errors are also written to stderr as a single JSON object.
//!
//! Log verbosity comes from `CEBENCH_LOG` (`error`, `warn`, `info`, ...).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::report::{self, ReportError, RunReport, ScoreRequest};
use crate::scoring::{NeuronScale, Parallelism, Pooling, ScoreConfig};
use crate::store;
use crate::synthlab::{self, PlantSpec};

#[derive(Debug, Parser)]
#[command(name = "cebench", version, about = "Contrastive interpretability scoring for sparse autoencoders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct ScoreFlags {
    /// Sparsity penalty weight.
    #[arg(long, default_value_t = 0.25)]
    pub alpha: f64,
    /// max | mean | outlier1sigma
    #[arg(long, default_value = "max")]
    pub pooling: Pooling,
    /// Activation magnitude above which a latent counts as active.
    #[arg(long, default_value_t = store::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Worker threads; 1 disables parallelism. Defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl ScoreFlags {
    fn config(&self) -> ScoreConfig {
        ScoreConfig {
            alpha: self.alpha,
            pooling: self.pooling,
            epsilon: self.epsilon,
        }
    }

    fn parallelism(&self) -> Parallelism {
        match self.threads {
            None => Parallelism::Global,
            Some(0 | 1) => Parallelism::Sequential,
            Some(n) => Parallelism::Threads(n),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score activation archives and write a run report.
    Score {
        #[arg(long = "archive", required = true, num_args = 1..)]
        archives: Vec<PathBuf>,
        /// Corpus the archives were extracted from; pair_ids are checked against it.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        flags: ScoreFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align a run report's scores with reference scores.
    Align {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search the sparsity penalty weight against reference scores.
    Gridsearch {
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        /// Run report whose evaluations supply C, I and S.
        #[arg(long = "pred-components")]
        pred_components: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare pooling strategies against reference scores.
    AblatePooling {
        #[arg(long = "archive", required = true, num_args = 1..)]
        archives: Vec<PathBuf>,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[command(flatten)]
        flags: ScoreFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic archives with planted contrast neurons.
    Synth {
        /// JSON plant spec.
        #[arg(long)]
        spec: PathBuf,
        /// Output archive, or output directory when --strengths is given.
        #[arg(long)]
        out: PathBuf,
        /// Generate a suite, one archive per strength, plus reference.json
        /// holding each archive's planted rank.
        #[arg(long, value_delimiter = ',')]
        strengths: Option<Vec<f64>>,
    },
    /// Plot neuron-wise scores of one pair from a scored report.
    PlotPair {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        pair: u32,
        /// SVG output; a CSV sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Evaluation to plot; defaults to the first in the report.
        #[arg(long)]
        sae: Option<String>,
        /// Plot scores before min-max normalisation.
        #[arg(long)]
        raw: bool,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), ReportError> {
    match out {
        Some(path) => report::write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, ReportError> {
    report::json::to_string(value).map_err(ReportError::Serialize)
}

pub fn execute(command: Command) -> Result<(), ReportError> {
    match command {
        Command::Score {
            archives,
            corpus,
            flags,
            out,
        } => {
            let report = report::score(&ScoreRequest {
                archives,
                corpus,
                config: flags.config(),
                parallelism: flags.parallelism(),
            })?;
            emit(out.as_deref(), &report.to_json()?)
        }
        Command::Align { pred, reference, out } => {
            let report = RunReport::load(&pred)?;
            let reference = report::load_reference(&reference)?;
            let outcome = report::align(&report, &reference)?;
            emit(out.as_deref(), &to_json(&outcome)?)
        }
        Command::Gridsearch {
            alphas,
            pred_components,
            reference,
            out,
        } => {
            let report = RunReport::load(&pred_components)?;
            let reference = report::load_reference(&reference)?;
            let outcome = report::gridsearch(&report, &reference, &alphas)?;
            emit(out.as_deref(), &to_json(&outcome)?)
        }
        Command::AblatePooling {
            archives,
            reference,
            flags,
            out,
        } => {
            let reference = report::load_reference(&reference)?;
            let loaded = archives
                .iter()
                .map(|p| report::read_archive(p))
                .collect::<Result<Vec<_>, _>>()?;
            let table = report::ablate_pooling(&loaded, &reference, &flags.config(), flags.parallelism())?;
            emit(out.as_deref(), &to_json(&table)?)
        }
        Command::Synth { spec, out, strengths } => {
            let text = fs::read_to_string(&spec).map_err(|source| ReportError::Io {
                path: spec.display().to_string(),
                source,
            })?;
            let plant: PlantSpec = serde_json::from_str(&text).map_err(|e| ReportError::InvalidInput {
                path: spec.display().to_string(),
                reason: e.to_string(),
            })?;
            synth(&plant, &out, strengths.as_deref())
        }
        Command::PlotPair {
            report: report_path,
            pair,
            out,
            sae,
            raw,
        } => {
            let report = RunReport::load(&report_path)?;
            let scale = if raw {
                NeuronScale::Raw
            } else {
                NeuronScale::Normalized
            };
            let diag = report::plot_pair(&report, sae.as_deref(), pair, scale, &out)?;
            emit(None, &to_json(&diag)?)
        }
    }
}

fn write_archive(archive: &store::ActivationArchive, path: &Path) -> Result<(), ReportError> {
    store::write_archive(archive, path).map_err(|source| ReportError::Store {
        path: path.display().to_string(),
        source,
    })
}

fn synth(plant: &PlantSpec, out: &Path, strengths: Option<&[f64]>) -> Result<(), ReportError> {
    match strengths {
        None => {
            let (archive, _) = synthlab::generate_planted_archive(plant)?;
            write_archive(&archive, out)
        }
        Some(strengths) => {
            fs::create_dir_all(out).map_err(|source| ReportError::Io {
                path: out.display().to_string(),
                source,
            })?;
            let suite = synthlab::generate_suite(plant, strengths)?;
            let mut reference = report::ReferenceScores::new();
            for (archive, truth) in &suite {
                let path = out.join(format!("planted_{:02}.ceba", truth.expected_rank));
                write_archive(archive, &path)?;
                reference.insert(archive.sae_label().to_string(), truth.expected_rank as f64);
            }
            report::write_text(&out.join("reference.json"), &to_json(&reference)?)
        }
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().filter_or("CEBENCH_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
