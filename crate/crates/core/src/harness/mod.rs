//! Experiment orchestration: error-probability sweeps, traces, PCA and
//! result files.

pub mod config;
pub mod output;
pub mod pca;
pub mod stats;
pub mod trace;
pub mod trials;

use crate::affinity::AffinityMatrix;
use crate::channel::ChannelResponse;
use crate::design::MixtureBook;
use crate::error::{Error, Result};

pub use config::{ExperimentConfig, Mode, Variant};
pub use output::{emit_results, git_blob_hash, Meta, Results};
pub use pca::{pca_project, PcaProjection};
pub use stats::wilson;
pub use trace::{run_multisample, run_trace, TraceBundle};
pub use trials::{run_single_sample, sweep_epsilon, PeEstimate, SweepRow, TrialRecord};

/// A configuration with its matrix, channels and optimized book resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub affinity: AffinityMatrix,
    pub channels: Vec<ChannelResponse>,
    pub book: MixtureBook,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.check()?;
        let affinity = config.load_affinity()?;
        let channels = config.channels(affinity.molecules())?;
        let book = config.build_book(&affinity, &channels)?;
        Self::with_book(config, affinity, channels, book)
    }

    pub fn with_book(
        config: ExperimentConfig,
        affinity: AffinityMatrix,
        channels: Vec<ChannelResponse>,
        book: MixtureBook,
    ) -> Result<Self> {
        config.check()?;
        if book.num_molecules() != affinity.molecules() || channels.len() != affinity.molecules() {
            return Err(Error::Dimension(
                "book, channels and affinity disagree on Q".into(),
            ));
        }
        if book
            .alphabets()
            .iter()
            .any(|a| a.len() < config.book.alphabet_size)
        {
            return Err(Error::InvalidParam(format!(
                "alphabet size {} exceeds a transmitter's alphabet",
                config.book.alphabet_size
            )));
        }
        Ok(Self {
            config,
            affinity,
            channels,
            book,
        })
    }
}
