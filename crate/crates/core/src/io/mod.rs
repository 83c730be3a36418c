//! Loaders for the inputs every other module consumes: the CTC vocabulary,
//! posterior matrices, dataset manifests and audio.

mod audio;
mod manifest;
mod posterior;
mod transcript;
mod vocab;

use std::path::PathBuf;

pub use audio::{read_wav, write_wav, AudioBuffer};
pub use manifest::{load_manifest, parse_manifest, GroupKey, Manifest, UtteranceRecord};
pub use posterior::{
    load_posteriors, load_posteriors_with, parse_ctcp, parse_text_matrix, PosteriorMatrix, Validation, CTCP_MAGIC,
    CTCP_VERSION,
};
pub use transcript::{Transcript, TranscriptSource};
pub use vocab::{load_vocabulary, parse_vocabulary, Vocabulary, BLANK_SYMBOL, DELIMITER_SYMBOL};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("vocabulary line {index} is empty")]
    EmptySymbol { index: usize },
    #[error("duplicate vocabulary symbol {0:?}")]
    DuplicateSymbol(String),
    #[error("vocabulary has no \"<blank>\" symbol")]
    MissingBlank,
    #[error("vocabulary has no \"|\" word delimiter")]
    MissingDelimiter,
    #[error("blank and delimiter indices must be distinct and in range")]
    InvalidSpecialIndex,
    #[error("not a CTCP file (bad magic)")]
    BadMagic,
    #[error("unsupported CTCP version {0}")]
    UnsupportedVersion(u32),
    #[error("posterior matrix has {found} columns, vocabulary has {expected} symbols")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("posterior matrix is empty")]
    EmptyMatrix,
    #[error("non-finite log-probability at frame {frame}, column {column}")]
    NonFiniteEntry { frame: usize, column: usize },
    #[error("positive log-probability at frame {frame}, column {column}")]
    PositiveLogProb { frame: usize, column: usize },
    #[error("frame {frame} probabilities sum to {sum}")]
    RowNotNormalized { frame: usize, sum: f64 },
    #[error("malformed matrix: {0}")]
    Malformed(String),
    #[error("manifest line {line}: {reason}")]
    ManifestLine { line: usize, reason: String },
    #[error("duplicate utterance_id {0:?} in manifest")]
    DuplicateUtterance(String),
    #[error("utterance {0:?} has neither audio_path nor duration_s")]
    MissingDuration(String),
    #[error("audio has {channels} channels, only mono is supported")]
    NonMonoAudio { channels: u16 },
    #[error("unsupported audio encoding: {0}")]
    UnsupportedAudio(String),
    #[error("audio file is truncated")]
    TruncatedAudio,
    #[error("audio contains no samples")]
    EmptyAudio,
}
