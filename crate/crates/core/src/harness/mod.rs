//! Per-utterance scoring, speaker-level aggregation, statistics and reports.

mod aggregate;
mod persist;
mod pipeline;
mod report;
pub mod stats;

use std::path::{Path, PathBuf};

pub use aggregate::{aggregate_speaker, group_ratings, Aggregation, SpeakerScore};
pub use persist::{
    llm_accuracy, llm_accuracy_report, load_run_manifest, read_scores, render_llm_accuracy, replay, sanitize_component,
    scores_csv, transcript_rows, write_run_dir, LlmAccuracyRow, Replay, TranscriptRow, CONFIG_FILE, CORRELATIONS_CSV,
    DIFFS_FILE, FAILURES_FILE, LLM_ACCURACY_FILE, MANIFEST_FILE, REPORT_CSV, REPORT_TXT, SCORES_FILE, TRANSCRIPTS_FILE,
};
pub use pipeline::{
    collect_failures, collect_scores, diffs_jsonl, run_pipeline, score_manifest, score_utterance, Assets, LlmRun,
    PipelineConfig, RunOutput, UtteranceOutcome,
};
pub use report::{
    build_report, PairwiseTest, ReportMeta, ReportRow, ReportTable, RunResult, UtteranceFailure, CSV_HEADER,
};
pub use stats::{mean_ci, pearson, two_sample_t, MeanCi, StatsError, WelchTest};

use crate::io::LoadError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("score for utterance {0:?} which is not in the manifest")]
    UnknownUtterance(String),
    #[error("utterance {utterance_id:?} scored twice by {method}")]
    DuplicateScore { utterance_id: String, method: String },
    #[error("no scored utterances for {method} in speaker {speaker_id:?} time {timepoint_id:?}")]
    EmptyGroup {
        method: String,
        speaker_id: String,
        timepoint_id: Option<String>,
    },
    #[error("missing asset: {0}")]
    MissingAsset(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("no utterance could be scored ({failures} failures)")]
    NoSuccessfulUtterances { failures: usize },
    #[error("no ground-truth transcriptions available")]
    MissingGroundTruth,
    #[error("malformed run directory: {0}")]
    Malformed(String),
}

impl HarnessError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
