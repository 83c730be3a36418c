use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{build_report, ReportTable, UtteranceFailure};
use super::HarnessError;
use crate::baselines::{speech_rate, wada_snr, BaselineConfig};
use crate::ctc::{beam_search_decode, greedy_transcript, DecoderConfig};
use crate::io::{
    load_posteriors_with, read_wav, AudioBuffer, Manifest, Transcript, TranscriptSource, UtteranceRecord, Validation,
    Vocabulary,
};
use crate::metrics::{
    align_words, diff_report, inconsistency_score, reference_wer, spans_to_jsonl, Method, MethodKind, ScoreRecord,
};
use crate::ngram::NGramModel;
use crate::reference::{correct_with_llm, CorrectionResult, Corrector, Language, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: String,
    pub language: Language,
    pub methods: Vec<MethodKind>,
    pub decoder: DecoderConfig,
    pub llm_models: Vec<String>,
    pub llm_runs: usize,
    pub temperature: f64,
    pub baselines: BaselineConfig,
    /// Worker threads for utterance scoring; results do not depend on it.
    #[serde(skip)]
    pub jobs: usize,
    #[serde(skip)]
    pub retry: RetryPolicy,
    #[serde(skip)]
    pub validation: Validation,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            language: Language::Dutch,
            methods: MethodKind::ALL.to_vec(),
            decoder: DecoderConfig::default(),
            llm_models: Vec::new(),
            llm_runs: 3,
            temperature: 0.0,
            baselines: BaselineConfig::default(),
            jobs: 1,
            retry: RetryPolicy::default(),
            validation: Validation::default(),
        }
    }
}

impl PipelineConfig {
    pub fn wants(&self, kind: MethodKind) -> bool {
        self.methods.contains(&kind)
    }

    fn needs_posteriors(&self) -> bool {
        self.wants(MethodKind::Ngram) || self.wants(MethodKind::Llm) || self.wants(MethodKind::ReferenceWer)
    }
}

/// Read-only resources shared by all workers.
#[derive(Clone, Copy)]
pub struct Assets<'a> {
    pub vocab: Option<&'a Vocabulary>,
    pub lm: Option<&'a NGramModel>,
    pub corrector: Option<&'a dyn Corrector>,
}

impl Assets<'_> {
    /// Checks that every selected method has what it needs.
    pub fn validate(&self, config: &PipelineConfig) -> Result<(), HarnessError> {
        let missing = |what: &str| Err(HarnessError::MissingAsset(what.to_string()));
        if config.methods.is_empty() {
            return Err(HarnessError::Config("no methods selected".into()));
        }
        if config.needs_posteriors() && self.vocab.is_none() {
            return missing("vocabulary");
        }
        if config.wants(MethodKind::Ngram) && self.lm.is_none() {
            return missing("language model");
        }
        if config.wants(MethodKind::Llm) {
            if self.corrector.is_none() {
                return missing("LLM client");
            }
            if config.llm_models.is_empty() {
                return missing("LLM model name");
            }
            if config.llm_runs == 0 {
                return Err(HarnessError::Config("llm runs must be at least 1".into()));
            }
        }
        config
            .decoder
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRun {
    pub model: String,
    pub result: CorrectionResult,
}

/// Everything computed for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceOutcome {
    pub utterance_id: String,
    pub greedy: Option<Transcript>,
    pub ground_truth: Option<Transcript>,
    pub ngram_reference: Option<Transcript>,
    pub llm_runs: Vec<LlmRun>,
    pub scores: Vec<ScoreRecord>,
    pub failures: Vec<UtteranceFailure>,
}

impl UtteranceOutcome {
    fn fail(&mut self, method: &str, err: impl std::fmt::Display) {
        tracing::warn!(utterance = %self.utterance_id, method, error = %err, "utterance quarantined");
        self.failures.push(UtteranceFailure {
            utterance_id: self.utterance_id.clone(),
            method: method.to_string(),
            message: err.to_string(),
        });
    }
}

pub fn score_utterance(
    record: &UtteranceRecord,
    manifest: &Manifest,
    config: &PipelineConfig,
    assets: Assets<'_>,
) -> UtteranceOutcome {
    let id = record.utterance_id.as_str();
    let mut out = UtteranceOutcome {
        utterance_id: id.to_string(),
        greedy: None,
        ground_truth: record
            .ground_truth_text
            .as_ref()
            .map(|t| Transcript::new(t.clone(), TranscriptSource::GroundTruth)),
        ngram_reference: None,
        llm_runs: Vec::new(),
        scores: Vec::new(),
        failures: Vec::new(),
    };

    if config.needs_posteriors() {
        let vocab = assets.vocab.expect("validated");
        let path = manifest.resolve(&record.posterior_path);
        match load_posteriors_with(&path, vocab, config.validation) {
            Err(e) => out.fail("decode", e),
            Ok(post) => match greedy_transcript(&post, vocab) {
                Err(e) => out.fail("decode", e),
                Ok(greedy) => {
                    if config.wants(MethodKind::Ngram) {
                        let lm = assets.lm.expect("validated");
                        match beam_search_decode(&post, vocab, lm, &config.decoder) {
                            Ok(reference) => {
                                out.scores
                                    .push(inconsistency_score(id, Method::Ngram, &greedy, &reference));
                                out.ngram_reference = Some(reference);
                            }
                            Err(e) => out.fail("ngram", e),
                        }
                    }
                    out.greedy = Some(greedy);
                }
            },
        }
    }

    if let Some(greedy) = out.greedy.clone() {
        if config.wants(MethodKind::Llm) {
            let client = assets.corrector.expect("validated");
            for model in &config.llm_models {
                match correct_with_llm(
                    client,
                    &greedy,
                    &config.language,
                    model,
                    config.llm_runs,
                    config.temperature,
                    &config.retry,
                ) {
                    Ok(results) => {
                        for result in results {
                            let method = Method::Llm {
                                model: model.clone(),
                                run_index: result.run_index,
                            };
                            out.scores
                                .push(inconsistency_score(id, method, &greedy, &result.corrected));
                            out.llm_runs.push(LlmRun {
                                model: model.clone(),
                                result,
                            });
                        }
                    }
                    Err(e) => out.fail(&format!("llm:{model}"), e),
                }
            }
        }
        if config.wants(MethodKind::ReferenceWer) {
            match reference_wer(id, &greedy, out.ground_truth.as_ref()) {
                Ok(score) => out.scores.push(score),
                Err(e) => out.fail("reference_wer", e),
            }
        }
    }

    let needs_audio =
        config.wants(MethodKind::WadaSnr) || (config.wants(MethodKind::SpeechRate) && record.duration_s.is_none());
    let audio: Option<Result<AudioBuffer, String>> = match (&record.audio_path, needs_audio) {
        (Some(p), true) => Some(read_wav(manifest.resolve(p)).map_err(|e| e.to_string())),
        (None, true) => Some(Err("no audio_path in manifest".to_string())),
        _ => None,
    };

    if config.wants(MethodKind::SpeechRate) {
        let duration = match (record.duration_s, &audio) {
            (Some(d), _) => Ok(d),
            (None, Some(Ok(a))) => Ok(a.duration_s()),
            (None, Some(Err(e))) => Err(format!("no duration_s and audio unavailable: {e}")),
            (None, None) => Err("no duration_s".to_string()),
        };
        match duration {
            Ok(d) => match speech_rate(id, out.ground_truth.as_ref(), d, config.baselines.speech_rate_unit) {
                Ok(score) => out.scores.push(score),
                Err(e) => out.fail("speech_rate", e),
            },
            Err(e) => out.fail("speech_rate", e),
        }
    }

    if config.wants(MethodKind::WadaSnr) {
        match &audio {
            Some(Ok(a)) => match wada_snr(id, a, config.baselines.wada_mode) {
                Ok(score) => out.scores.push(score),
                Err(e) => out.fail("wada_snr", e),
            },
            Some(Err(e)) => out.fail("wada_snr", e),
            None => unreachable!("audio is loaded whenever wada_snr is selected"),
        }
    }

    out.scores.sort_by(|a, b| a.method.cmp(&b.method));
    out
}

/// Scores every utterance on a bounded pool; the output is sorted by utterance id.
pub fn score_manifest(
    manifest: &Manifest,
    config: &PipelineConfig,
    assets: Assets<'_>,
) -> Result<Vec<UtteranceOutcome>, HarnessError> {
    assets.validate(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut outcomes: Vec<UtteranceOutcome> = pool.install(|| {
        manifest
            .records
            .par_iter()
            .map(|rec| score_utterance(rec, manifest, config, assets))
            .collect()
    });
    outcomes.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    if !outcomes.iter().any(|o| !o.scores.is_empty()) {
        return Err(HarnessError::NoSuccessfulUtterances {
            failures: outcomes.iter().map(|o| o.failures.len()).sum(),
        });
    }
    Ok(outcomes)
}

pub fn collect_scores(outcomes: &[UtteranceOutcome]) -> Vec<ScoreRecord> {
    outcomes.iter().flat_map(|o| o.scores.iter().cloned()).collect()
}

pub fn collect_failures(outcomes: &[UtteranceOutcome]) -> Vec<UtteranceFailure> {
    outcomes.iter().flat_map(|o| o.failures.iter().cloned()).collect()
}

#[derive(Debug)]
pub struct RunOutput {
    pub outcomes: Vec<UtteranceOutcome>,
    pub report: ReportTable,
    pub run_dir: PathBuf,
}

/// Scores, aggregates and writes the complete run directory.
pub fn run_pipeline(
    manifest: &Manifest,
    config: &PipelineConfig,
    assets: Assets<'_>,
    run_dir: &Path,
) -> Result<RunOutput, HarnessError> {
    let outcomes = score_manifest(manifest, config, assets)?;
    let records = collect_scores(&outcomes);
    let failures = collect_failures(&outcomes);
    let report = build_report(
        &config.dataset,
        config.language.display_name(),
        manifest,
        &records,
        &failures,
    )?;
    super::persist::write_run_dir(run_dir, manifest, config, &outcomes, &report)?;
    Ok(RunOutput {
        outcomes,
        report,
        run_dir: run_dir.to_path_buf(),
    })
}

/// Diff spans of every generated reference against the greedy transcription.
pub fn diffs_jsonl(outcomes: &[UtteranceOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let Some(greedy) = &o.greedy else { continue };
        let mut emit = |label: &str, reference: &Transcript| {
            let spans = diff_report(&align_words(greedy.words(), reference.words()));
            out.push_str(&spans_to_jsonl(&o.utterance_id, label, &spans));
        };
        if let Some(r) = &o.ngram_reference {
            emit("ngram", r);
        }
        for run in &o.llm_runs {
            emit(
                &format!("llm:{}#{}", run.model, run.result.run_index),
                &run.result.corrected,
            );
        }
    }
    out
}
