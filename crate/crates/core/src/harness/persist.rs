use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_speaker, group_ratings};
use super::pipeline::{diffs_jsonl, PipelineConfig, UtteranceOutcome};
use super::report::{build_report, ReportTable, UtteranceFailure};
use super::stats::pearson;
use super::HarnessError;
use crate::io::{parse_manifest, Manifest, Transcript, TranscriptSource};
use crate::metrics::{align_words, wer, Method, ScoreRecord, WerAccumulator};

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const DIFFS_FILE: &str = "diffs.jsonl";
pub const SCORES_FILE: &str = "scores.csv";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";
pub const CORRELATIONS_CSV: &str = "correlations.csv";
pub const LLM_ACCURACY_FILE: &str = "llm_accuracy.txt";

/// One persisted transcript of an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRow {
    pub utterance_id: String,
    pub source: TranscriptSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_index: Option<usize>,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    utterance_id: String,
    speaker_id: String,
    timepoint_id: String,
    method: String,
    run_index: Option<usize>,
    value: f64,
    hyp_source: Option<TranscriptSource>,
    ref_source: Option<TranscriptSource>,
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("row serializes"));
        out.push('\n');
    }
    out
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| HarnessError::Malformed(format!("{}: {e}", path.display()))))
        .collect()
}

/// Keeps model names usable as directory names.
pub fn sanitize_component(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn transcript_rows(outcomes: &[UtteranceOutcome]) -> Vec<TranscriptRow> {
    let mut rows = Vec::new();
    for o in outcomes {
        let row = |t: &Transcript, model: Option<&str>, run: Option<usize>| TranscriptRow {
            utterance_id: o.utterance_id.clone(),
            source: t.source(),
            model: model.map(str::to_string),
            run_index: run,
            text: t.raw_text().to_string(),
        };
        rows.extend(o.greedy.as_ref().map(|t| row(t, None, None)));
        rows.extend(o.ground_truth.as_ref().map(|t| row(t, None, None)));
        rows.extend(o.ngram_reference.as_ref().map(|t| row(t, None, None)));
        for run in &o.llm_runs {
            rows.push(row(&run.result.corrected, Some(&run.model), Some(run.result.run_index)));
        }
    }
    rows
}

pub fn scores_csv(manifest: &Manifest, records: &[ScoreRecord]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        let rec = manifest
            .get(&r.utterance_id)
            .ok_or_else(|| HarnessError::UnknownUtterance(r.utterance_id.clone()))?;
        w.serialize(ScoreRow {
            utterance_id: r.utterance_id.clone(),
            speaker_id: rec.speaker_id.clone(),
            timepoint_id: rec.timepoint_id.clone().unwrap_or_default(),
            method: r.method.label(),
            run_index: r.method.run_index(),
            value: r.value,
            hyp_source: r.hyp_source,
            ref_source: r.ref_source,
        })
        .map_err(|e| HarnessError::Malformed(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Malformed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>, HarnessError> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| HarnessError::Malformed(format!("{}: {e}", path.display())))?;
    reader
        .deserialize::<ScoreRow>()
        .map(|row| {
            let row = row.map_err(|e| HarnessError::Malformed(format!("{}: {e}", path.display())))?;
            Ok(ScoreRecord {
                method: Method::from_label(&row.method, row.run_index)
                    .map_err(|e| HarnessError::Malformed(e.to_string()))?,
                utterance_id: row.utterance_id,
                value: row.value,
                hyp_source: row.hyp_source,
                ref_source: row.ref_source,
            })
        })
        .collect()
}

pub fn write_run_dir(
    dir: &Path,
    manifest: &Manifest,
    config: &PipelineConfig,
    outcomes: &[UtteranceOutcome],
    report: &ReportTable,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut config_json = serde_json::to_string_pretty(config).expect("config serializes");
    config_json.push('\n');
    write(&dir.join(CONFIG_FILE), &config_json)?;
    write(&dir.join(MANIFEST_FILE), &manifest.to_jsonl())?;
    write(&dir.join(TRANSCRIPTS_FILE), &jsonl(transcript_rows(outcomes)))?;
    write(&dir.join(DIFFS_FILE), &diffs_jsonl(outcomes))?;
    let records: Vec<ScoreRecord> = outcomes.iter().flat_map(|o| o.scores.iter().cloned()).collect();
    write(&dir.join(SCORES_FILE), &scores_csv(manifest, &records)?)?;
    write(&dir.join(FAILURES_FILE), &jsonl(&report.failures))?;

    for o in outcomes {
        for run in &o.llm_runs {
            let sub = dir.join("llm").join(sanitize_component(&run.model));
            fs::create_dir_all(&sub).map_err(|e| HarnessError::io(&sub, e))?;
            let name = format!(
                "{}.run{}.txt",
                sanitize_component(&o.utterance_id),
                run.result.run_index
            );
            write(&sub.join(name), &run.result.raw_reply)?;
        }
    }

    write(&dir.join(REPORT_TXT), &report.to_text())?;
    write(&dir.join(REPORT_CSV), &report.to_csv())?;
    write(&dir.join(CORRELATIONS_CSV), &report.correlations_csv())?;

    let has_llm = outcomes.iter().any(|o| !o.llm_runs.is_empty());
    let has_truth = outcomes.iter().any(|o| o.ground_truth.is_some());
    if has_llm && has_truth {
        let rows = llm_accuracy(manifest, &transcript_rows(outcomes))?;
        write(&dir.join(LLM_ACCURACY_FILE), &render_llm_accuracy(&rows))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub report: ReportTable,
    pub csv_matches: bool,
    pub text_matches: bool,
}

pub fn load_run_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    Ok(parse_manifest(&read(&dir.join(MANIFEST_FILE))?, dir)?)
}

/// Rebuilds the report from persisted per-utterance scores and compares it with the stored one.
pub fn replay(dir: &Path) -> Result<Replay, HarnessError> {
    let config: PipelineConfig = serde_json::from_str(&read(&dir.join(CONFIG_FILE))?)
        .map_err(|e| HarnessError::Malformed(format!("{CONFIG_FILE}: {e}")))?;
    let manifest = load_run_manifest(dir)?;
    let records = read_scores(&dir.join(SCORES_FILE))?;
    let failures: Vec<UtteranceFailure> = parse_jsonl(&dir.join(FAILURES_FILE))?;
    let report = build_report(
        &config.dataset,
        config.language.display_name(),
        &manifest,
        &records,
        &failures,
    )?;
    let stored_csv = read(&dir.join(REPORT_CSV))?;
    let stored_txt = read(&dir.join(REPORT_TXT))?;
    Ok(Replay {
        csv_matches: stored_csv == report.to_csv(),
        text_matches: stored_txt == report.to_text(),
        report,
    })
}

/// Quality of one LLM run's corrections, measured against the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmAccuracyRow {
    pub model: String,
    pub run_index: usize,
    pub n_utterances: usize,
    pub greedy_wer_micro: f64,
    pub greedy_wer_macro: f64,
    pub llm_wer_micro: f64,
    pub llm_wer_macro: f64,
    /// Correlation of per-speaker W_LLM WER with ratings.
    pub r_llm: Option<f64>,
}

pub fn llm_accuracy(manifest: &Manifest, transcripts: &[TranscriptRow]) -> Result<Vec<LlmAccuracyRow>, HarnessError> {
    let mut greedy: BTreeMap<&str, Transcript> = BTreeMap::new();
    let mut truth: BTreeMap<&str, Transcript> = BTreeMap::new();
    let mut llm: BTreeMap<(&str, usize), Vec<(&str, Transcript)>> = BTreeMap::new();
    for row in transcripts {
        let t = Transcript::new(row.text.clone(), row.source);
        match (row.source, &row.model, row.run_index) {
            (TranscriptSource::Greedy, _, _) => {
                greedy.insert(&row.utterance_id, t);
            }
            (TranscriptSource::GroundTruth, _, _) => {
                truth.insert(&row.utterance_id, t);
            }
            (TranscriptSource::LlmReference, Some(model), Some(run)) => {
                llm.entry((model, run)).or_default().push((&row.utterance_id, t));
            }
            _ => {}
        }
    }
    if truth.is_empty() {
        return Err(HarnessError::MissingGroundTruth);
    }
    let ratings = group_ratings(manifest);

    let mut rows = Vec::new();
    for ((model, run), utts) in llm {
        let mut greedy_acc = WerAccumulator::default();
        let mut llm_acc = WerAccumulator::default();
        let mut per_utt = Vec::new();
        for (utt, corrected) in utts {
            let (Some(gt), Some(g)) = (truth.get(utt), greedy.get(utt)) else {
                continue;
            };
            greedy_acc.add(&align_words(g.words(), gt.words()));
            let alignment = align_words(corrected.words(), gt.words());
            llm_acc.add(&alignment);
            per_utt.push(ScoreRecord {
                utterance_id: utt.to_string(),
                method: Method::Llm {
                    model: model.to_string(),
                    run_index: run,
                },
                value: wer(&alignment),
                hyp_source: Some(TranscriptSource::LlmReference),
                ref_source: Some(TranscriptSource::GroundTruth),
            });
        }
        if per_utt.is_empty() {
            continue;
        }
        let agg = aggregate_speaker(&per_utt, manifest)?;
        let (xs, ys): (Vec<f64>, Vec<f64>) = agg
            .scores
            .iter()
            .filter_map(|s| ratings.get(&s.group_key()).map(|r| (s.mean_value, *r)))
            .unzip();
        rows.push(LlmAccuracyRow {
            model: model.to_string(),
            run_index: run,
            n_utterances: per_utt.len(),
            greedy_wer_micro: greedy_acc.micro().unwrap_or(0.0),
            greedy_wer_macro: greedy_acc.macro_average().unwrap_or(0.0),
            llm_wer_micro: llm_acc.micro().unwrap_or(0.0),
            llm_wer_macro: llm_acc.macro_average().unwrap_or(0.0),
            r_llm: pearson(&xs, &ys).ok(),
        });
    }
    Ok(rows)
}

pub fn render_llm_accuracy(rows: &[LlmAccuracyRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "W_LLM accuracy against ground truth");
    let _ = writeln!(
        out,
        "WER averaging: micro (pooled edits / pooled reference words); macro shown alongside"
    );
    let _ = writeln!(
        out,
        "{:<20} {:>3} {:>5} {:>12} {:>12} {:>12} {:>12} {:>9}",
        "model", "run", "n", "greedy micro", "greedy macro", "llm micro", "llm macro", "r_W_LLM"
    );
    for r in rows {
        let corr = r.r_llm.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            out,
            "{:<20} {:>3} {:>5} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>9}",
            r.model,
            r.run_index,
            r.n_utterances,
            r.greedy_wer_micro,
            r.greedy_wer_macro,
            r.llm_wer_micro,
            r.llm_wer_macro,
            corr
        );
    }
    out
}

pub fn llm_accuracy_report(dir: &Path) -> Result<Vec<LlmAccuracyRow>, HarnessError> {
    let manifest = load_run_manifest(dir)?;
    let rows: Vec<TranscriptRow> = parse_jsonl(&dir.join(TRANSCRIPTS_FILE))?;
    llm_accuracy(&manifest, &rows)
}
