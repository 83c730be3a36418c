//! Word-level alignment, WER, the inconsistency score and explainability diffs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::io::{Transcript, TranscriptSource};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("utterance {0:?} has no ground-truth transcription")]
    MissingGroundTruth(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-' | '\u{2010}')
}

/// NFC, lowercase, punctuation removed (apostrophes and hyphens survive
/// between word characters), split on whitespace.
pub fn normalize_text(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.nfc().flat_map(char::to_lowercase).collect();
    let mut cleaned = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        let keep = if c == '|' {
            false
        } else if c.general_category_group() == GeneralCategoryGroup::Punctuation {
            is_joiner(c)
                && i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphanumeric()
                && chars[i + 1].is_alphanumeric()
        } else {
            true
        };
        cleaned.push(if keep { c } else { ' ' });
    }
    cleaned.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Match,
    Substitute,
    /// A hypothesis word with no reference counterpart.
    Insert,
    /// A reference word missing from the hypothesis.
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOp {
    pub kind: EditKind,
    pub hyp_index: Option<usize>,
    pub ref_index: Option<usize>,
    pub hyp_word: Option<String>,
    pub ref_word: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditAlignment {
    pub ops: Vec<EditOp>,
    pub n_sub: usize,
    pub n_ins: usize,
    pub n_del: usize,
    pub n_match: usize,
    pub ref_len: usize,
}

impl EditAlignment {
    pub fn cost(&self) -> usize {
        self.n_sub + self.n_ins + self.n_del
    }

    pub fn hyp_len(&self) -> usize {
        self.n_match + self.n_sub + self.n_ins
    }

    /// Recovers the hypothesis and reference sequences from the ops.
    pub fn project(&self) -> (Vec<String>, Vec<String>) {
        let hyp = self.ops.iter().filter_map(|op| op.hyp_word.clone()).collect();
        let reference = self.ops.iter().filter_map(|op| op.ref_word.clone()).collect();
        (hyp, reference)
    }
}

/// Minimal unit-cost alignment. Backtrace prefers the diagonal, then deletion, then insertion.
pub fn align_words<S: AsRef<str>, R: AsRef<str>>(hyp: &[S], reference: &[R]) -> EditAlignment {
    let n = reference.len();
    let m = hyp.len();
    let width = m + 1;
    let mut dist = vec![0usize; (n + 1) * width];
    for (j, d) in dist[..width].iter_mut().enumerate() {
        *d = j;
    }
    for i in 1..=n {
        dist[i * width] = i;
        for j in 1..=m {
            let diag = dist[(i - 1) * width + j - 1] + usize::from(reference[i - 1].as_ref() != hyp[j - 1].as_ref());
            let del = dist[(i - 1) * width + j] + 1;
            let ins = dist[i * width + j - 1] + 1;
            dist[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1].as_ref() == hyp[j - 1].as_ref();
            if dist[(i - 1) * width + j - 1] + usize::from(!same) == here {
                ops.push(EditOp {
                    kind: if same { EditKind::Match } else { EditKind::Substitute },
                    hyp_index: Some(j - 1),
                    ref_index: Some(i - 1),
                    hyp_word: Some(hyp[j - 1].as_ref().to_string()),
                    ref_word: Some(reference[i - 1].as_ref().to_string()),
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dist[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp {
                kind: EditKind::Delete,
                hyp_index: None,
                ref_index: Some(i - 1),
                hyp_word: None,
                ref_word: Some(reference[i - 1].as_ref().to_string()),
            });
            i -= 1;
        } else {
            ops.push(EditOp {
                kind: EditKind::Insert,
                hyp_index: Some(j - 1),
                ref_index: None,
                hyp_word: Some(hyp[j - 1].as_ref().to_string()),
                ref_word: None,
            });
            j -= 1;
        }
    }
    ops.reverse();

    let count = |k: EditKind| ops.iter().filter(|op| op.kind == k).count();
    EditAlignment {
        n_sub: count(EditKind::Substitute),
        n_ins: count(EditKind::Insert),
        n_del: count(EditKind::Delete),
        n_match: count(EditKind::Match),
        ref_len: n,
        ops,
    }
}

/// Value reported when the reference is empty but the hypothesis is not.
pub const DEFAULT_EMPTY_REFERENCE_CAP: f64 = 1.0;

pub fn wer(alignment: &EditAlignment) -> f64 {
    wer_with_cap(alignment, DEFAULT_EMPTY_REFERENCE_CAP)
}

pub fn wer_with_cap(alignment: &EditAlignment, empty_reference_cap: f64) -> f64 {
    if alignment.ref_len == 0 {
        (alignment.hyp_len() as f64).min(empty_reference_cap)
    } else {
        alignment.cost() as f64 / alignment.ref_len as f64
    }
}

/// Pooled (micro) and per-utterance mean (macro) WER over a corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WerAccumulator {
    edits: usize,
    ref_words: usize,
    per_utterance: Vec<f64>,
}

impl WerAccumulator {
    pub fn add(&mut self, alignment: &EditAlignment) {
        self.edits += alignment.cost();
        self.ref_words += alignment.ref_len;
        self.per_utterance.push(wer(alignment));
    }

    pub fn count(&self) -> usize {
        self.per_utterance.len()
    }

    pub fn micro(&self) -> Option<f64> {
        if self.per_utterance.is_empty() {
            None
        } else if self.ref_words == 0 {
            Some(if self.edits == 0 {
                0.0
            } else {
                DEFAULT_EMPTY_REFERENCE_CAP
            })
        } else {
            Some(self.edits as f64 / self.ref_words as f64)
        }
    }

    pub fn macro_average(&self) -> Option<f64> {
        if self.per_utterance.is_empty() {
            None
        } else {
            Some(self.per_utterance.iter().sum::<f64>() / self.per_utterance.len() as f64)
        }
    }
}

/// Scoring method families, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    SpeechRate,
    WadaSnr,
    Ngram,
    Llm,
    ReferenceWer,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::SpeechRate,
        MethodKind::WadaSnr,
        MethodKind::Ngram,
        MethodKind::Llm,
        MethodKind::ReferenceWer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SpeechRate => "speech_rate",
            Self::WadaSnr => "wada_snr",
            Self::Ngram => "ngram",
            Self::Llm => "llm",
            Self::ReferenceWer => "reference_wer",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodKind {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| MetricsError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SpeechRate,
    WadaSnr,
    Ngram,
    Llm { model: String, run_index: usize },
    ReferenceWer,
}

impl Method {
    pub fn kind(&self) -> MethodKind {
        match self {
            Self::SpeechRate => MethodKind::SpeechRate,
            Self::WadaSnr => MethodKind::WadaSnr,
            Self::Ngram => MethodKind::Ngram,
            Self::Llm { .. } => MethodKind::Llm,
            Self::ReferenceWer => MethodKind::ReferenceWer,
        }
    }

    /// Method column value: the family name, or `llm:<model>` for LLM references.
    pub fn label(&self) -> String {
        match self {
            Self::Llm { model, .. } => format!("llm:{model}"),
            other => other.kind().as_str().to_string(),
        }
    }

    pub fn run_index(&self) -> Option<usize> {
        match self {
            Self::Llm { run_index, .. } => Some(*run_index),
            _ => None,
        }
    }

    /// Inverse of `label` + `run_index`.
    pub fn from_label(label: &str, run_index: Option<usize>) -> Result<Self, MetricsError> {
        if let Some(model) = label.strip_prefix("llm:") {
            return Ok(Self::Llm {
                model: model.to_string(),
                run_index: run_index.unwrap_or(0),
            });
        }
        Ok(match label.parse::<MethodKind>()? {
            MethodKind::SpeechRate => Self::SpeechRate,
            MethodKind::WadaSnr => Self::WadaSnr,
            MethodKind::Ngram => Self::Ngram,
            MethodKind::ReferenceWer => Self::ReferenceWer,
            MethodKind::Llm => Self::Llm {
                model: String::new(),
                run_index: run_index.unwrap_or(0),
            },
        })
    }

    pub fn is_wer_family(&self) -> bool {
        matches!(self, Self::Ngram | Self::Llm { .. } | Self::ReferenceWer)
    }
}

/// One per-utterance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub utterance_id: String,
    pub method: Method,
    pub value: f64,
    pub hyp_source: Option<TranscriptSource>,
    pub ref_source: Option<TranscriptSource>,
}

/// WER of the greedy transcription against a generated reference; higher means less intelligible.
pub fn inconsistency_score(
    utterance_id: &str,
    method: Method,
    w_greedy: &Transcript,
    w_ref: &Transcript,
) -> ScoreRecord {
    let alignment = align_words(w_greedy.words(), w_ref.words());
    ScoreRecord {
        utterance_id: utterance_id.to_string(),
        method,
        value: wer(&alignment),
        hyp_source: Some(w_greedy.source()),
        ref_source: Some(w_ref.source()),
    }
}

/// Standard WER with the ground truth as reference.
pub fn reference_wer(
    utterance_id: &str,
    hyp: &Transcript,
    ground_truth: Option<&Transcript>,
) -> Result<ScoreRecord, MetricsError> {
    let ground_truth = ground_truth.ok_or_else(|| MetricsError::MissingGroundTruth(utterance_id.to_string()))?;
    let alignment = align_words(hyp.words(), ground_truth.words());
    Ok(ScoreRecord {
        utterance_id: utterance_id.to_string(),
        method: Method::ReferenceWer,
        value: wer(&alignment),
        hyp_source: Some(hyp.source()),
        ref_source: Some(TranscriptSource::GroundTruth),
    })
}

/// A highlighted difference between hypothesis and reference.
///
/// `hyp_offset` is the hypothesis position the span applies to; for a
/// deletion it is the point where the missing reference word belongs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSpan {
    pub kind: EditKind,
    pub hyp_offset: usize,
    pub hyp_index: Option<usize>,
    pub ref_index: Option<usize>,
    pub hyp_word: Option<String>,
    pub ref_word: Option<String>,
}

pub fn diff_report(alignment: &EditAlignment) -> Vec<DiffSpan> {
    let mut spans = Vec::new();
    let mut hyp_offset = 0;
    for op in &alignment.ops {
        if op.kind != EditKind::Match {
            spans.push(DiffSpan {
                kind: op.kind,
                hyp_offset,
                hyp_index: op.hyp_index,
                ref_index: op.ref_index,
                hyp_word: op.hyp_word.clone(),
                ref_word: op.ref_word.clone(),
            });
        }
        if op.hyp_index.is_some() {
            hyp_offset += 1;
        }
    }
    spans
}

/// Applies diff spans to the hypothesis, yielding the reference.
pub fn apply_spans<S: AsRef<str>>(hyp: &[S], spans: &[DiffSpan]) -> Vec<String> {
    let mut words: Vec<String> = hyp.iter().map(|w| w.as_ref().to_string()).collect();
    for span in spans.iter().rev() {
        match span.kind {
            EditKind::Match => {}
            EditKind::Substitute => {
                words[span.hyp_offset] = span.ref_word.clone().unwrap_or_default();
            }
            EditKind::Insert => {
                words.remove(span.hyp_offset);
            }
            EditKind::Delete => {
                words.insert(span.hyp_offset, span.ref_word.clone().unwrap_or_default());
            }
        }
    }
    words
}

/// Two aligned lines with differing words wrapped in `**`.
pub fn render_diff(alignment: &EditAlignment) -> (String, String) {
    let mut hyp_line = Vec::new();
    let mut ref_line = Vec::new();
    for op in &alignment.ops {
        let mark = |w: &Option<String>| w.as_ref().map(|w| format!("**{w}**"));
        match op.kind {
            EditKind::Match => {
                hyp_line.extend(op.hyp_word.clone());
                ref_line.extend(op.ref_word.clone());
            }
            _ => {
                hyp_line.extend(mark(&op.hyp_word));
                ref_line.extend(mark(&op.ref_word));
            }
        }
    }
    (hyp_line.join(" "), ref_line.join(" "))
}

#[derive(Serialize)]
struct SpanLine<'a> {
    utterance_id: &'a str,
    method: &'a str,
    #[serde(flatten)]
    span: &'a DiffSpan,
}

/// One JSON object per span, tagged with the utterance and method.
pub fn spans_to_jsonl(utterance_id: &str, method: &str, spans: &[DiffSpan]) -> String {
    let mut out = String::new();
    for span in spans {
        let line = SpanLine {
            utterance_id,
            method,
            span,
        };
        out.push_str(&serde_json::to_string(&line).expect("span serializes"));
        out.push('\n');
    }
    out
}
