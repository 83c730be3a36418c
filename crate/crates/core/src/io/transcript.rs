use serde::{Deserialize, Serialize};

use crate::metrics::normalize_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptSource {
    Greedy,
    NgramReference,
    LlmReference,
    GroundTruth,
}

impl TranscriptSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::NgramReference => "ngram_reference",
            Self::LlmReference => "llm_reference",
            Self::GroundTruth => "ground_truth",
        }
    }
}

/// A word sequence together with the text it was normalized from.
///
/// `words` is always `normalize_text(raw_text)`; the only way to build one is
/// through [`Transcript::new`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    raw_text: String,
    words: Vec<String>,
    source: TranscriptSource,
}

impl Transcript {
    pub fn new(raw_text: impl Into<String>, source: TranscriptSource) -> Self {
        let raw_text = raw_text.into();
        let words = normalize_text(&raw_text);
        Self {
            raw_text,
            words,
            source,
        }
    }

    pub fn empty(source: TranscriptSource) -> Self {
        Self::new(String::new(), source)
    }

    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn source(&self) -> TranscriptSource {
        self.source
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Normalized words joined by single spaces.
    pub fn text(&self) -> String {
        self.words.join(" ")
    }

    pub fn with_source(mut self, source: TranscriptSource) -> Self {
        self.source = source;
        self
    }
}
