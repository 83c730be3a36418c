//! Reference transcriptions: the n-gram beam-search reference and LLM corrections.

mod llm;
mod prompt;

pub use llm::{
    correct_once, correct_with_llm, CorrectionRequest, CorrectionResult, Corrector, HttpCorrector, MockCorrector,
    RetryPolicy, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};
pub use prompt::{
    build_prompt, extract_bracketed, Extraction, Language, LANGUAGE_SLOT, PROMPT_TEMPLATE, SENTENCE_SLOT,
};

use crate::ctc::{beam_search_decode, DecodeError, DecoderConfig, LanguageModel};
use crate::io::{PosteriorMatrix, Transcript, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimited,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unparsable response: {0}")]
    BadResponse(String),
    #[error("model returned an empty reply")]
    EmptyReply,
    #[error("nothing to correct: greedy transcription is empty")]
    EmptySentence,
    #[error("configuration: {0}")]
    Config(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport(_) | Self::RateLimited)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReferenceError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Inputs for one of the two reference generators.
pub enum ReferenceMethod<'a> {
    Ngram {
        posteriors: &'a PosteriorMatrix,
        vocab: &'a Vocabulary,
        lm: &'a dyn LanguageModel,
        config: DecoderConfig,
    },
    Llm {
        client: &'a dyn Corrector,
        w_greedy: &'a Transcript,
        language: Language,
        model_name: String,
        runs: usize,
        temperature: f64,
        retry: RetryPolicy,
    },
}

/// Produces W_improved (one transcript) or one W_LLM transcript per run.
pub fn generate_reference(method: ReferenceMethod<'_>) -> Result<Vec<Transcript>, ReferenceError> {
    match method {
        ReferenceMethod::Ngram {
            posteriors,
            vocab,
            lm,
            config,
        } => Ok(vec![beam_search_decode(posteriors, vocab, lm, &config)?]),
        ReferenceMethod::Llm {
            client,
            w_greedy,
            language,
            model_name,
            runs,
            temperature,
            retry,
        } => Ok(
            correct_with_llm(client, w_greedy, &language, &model_name, runs, temperature, &retry)?
                .into_iter()
                .map(|r| r.corrected)
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc::{greedy_transcript, NoLanguageModel};
    use crate::io::{TranscriptSource, Validation};

    #[test]
    fn ngram_reference_on_peaked_posteriors_is_greedy() {
        let vocab = Vocabulary::from_symbols(["<blank>", "|", "a", "b"]).unwrap();
        let rows: Vec<Vec<f64>> = [2usize, 0, 3, 1, 2]
            .iter()
            .map(|&l| (0..4).map(|k| if k == l { 0.997 } else { 0.001 }).collect())
            .collect();
        let post = PosteriorMatrix::from_probabilities("u", &rows, Validation::default()).unwrap();
        let refs = generate_reference(ReferenceMethod::Ngram {
            posteriors: &post,
            vocab: &vocab,
            lm: &NoLanguageModel,
            config: DecoderConfig {
                alpha: 0.0,
                ..DecoderConfig::default()
            },
        })
        .unwrap();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].words(), greedy_transcript(&post, &vocab).unwrap().words());
    }

    #[test]
    fn llm_reference_uses_client() {
        let mut mock = MockCorrector::new();
        mock.insert("de kat zot", "Here: [de kat zat]");
        let greedy = Transcript::new("de kat zot", TranscriptSource::Greedy);
        let refs = generate_reference(ReferenceMethod::Llm {
            client: &mock,
            w_greedy: &greedy,
            language: Language::Dutch,
            model_name: "mock".into(),
            runs: 2,
            temperature: 0.0,
            retry: RetryPolicy::immediate(0),
        })
        .unwrap();
        assert_eq!(refs.len(), 2);
        assert!(refs.iter().all(|t| t.text() == "de kat zat"));
    }
}
