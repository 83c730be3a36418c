//! Greedy and LM-fused prefix beam search decoding of CTC posteriors.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::io::{PosteriorMatrix, Transcript, TranscriptSource, Vocabulary};
use crate::ngram::NGramModel;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DecodeError {
    #[error("posterior matrix has {found} columns, vocabulary has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("every beam hypothesis was pruned to zero probability")]
    EmptyBeam,
    #[error("beam width must be at least 1")]
    InvalidBeamWidth,
    #[error("language model weight must be non-negative, got {0}")]
    InvalidAlpha(f64),
}

/// Frame-level argmax labels, one per posterior frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPath {
    pub labels: Vec<usize>,
}

/// Per-frame argmax; ties resolve to the lowest index.
pub fn greedy_decode(post: &PosteriorMatrix) -> RawPath {
    let labels = post
        .rows()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    RawPath { labels }
}

/// Merges runs of identical labels, then drops blanks.
pub fn collapse_labels(labels: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(labels.len());
    let mut prev = None;
    for &label in labels {
        if prev != Some(label) && label != blank {
            out.push(label);
        }
        prev = Some(label);
    }
    out
}

pub fn collapse(raw: &RawPath, vocab: &Vocabulary) -> Transcript {
    let labels = collapse_labels(&raw.labels, vocab.blank_index());
    Transcript::new(vocab.render(&labels), TranscriptSource::Greedy)
}

/// `collapse(greedy_decode(post))`, after checking the matrix against the vocabulary.
pub fn greedy_transcript(post: &PosteriorMatrix, vocab: &Vocabulary) -> Result<Transcript, DecodeError> {
    check_dims(post, vocab)?;
    Ok(collapse(&greedy_decode(post), vocab))
}

fn check_dims(post: &PosteriorMatrix, vocab: &Vocabulary) -> Result<(), DecodeError> {
    if post.vocab_size() != vocab.len() {
        return Err(DecodeError::DimensionMismatch {
            expected: vocab.len(),
            found: post.vocab_size(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Language model weight.
    pub alpha: f64,
    /// Bonus per emitted word.
    pub beta: f64,
    pub beam_width: usize,
    /// Hypotheses scoring this far (in nats) below the frame's best are dropped,
    /// and symbols this far below the frame's most likely symbol are not expanded.
    pub prune_logp_floor: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            beam_width: 100,
            prune_logp_floor: -20.0,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_width == 0 {
            return Err(DecodeError::InvalidBeamWidth);
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return Err(DecodeError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

/// acoustic + α·lm + β·words.
pub fn fused_score(acoustic_logp: f64, lm_logp: f64, word_count: usize, cfg: &DecoderConfig) -> f64 {
    let lm = if cfg.alpha == 0.0 { 0.0 } else { cfg.alpha * lm_logp };
    acoustic_logp + lm + cfg.beta * word_count as f64
}

/// Word-level scorer consulted at word boundaries during beam search.
pub trait LanguageModel {
    fn start_history(&self) -> Vec<String>;
    /// Natural-log P(word | history).
    fn word_logprob(&self, word: &str, history: &[String]) -> f64;
    /// Natural-log probability of ending the sentence after `history`.
    fn end_logprob(&self, history: &[String]) -> f64;
    /// Longest history that can influence a score.
    fn context_len(&self) -> usize;
}

impl LanguageModel for NGramModel {
    fn start_history(&self) -> Vec<String> {
        NGramModel::start_history(self)
    }

    fn word_logprob(&self, word: &str, history: &[String]) -> f64 {
        NGramModel::word_logprob(self, word, history)
    }

    fn end_logprob(&self, history: &[String]) -> f64 {
        NGramModel::end_logprob(self, history)
    }

    fn context_len(&self) -> usize {
        self.order().saturating_sub(1)
    }
}

/// Scores every word sequence as certain; reduces beam search to pure acoustics.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoLanguageModel;

impl LanguageModel for NoLanguageModel {
    fn start_history(&self) -> Vec<String> {
        Vec::new()
    }

    fn word_logprob(&self, _word: &str, _history: &[String]) -> f64 {
        0.0
    }

    fn end_logprob(&self, _history: &[String]) -> f64 {
        0.0
    }

    fn context_len(&self) -> usize {
        0
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Word-level state carried alongside a prefix; derived from the prefix alone.
#[derive(Debug, Clone, PartialEq)]
struct LmState {
    history: Vec<String>,
    partial: String,
    words: usize,
    lm_logp: f64,
}

/// A surviving prefix of the beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    /// Collapsed labels, blank-free.
    pub prefix: Vec<usize>,
    pub logp_blank: f64,
    pub logp_nonblank: f64,
    /// Summed LM log-probability of the words scored so far.
    pub lm_logp: f64,
    pub word_count: usize,
    pub fused_score: f64,
}

impl BeamHypothesis {
    pub fn acoustic_logp(&self) -> f64 {
        log_add(self.logp_blank, self.logp_nonblank)
    }
}

struct Candidate {
    logp_blank: f64,
    logp_nonblank: f64,
    lm: LmState,
}

fn rank(a_score: f64, a_prefix: &[usize], b_score: f64, b_prefix: &[usize]) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a_prefix.cmp(b_prefix))
}

struct Extender<'a, L: LanguageModel + ?Sized> {
    vocab: &'a Vocabulary,
    lm: &'a L,
}

impl<L: LanguageModel + ?Sized> Extender<'_, L> {
    fn extend(&self, state: &LmState, label: usize) -> LmState {
        let mut next = state.clone();
        if label == self.vocab.delimiter_index() {
            if !next.partial.is_empty() {
                let word = std::mem::take(&mut next.partial);
                self.complete_word(&mut next, word);
            }
        } else if let Some(symbol) = self.vocab.symbol(label) {
            next.partial.push_str(symbol);
        }
        next
    }

    fn complete_word(&self, state: &mut LmState, word: String) {
        state.lm_logp += self.lm.word_logprob(&word, &state.history);
        state.words += 1;
        state.history.push(word);
        let keep = self.lm.context_len();
        if state.history.len() > keep {
            let drop = state.history.len() - keep;
            state.history.drain(..drop);
        }
    }

    /// Scores the trailing partial word and the sentence end.
    fn finish(&self, state: &LmState) -> LmState {
        let mut done = state.clone();
        if !done.partial.is_empty() {
            let word = std::mem::take(&mut done.partial);
            self.complete_word(&mut done, word);
        }
        done.lm_logp += self.lm.end_logprob(&done.history);
        done
    }
}

/// Runs CTC prefix beam search and returns the final hypotheses, best first.
///
/// Each prefix keeps the log-mass of alignments ending in blank and in its
/// last symbol; the LM term is added whenever a delimiter closes a word and
/// once more at the end for the trailing word and sentence end.
pub fn beam_search<L: LanguageModel + ?Sized>(
    post: &PosteriorMatrix,
    vocab: &Vocabulary,
    lm: &L,
    cfg: &DecoderConfig,
) -> Result<Vec<BeamHypothesis>, DecodeError> {
    cfg.validate()?;
    check_dims(post, vocab)?;
    let blank = vocab.blank_index();
    let ext = Extender { vocab, lm };

    let fused = |c: &Candidate| fused_score(log_add(c.logp_blank, c.logp_nonblank), c.lm.lm_logp, c.lm.words, cfg);

    let mut beam: Vec<(Vec<usize>, Candidate)> = vec![(
        Vec::new(),
        Candidate {
            logp_blank: 0.0,
            logp_nonblank: f64::NEG_INFINITY,
            lm: LmState {
                history: lm.start_history(),
                partial: String::new(),
                words: 0,
                lm_logp: 0.0,
            },
        },
    )];

    for row in post.rows() {
        let symbol_floor = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) + cfg.prune_logp_floor;
        let mut next: HashMap<Vec<usize>, Candidate> = HashMap::with_capacity(beam.len() * 4);
        for (prefix, hyp) in &beam {
            let total = log_add(hyp.logp_blank, hyp.logp_nonblank);
            let last = prefix.last().copied();

            // blank keeps the prefix
            let entry = next.entry(prefix.clone()).or_insert_with(|| Candidate {
                logp_blank: f64::NEG_INFINITY,
                logp_nonblank: f64::NEG_INFINITY,
                lm: hyp.lm.clone(),
            });
            entry.logp_blank = log_add(entry.logp_blank, total + row[blank]);
            // repeating the last symbol without a blank also keeps it
            if let Some(c) = last {
                entry.logp_nonblank = log_add(entry.logp_nonblank, hyp.logp_nonblank + row[c]);
            }

            for (label, &lp) in row.iter().enumerate() {
                if label == blank || lp < symbol_floor {
                    continue;
                }
                // a repeated symbol only extends when separated by a blank
                let source = if Some(label) == last { hyp.logp_blank } else { total };
                if source == f64::NEG_INFINITY {
                    continue;
                }
                let mut extended = Vec::with_capacity(prefix.len() + 1);
                extended.extend_from_slice(prefix);
                extended.push(label);
                match next.get_mut(&extended) {
                    Some(entry) => entry.logp_nonblank = log_add(entry.logp_nonblank, source + lp),
                    None => {
                        let lm_state = ext.extend(&hyp.lm, label);
                        next.insert(
                            extended,
                            Candidate {
                                logp_blank: f64::NEG_INFINITY,
                                logp_nonblank: source + lp,
                                lm: lm_state,
                            },
                        );
                    }
                }
            }
        }

        let mut scored: Vec<(f64, Vec<usize>, Candidate)> = next
            .into_iter()
            .map(|(prefix, c)| (fused(&c), prefix, c))
            .filter(|(score, _, _)| *score > f64::NEG_INFINITY)
            .collect();
        if scored.is_empty() {
            return Err(DecodeError::EmptyBeam);
        }
        scored.sort_by(|a, b| rank(a.0, &a.1, b.0, &b.1));
        let best = scored[0].0;
        scored.truncate(cfg.beam_width);
        scored.retain(|(score, _, _)| *score - best >= cfg.prune_logp_floor);
        beam = scored.into_iter().map(|(_, p, c)| (p, c)).collect();
    }

    let mut finals: Vec<BeamHypothesis> = beam
        .into_iter()
        .map(|(prefix, c)| {
            let done = ext.finish(&c.lm);
            let acoustic = log_add(c.logp_blank, c.logp_nonblank);
            BeamHypothesis {
                prefix,
                logp_blank: c.logp_blank,
                logp_nonblank: c.logp_nonblank,
                lm_logp: done.lm_logp,
                word_count: done.words,
                fused_score: fused_score(acoustic, done.lm_logp, done.words, cfg),
            }
        })
        .collect();
    finals.sort_by(|a, b| rank(a.fused_score, &a.prefix, b.fused_score, &b.prefix));
    if finals.first().is_none_or(|h| h.fused_score == f64::NEG_INFINITY) {
        return Err(DecodeError::EmptyBeam);
    }
    Ok(finals)
}

/// Highest-scoring beam hypothesis rendered as an n-gram reference transcript.
pub fn beam_search_decode<L: LanguageModel + ?Sized>(
    post: &PosteriorMatrix,
    vocab: &Vocabulary,
    lm: &L,
    cfg: &DecoderConfig,
) -> Result<Transcript, DecodeError> {
    let finals = beam_search(post, vocab, lm, cfg)?;
    let best = &finals[0];
    Ok(Transcript::new(
        vocab.render(&best.prefix),
        TranscriptSource::NgramReference,
    ))
}
