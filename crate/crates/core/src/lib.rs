//! Reference-free intelligibility scoring for pathological speech.
//!
//! A CTC acoustic model's greedy transcription is compared against a generated
//! reference (n-gram beam search or LLM correction); the word error rate between
//! the two serves as an inconsistency score that tracks perceptual ratings.

pub mod baselines;
pub mod ctc;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod ngram;
pub mod reference;
pub mod synth;
