mod support;

use asr_inconsistency::ngram::{parse_arpa, NGramModel, DEFAULT_OOV_LOGPROB};
use asr_inconsistency::synth::{bigram_arpa, corpus};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::fixtures::{bigram_hand_values, BIGRAM_ARPA};

fn synthetic_lm() -> NGramModel {
    parse_arpa(&bigram_arpa(corpus(), 0.5)).unwrap()
}

#[test]
fn bigram_fixture_matches_hand_values() {
    let lm = parse_arpa(BIGRAM_ARPA).unwrap();
    assert_eq!(lm.order(), 2);
    assert_eq!((lm.ngram_count(1), lm.ngram_count(2)), (3, 3));
    for (history, word, expected) in bigram_hand_values() {
        let got = lm.word_logprob(word, &history);
        assert!(
            (got - expected).abs() <= 1e-12,
            "P({word} | {history:?}) = {got}, expected {expected}"
        );
    }
}

#[test]
fn oov_floor_is_one_in_ten_billion() {
    let lm = parse_arpa(BIGRAM_ARPA).unwrap();
    assert!((DEFAULT_OOV_LOGPROB - 1e-10f64.ln()).abs() < 1e-15);
    assert_eq!(lm.word_logprob("unseen", &["a"]), DEFAULT_OOV_LOGPROB);
}

fn probe_set(rng: &mut ChaCha8Rng, words: &[String], n: usize) -> Vec<(Vec<String>, String)> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(0..3);
            let history = (0..len).map(|_| words.choose(rng).unwrap().clone()).collect();
            (history, words.choose(rng).unwrap().clone())
        })
        .collect()
}

fn assert_round_trip(lm: &NGramModel, probe_words: &[String]) {
    let reparsed = parse_arpa(&lm.to_arpa()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (history, word) in probe_set(&mut rng, probe_words, 100) {
        assert_eq!(
            lm.word_logprob(&word, &history).to_bits(),
            reparsed.word_logprob(&word, &history).to_bits(),
            "P({word} | {history:?})"
        );
    }
    assert_eq!(reparsed.to_arpa(), lm.to_arpa());
}

#[test]
fn serialization_preserves_probe_queries_exactly() {
    let words: Vec<String> = ["a", "b", "c", "zzz"].iter().map(|s| s.to_string()).collect();
    assert_round_trip(&parse_arpa(BIGRAM_ARPA).unwrap(), &words);

    let lm = synthetic_lm();
    let mut words: Vec<String> = lm.vocabulary().to_vec();
    words.push("onbekend".into());
    assert_round_trip(&lm, &words);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditionals_sum_to_at_most_one(h in 0usize..64) {
        let lm = synthetic_lm();
        let vocab = lm.vocabulary();
        let history = &vocab[h % vocab.len()];
        prop_assume!(history != "</s>");
        let total: f64 = vocab
            .iter()
            .filter(|w| w.as_str() != "<s>")
            .map(|w| lm.word_logprob(w, &[history.as_str()]).exp())
            .sum();
        prop_assert!(total <= 1.0 + 1e-6, "history {}: {}", history, total);
    }

    #[test]
    fn sequence_logprob_is_the_sum_of_conditionals(picks in prop::collection::vec(0usize..64, 1..8)) {
        let lm = synthetic_lm();
        let vocab: Vec<&str> = lm
            .vocabulary()
            .iter()
            .map(String::as_str)
            .filter(|w| !w.starts_with('<'))
            .collect();
        let words: Vec<&str> = picks.iter().map(|&i| vocab[i % vocab.len()]).collect();
        let mut history = vec!["<s>".to_string()];
        let mut expected = 0.0;
        for w in &words {
            expected += lm.word_logprob(w, &history);
            history.push(w.to_string());
        }
        expected += lm.word_logprob("</s>", &history);
        let got = lm.sequence_logprob(&words).unwrap();
        prop_assert!((got - expected).abs() <= 1e-9);
    }
}
