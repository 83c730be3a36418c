//! Synthetic corpus generator: near-one-hot posteriors with injected word
//! substitutions, a matching bigram LM, Gamma-speech audio and mock LLM replies.
//!
//! A speaker with noise rate `p` gets exactly `round(p · W)` of their `W` words
//! corrupted. A corrupted word keeps the true letters as runner-up at each
//! corrupted frame, so greedy decoding emits an out-of-vocabulary word while
//! LM-fused beam search can recover the original.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::io::{
    write_wav, LoadError, Manifest, PosteriorMatrix, UtteranceRecord, Validation, Vocabulary, BLANK_SYMBOL,
    DELIMITER_SYMBOL,
};

const ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz";

/// Shape of the Gamma law used for synthetic speech amplitudes.
pub const SPEECH_GAMMA_SHAPE: f64 = 0.4;

const CORPUS: &[&str] = &[
    "de kat zit op de mat",
    "het weer is vandaag erg mooi",
    "ik ga morgen naar de markt",
    "wij eten brood met kaas",
    "de hond loopt in het park",
    "mijn broer werkt in de stad",
    "zij leest een boek over dieren",
    "de trein vertrekt om acht uur",
    "het kind speelt met een bal",
    "we drinken koffie in de keuken",
    "de bakker bakt vers brood",
    "mijn moeder kookt elke avond",
    "de vogels zingen in de boom",
    "hij fietst naar zijn werk",
    "de zon schijnt op het dak",
    "wij wonen in een klein huis",
    "de boer melkt de koeien",
    "het regent al de hele dag",
    "zij schrijft een brief aan oma",
    "de winkel gaat om negen uur open",
];

/// Off-target probability per symbol in clean frames; ln of it sits below the beam's prune floor.
const CLEAN_EPS: f64 = 1e-10;
const CORRUPT_WRONG: f64 = 0.6;
const CORRUPT_TRUE: f64 = 0.35;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub dataset: String,
    /// One speaker per entry.
    pub noise_rates: Vec<f64>,
    pub utterances_per_speaker: usize,
    pub seed: u64,
    pub sample_rate_hz: u32,
}

impl SynthConfig {
    /// Twelve speakers with p = 0.00, 0.05, ..., 0.55.
    pub fn standard() -> Self {
        Self {
            dataset: "synthetic".into(),
            noise_rates: (0..12).map(|i| i as f64 * 0.05).collect(),
            utterances_per_speaker: 6,
            seed: 20250101,
            sample_rate_hz: 8000,
        }
    }

    /// Five speakers with two utterances each.
    pub fn small() -> Self {
        Self {
            dataset: "synthetic-small".into(),
            noise_rates: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            utterances_per_speaker: 2,
            seed: 7,
            sample_rate_hz: 4000,
        }
    }

    pub fn rating(noise_rate: f64) -> f64 {
        5.0 * (1.0 - noise_rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub utterance_id: String,
    pub speaker_id: String,
    pub noise_rate: f64,
    pub truth: Vec<String>,
    pub greedy: Vec<String>,
    /// Word positions that were corrupted.
    pub corrupted: Vec<usize>,
    pub duration_s: f64,
    pub snr_db: f64,
}

impl SynthUtterance {
    /// Greedy words with every other corrupted word (first, third, ...) restored.
    pub fn half_fixed(&self) -> Vec<String> {
        let mut words = self.greedy.clone();
        for (k, &pos) in self.corrupted.iter().enumerate() {
            if k % 2 == 0 {
                words[pos] = self.truth[pos].clone();
            }
        }
        words
    }
}

#[derive(Debug, Clone)]
pub struct SynthFixture {
    pub dir: PathBuf,
    pub manifest_path: PathBuf,
    pub vocab_path: PathBuf,
    pub lm_path: PathBuf,
    /// Replies that restore every other corrupted word.
    pub mock_replies_path: PathBuf,
    /// Replies that restore every corrupted word.
    pub mock_full_replies_path: PathBuf,
    pub utterances: Vec<SynthUtterance>,
}

pub fn corpus() -> &'static [&'static str] {
    CORPUS
}

pub fn vocabulary() -> Vocabulary {
    let mut symbols = vec![BLANK_SYMBOL.to_string(), DELIMITER_SYMBOL.to_string()];
    symbols.extend(ALPHABET.chars().map(String::from));
    Vocabulary::from_symbols(symbols).expect("static vocabulary is valid")
}

/// Bigram ARPA model with absolute discounting; back-off weights keep each history normalized.
pub fn bigram_arpa(sentences: &[&str], discount: f64) -> String {
    let mut unigram: BTreeMap<&str, usize> = BTreeMap::new();
    let mut bigram: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut history: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut tokens = 0usize;
    for s in sentences {
        let words: Vec<&str> = std::iter::once("<s>")
            .chain(s.split_whitespace())
            .chain(std::iter::once("</s>"))
            .collect();
        for w in &words[1..] {
            *unigram.entry(w).or_default() += 1;
            tokens += 1;
        }
        for pair in words.windows(2) {
            *bigram.entry((pair[0], pair[1])).or_default() += 1;
        }
    }
    for (&(h, _), &c) in &bigram {
        let e = history.entry(h).or_default();
        e.0 += c;
        e.1 += 1;
    }
    let p_uni = |w: &str| unigram[w] as f64 / tokens as f64;
    // lambda(h) = D · distinct successors / c(h); equals the back-off weight
    let bow = |h: &str| history.get(h).map(|&(c, n)| discount * n as f64 / c as f64);

    let mut out = String::new();
    let _ = writeln!(out, "\\data\\");
    let _ = writeln!(out, "ngram 1={}", unigram.len() + 1);
    let _ = writeln!(out, "ngram 2={}", bigram.len());
    let _ = writeln!(out, "\n\\1-grams:");
    let mut lines: Vec<(&str, String)> = unigram
        .keys()
        .map(|&w| {
            let mut line = format!("{:.6}\t{w}", p_uni(w).log10());
            if let Some(b) = bow(w) {
                let _ = write!(line, "\t{:.6}", b.log10());
            }
            (w, line)
        })
        .collect();
    lines.push((
        "<s>",
        format!("-99\t<s>\t{:.6}", bow("<s>").expect("<s> has successors").log10()),
    ));
    lines.sort();
    for (_, line) in lines {
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "\n\\2-grams:");
    for (&(h, w), &c) in &bigram {
        let (ch, _) = history[h];
        let p = (c as f64 - discount) / ch as f64 + bow(h).unwrap() * p_uni(w);
        let _ = writeln!(out, "{:.6}\t{h} {w}", p.log10());
    }
    let _ = writeln!(out, "\n\\end\\");
    out
}

/// Zero-mean Gamma-amplitude "speech" with random sign plus white Gaussian noise at `snr_db`.
///
/// SNR is the ratio of mean squared speech amplitude to noise variance.
pub fn gamma_speech_mixture<R: Rng>(rng: &mut R, n: usize, snr_db: f64) -> Vec<f64> {
    let a = SPEECH_GAMMA_SHAPE;
    let gamma = Gamma::new(a, 1.0).expect("valid shape");
    let speech_power = a * (a + 1.0);
    let sigma = (speech_power / 10f64.powf(snr_db / 10.0)).sqrt();
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    (0..n)
        .map(|_| {
            let mag: f64 = gamma.sample(rng);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            sign * mag + noise.sample(rng)
        })
        .collect()
}

fn frame(vocab_len: usize, peaks: &[(usize, f64)]) -> Vec<f64> {
    let rest = 1.0 - peaks.iter().map(|&(_, p)| p).sum::<f64>();
    let others = (vocab_len - peaks.len()) as f64;
    let mut row = vec![rest / others; vocab_len];
    for &(i, p) in peaks {
        row[i] = p;
    }
    row
}

fn clean_frame(vocab_len: usize, symbol: usize) -> Vec<f64> {
    frame(vocab_len, &[(symbol, 1.0 - CLEAN_EPS * (vocab_len - 1) as f64)])
}

/// Frame rows for a sentence; characters where `greedy` differs from `truth` get a two-way split.
fn posterior_rows(vocab: &Vocabulary, truth: &[String], greedy: &[String]) -> Vec<Vec<f64>> {
    let v = vocab.len();
    let blank = vocab.blank_index();
    let idx = |c: char| vocab.index_of(&c.to_string()).expect("letter in vocabulary");
    let mut rows = vec![clean_frame(v, blank)];
    for (w, (t, g)) in truth.iter().zip(greedy).enumerate() {
        if w > 0 {
            rows.push(clean_frame(v, vocab.delimiter_index()));
            rows.push(clean_frame(v, blank));
        }
        for (tc, gc) in t.chars().zip(g.chars()) {
            if tc == gc {
                rows.push(clean_frame(v, idx(tc)));
            } else {
                rows.push(frame(v, &[(idx(gc), CORRUPT_WRONG), (idx(tc), CORRUPT_TRUE)]));
            }
            rows.push(clean_frame(v, blank));
        }
    }
    rows
}

fn corrupt_word<R: Rng>(rng: &mut R, word: &str, known: &HashSet<&str>) -> String {
    let letters: Vec<char> = ALPHABET.chars().collect();
    loop {
        let mut chars: Vec<char> = word.chars().collect();
        let n_sub = if chars.len() >= 4 { rng.gen_range(1..=2) } else { 1 };
        for pos in sample(rng, chars.len(), n_sub.min(chars.len())) {
            let original = chars[pos];
            chars[pos] = loop {
                let c = letters[rng.gen_range(0..letters.len())];
                if c != original {
                    break c;
                }
            };
        }
        let candidate: String = chars.into_iter().collect();
        if !known.contains(candidate.as_str()) {
            return candidate;
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn reply_json(utts: &[SynthUtterance], fix: impl Fn(&SynthUtterance) -> Vec<String>) -> String {
    let replies: BTreeMap<String, String> = utts
        .iter()
        .map(|u| (u.greedy.join(" "), format!("[{}]", fix(u).join(" "))))
        .collect();
    let mut s = serde_json::to_string_pretty(&replies).expect("map serializes");
    s.push('\n');
    s
}

/// Writes a complete fixture (manifest, vocabulary, LM, posteriors, audio, mock replies) into `dir`.
pub fn generate(dir: &Path, config: &SynthConfig) -> Result<SynthFixture, SynthError> {
    if config.noise_rates.is_empty() || config.utterances_per_speaker == 0 {
        return Err(SynthError::Config("need at least one speaker and one utterance".into()));
    }
    if config.noise_rates.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(SynthError::Config("noise rates must lie in [0, 1]".into()));
    }
    if config.sample_rate_hz == 0 {
        return Err(SynthError::Config("sample rate must be positive".into()));
    }
    for sub in ["posteriors", "audio"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    let vocab = vocabulary();
    let known: HashSet<&str> = CORPUS.iter().flat_map(|s| s.split_whitespace()).collect();

    let mut utterances = Vec::new();
    let mut records = Vec::new();
    for (s, &p) in config.noise_rates.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(s as u64);
        let speaker_id = format!("spk{:02}", s + 1);
        let sentences: Vec<Vec<String>> = (0..config.utterances_per_speaker)
            .map(|u| {
                let k = (s * config.utterances_per_speaker + u) % CORPUS.len();
                CORPUS[k].split_whitespace().map(String::from).collect()
            })
            .collect();
        let positions: Vec<(usize, usize)> = sentences
            .iter()
            .enumerate()
            .flat_map(|(u, words)| (0..words.len()).map(move |w| (u, w)))
            .collect();
        let n_corrupt = (p * positions.len() as f64).round() as usize;
        let mut chosen: Vec<(usize, usize)> = sample(&mut rng, positions.len(), n_corrupt)
            .into_iter()
            .map(|i| positions[i])
            .collect();
        chosen.sort();
        let mut by_utt: HashMap<usize, Vec<usize>> = HashMap::new();
        for (u, w) in chosen {
            by_utt.entry(u).or_default().push(w);
        }

        // decreasing rate and SNR with p keep the baselines informative
        let words_per_s = 3.0 - 2.0 * p;
        let snr_db = 25.0 - 40.0 * p;
        for (u, truth) in sentences.into_iter().enumerate() {
            let utterance_id = format!("{speaker_id}_u{:02}", u + 1);
            let corrupted = by_utt.remove(&u).unwrap_or_default();
            let mut greedy = truth.clone();
            for &w in &corrupted {
                greedy[w] = corrupt_word(&mut rng, &truth[w], &known);
            }
            let rows = posterior_rows(&vocab, &truth, &greedy);
            let post = PosteriorMatrix::from_probabilities(&utterance_id, &rows, Validation::default())?;
            let post_rel = PathBuf::from("posteriors").join(format!("{utterance_id}.ctcp"));
            post.write_ctcp(dir.join(&post_rel))?;

            let duration_s = ((truth.len() as f64 / words_per_s) * 100.0).round() / 100.0;
            let n_samples = (duration_s * config.sample_rate_hz as f64).round() as usize;
            let audio = gamma_speech_mixture(&mut rng, n_samples, snr_db);
            // headroom so 16-bit quantization never clips
            let peak = audio.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scaled: Vec<f64> = audio.iter().map(|v| v / peak * 0.9).collect();
            let audio_rel = PathBuf::from("audio").join(format!("{utterance_id}.wav"));
            write_wav(dir.join(&audio_rel), &scaled, config.sample_rate_hz)?;

            records.push(UtteranceRecord {
                utterance_id: utterance_id.clone(),
                speaker_id: speaker_id.clone(),
                timepoint_id: None,
                posterior_path: post_rel,
                audio_path: Some(audio_rel),
                ground_truth_text: Some(truth.join(" ")),
                rating: Some(SynthConfig::rating(p)),
                duration_s: Some(duration_s),
            });
            utterances.push(SynthUtterance {
                utterance_id,
                speaker_id: speaker_id.clone(),
                noise_rate: p,
                truth,
                greedy,
                corrupted,
                duration_s,
                snr_db,
            });
        }
    }

    let write = |name: &str, contents: &str| -> Result<PathBuf, SynthError> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io_err(&path))?;
        Ok(path)
    };
    let manifest = Manifest::new(records, dir)?;
    let manifest_path = write("manifest.jsonl", &manifest.to_jsonl())?;
    let mut vocab_text = vocab.symbols().join("\n");
    vocab_text.push('\n');
    let vocab_path = write("vocab.txt", &vocab_text)?;
    let lm_path = write("lm.arpa", &bigram_arpa(CORPUS, 0.5))?;
    let mock_replies_path = write(
        "mock_replies.json",
        &reply_json(&utterances, SynthUtterance::half_fixed),
    )?;
    let mock_full_replies_path = write("mock_replies_full.json", &reply_json(&utterances, |u| u.truth.clone()))?;

    Ok(SynthFixture {
        dir: dir.to_path_buf(),
        manifest_path,
        vocab_path,
        lm_path,
        mock_replies_path,
        mock_full_replies_path,
        utterances,
    })
}
