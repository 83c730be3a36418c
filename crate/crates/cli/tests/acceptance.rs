//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Oracles are test-side reimplementations shared with the core crate's tests.

#[path = "../../core/tests/support/fixtures.rs"]
mod fixtures;
#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use asr_inconsistency::baselines::{wada_snr_db, GainTable};
use asr_inconsistency::ctc::{
    beam_search, beam_search_decode, collapse, collapse_labels, greedy_decode, DecoderConfig, NoLanguageModel, RawPath,
};
use asr_inconsistency::harness::stats::{mean_ci, pearson, two_sample_t};
use asr_inconsistency::io::{PosteriorMatrix, Transcript, TranscriptSource, Validation, Vocabulary};
use asr_inconsistency::metrics::{align_words, inconsistency_score, Method};
use asr_inconsistency::ngram::parse_arpa;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_asr-inconsistency");

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, start: Instant) -> Result<f64, String> {
    let secs = start.elapsed().as_secs_f64();
    ensure!(start.elapsed() < limit, "took {secs:.2} s, limit {} s", limit.as_secs());
    Ok(secs)
}

fn small_vocab(size: usize) -> Vocabulary {
    let all = ["<blank>", "|", "a", "b"];
    Vocabulary::from_symbols(all[..size].iter().copied()).unwrap()
}

/// Compares the beam's best hypothesis with the alignment-sum oracle for one instance.
fn beam_vs_oracle(rows: &[Vec<f64>], size: usize) -> Result<(), String> {
    let vocab = small_vocab(size);
    let post = PosteriorMatrix::from_rows("x", rows, Validation::default()).map_err(|e| e.to_string())?;
    let cfg = DecoderConfig {
        alpha: 0.0,
        beta: 0.0,
        beam_width: 256,
        prune_logp_floor: f64::NEG_INFINITY,
    };
    let masses = oracles::alignment_sum(rows, vocab.blank_index());
    let mut ranked: Vec<(&Vec<usize>, f64)> = masses.iter().map(|(k, v)| (k, *v)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (oracle_prefix, oracle_mass) = ranked[0];
    let finals = beam_search(&post, &vocab, &NoLanguageModel, &cfg).map_err(|e| e.to_string())?;
    let best = &finals[0];
    ensure!(
        (best.acoustic_logp() - oracle_mass).abs() <= 1e-9,
        "score {} vs oracle {} on {rows:?}",
        best.acoustic_logp(),
        oracle_mass
    );
    let unique = ranked.len() < 2 || oracle_mass - ranked[1].1 > 1e-9;
    if unique {
        ensure!(
            &best.prefix == oracle_prefix,
            "prefix {:?} vs oracle {:?}",
            best.prefix,
            oracle_prefix
        );
        let text = beam_search_decode(&post, &vocab, &NoLanguageModel, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            text.raw_text() == vocab.render(oracle_prefix),
            "string mismatch on {rows:?}"
        );
    } else {
        ensure!(
            (masses[&best.prefix] - oracle_mass).abs() <= 1e-9,
            "tie broken towards a lighter prefix"
        );
    }
    Ok(())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let frames = rng.gen_range(1..=4);
        let size = rng.gen_range(2..=4);
        let spread = *[0.3, 1.0, 2.0, 4.0].choose(&mut rng).unwrap();
        beam_vs_oracle(&oracles::random_log_rows(&mut rng, frames, size, spread), size)?;
    }
    let ln = |p: f64| p.ln();
    let peaked = |n: usize, k: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if i == k {
                    ln(1.0 - 1e-6 * (n - 1) as f64)
                } else {
                    ln(1e-6)
                }
            })
            .collect()
    };
    let uniform = |n: usize| vec![ln(1.0 / n as f64); n];
    let corners: Vec<(usize, Vec<Vec<f64>>)> = vec![
        (4, vec![uniform(4); 4]),
        (3, vec![uniform(3); 3]),
        (2, vec![uniform(2); 4]),
        (4, vec![uniform(4)]),
        (4, vec![peaked(4, 0); 4]),
        (4, vec![peaked(4, 2); 4]),
        (4, vec![peaked(4, 2), peaked(4, 0), peaked(4, 2), peaked(4, 0)]),
        (4, vec![peaked(4, 1), peaked(4, 2), peaked(4, 1), peaked(4, 3)]),
        (4, vec![vec![ln(0.5), ln(0.5 - 2e-6), ln(1e-6), ln(1e-6)]; 4]),
        (4, vec![vec![ln(0.45), ln(0.05), ln(0.45), ln(0.05)]; 3]),
    ];
    let n_corners = corners.len();
    for (size, rows) in corners {
        beam_vs_oracle(&rows, size)?;
    }
    let secs = within(Duration::from_secs(30), start)?;
    Ok(format!("500 random + {n_corners} corner instances, {secs:.2} s"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..1000 {
        let frames = rng.gen_range(1..=60);
        let symbols = rng.gen_range(2..=12);
        let (rows, validation) = if i % 4 == 0 {
            // few distinct values so ties occur; lowest index must win
            let rows: Vec<Vec<f64>> = (0..frames)
                .map(|_| (0..symbols).map(|_| -(rng.gen_range(0..3) as f64)).collect())
                .collect();
            (rows, Validation::disabled())
        } else {
            (
                oracles::random_log_rows(&mut rng, frames, symbols, 2.0),
                Validation::default(),
            )
        };
        let post = PosteriorMatrix::from_rows("x", &rows, validation).map_err(|e| e.to_string())?;
        let expected: Vec<usize> = rows.iter().map(|r| oracles::argmax(r)).collect();
        ensure!(greedy_decode(&post).labels == expected, "argmax mismatch on matrix {i}");
    }
    let vocab = Vocabulary::from_symbols(["<blank>", "|", "a"]).unwrap();
    let mut paths = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..6 {
        frontier = frontier
            .iter()
            .flat_map(|p| (0..3).map(move |s| [p.as_slice(), &[s]].concat()))
            .collect();
        paths.extend(frontier.iter().cloned());
    }
    for p in &paths {
        let expected = oracles::collapse(p, 0);
        ensure!(collapse_labels(p, 0) == expected, "collapse mismatch on {p:?}");
        let text = collapse(&RawPath { labels: p.clone() }, &vocab);
        ensure!(
            text.raw_text() == vocab.render(&expected),
            "rendered collapse mismatch on {p:?}"
        );
    }
    let secs = within(Duration::from_secs(10), start)?;
    Ok(format!("1000 matrices, {} paths, {secs:.2} s", paths.len()))
}

fn criterion_3() -> Outcome {
    let vocab = Vocabulary::from_symbols(fixtures::FLIP_SYMBOLS).unwrap();
    let lm = parse_arpa(fixtures::FLIP_ARPA).map_err(|e| e.to_string())?;
    let rows = fixtures::flip_log_rows();
    let post = PosteriorMatrix::from_rows("flip", &rows, Validation::default()).map_err(|e| e.to_string())?;
    let last = rows.last().unwrap();
    let ac_l = last[vocab.index_of("l").unwrap()];
    let ac_k = last[vocab.index_of("k").unwrap()];
    let lm_l = lm.sequence_logprob(&["oude", "beul"]).map_err(|e| e.to_string())?;
    let lm_k = lm.sequence_logprob(&["oude", "beuk"]).map_err(|e| e.to_string())?;
    let threshold = (ac_l - ac_k) / (lm_k - lm_l);
    let mut outputs = Vec::new();
    for k in 0..=200 {
        let alpha = k as f64 * 0.01;
        let cfg = DecoderConfig {
            alpha,
            ..DecoderConfig::default()
        };
        let out = beam_search_decode(&post, &vocab, &lm, &cfg).map_err(|e| e.to_string())?;
        outputs.push((alpha, out.raw_text().to_string()));
    }
    for (alpha, text) in &outputs {
        let expected = if *alpha < threshold { "oude beul" } else { "oude beuk" };
        // the grid point nearest the threshold may fall either way
        if (alpha - threshold).abs() > 0.01 {
            ensure!(text == expected, "alpha {alpha}: {text:?}, expected {expected:?}");
        }
    }
    let flip = outputs
        .iter()
        .find(|(_, t)| t == "oude beuk")
        .map(|(a, _)| *a)
        .ok_or("output never flips")?;
    ensure!(
        (flip - threshold).abs() <= 0.01,
        "flip at {flip}, threshold {threshold}"
    );
    Ok(format!("threshold {threshold:.4}, flip at {flip:.2}"))
}

fn criterion_4() -> Outcome {
    let lm = parse_arpa(fixtures::BIGRAM_ARPA).map_err(|e| e.to_string())?;
    let hand = fixtures::bigram_hand_values();
    for (history, word, expected) in &hand {
        let got = lm.word_logprob(word, history);
        ensure!(
            (got - expected).abs() <= 1e-12,
            "P({word} | {history:?}) = {got}, expected {expected}"
        );
    }
    let reparsed = parse_arpa(&lm.to_arpa()).map_err(|e| e.to_string())?;
    let words = ["a", "b", "c", "unseen"];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let history: Vec<&str> = (0..rng.gen_range(0..3))
            .map(|_| *words.choose(&mut rng).unwrap())
            .collect();
        let word = *words.choose(&mut rng).unwrap();
        let (a, b) = (lm.word_logprob(word, &history), reparsed.word_logprob(word, &history));
        ensure!(
            a.to_bits() == b.to_bits(),
            "round trip changed P({word} | {history:?}): {a} vs {b}"
        );
    }
    Ok(format!("{} hand values, 100 probe queries", hand.len()))
}

fn criterion_5() -> Outcome {
    let alphabet = ["de", "oude", "beuk"];
    let mut lists: Vec<Vec<&str>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<&str>> = vec![Vec::new()];
    for _ in 0..6 {
        frontier = frontier
            .iter()
            .flat_map(|l| alphabet.iter().map(move |w| [l.as_slice(), &[*w]].concat()))
            .collect();
        lists.extend(frontier.iter().cloned());
    }
    let mut pairs = 0usize;
    for a in &lists {
        for b in &lists {
            let cost = align_words(a, b).cost();
            ensure!(cost == oracles::edit_distance(a, b), "{a:?} vs {b:?}");
            pairs += 1;
        }
    }
    let words = ["de", "kat", "zit", "op", "mat", "beul", "beuk"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let mut draw = || -> Vec<&str> {
            let n = rng.gen_range(7..=30);
            (0..n).map(|_| *words.choose(&mut rng).unwrap()).collect()
        };
        let (a, b) = (draw(), draw());
        ensure!(
            align_words(&a, &b).cost() == oracles::edit_distance(&a, &b),
            "{a:?} vs {b:?}"
        );
    }
    let greedy = Transcript::new("de tortelduif zonk klagelijk in de oude beul", TranscriptSource::Greedy);
    let llm = Transcript::new(
        "de tortelduif zonk klagelijk in de oude beuk",
        TranscriptSource::LlmReference,
    );
    let score = inconsistency_score("pair", Method::Ngram, &greedy, &llm).value;
    ensure!(score == 0.125, "plosive pair scored {score}");
    Ok(format!("{pairs} exhaustive + 1000 random pairs, plosive pair 0.125"))
}

fn criterion_6() -> Outcome {
    let table = GainTable::standard();
    let snrs = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
    let trials = 10;
    let mut means = Vec::new();
    let mut per_trial = vec![Vec::new(); trials];
    let mut worst = 0.0f64;
    for &snr in &snrs {
        let mut sum = 0.0;
        for (trial, row) in per_trial.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(600 + trial as u64);
            let x = oracles::gamma_plus_noise(&mut rng, 50_000, 0.4, snr);
            let est = wada_snr_db(&x, table).map_err(|e| e.to_string())?;
            if snr >= 0.0 {
                ensure!((est - snr).abs() <= 3.0, "true {snr} dB estimated as {est:.2} dB");
                worst = worst.max((est - snr).abs());
            }
            row.push(est);
            sum += est;
        }
        means.push(sum / trials as f64);
    }
    ensure!(
        means.windows(2).all(|w| w[0] <= w[1]),
        "mean estimates not monotone: {means:?}"
    );
    for row in &per_trial {
        ensure!(
            row.windows(2).all(|w| w[0] <= w[1]),
            "trial estimates not monotone: {row:?}"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let x = oracles::gamma_plus_noise(&mut rng, 20_000, 0.4, 7.0);
    let base = wada_snr_db(&x, table).map_err(|e| e.to_string())?;
    for scale in [1e-3, 0.37, 5.0, 1e3] {
        let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let est = wada_snr_db(&scaled, table).map_err(|e| e.to_string())?;
        ensure!(
            (est - base).abs() < 0.01,
            "scale {scale} moved the estimate by {}",
            est - base
        );
    }
    Ok(format!(
        "means {:?} dB, worst error on [0, 20] dB {worst:.2} dB",
        means.iter().map(|m| (m * 100.0).round() / 100.0).collect::<Vec<_>>()
    ))
}

fn criterion_9() -> Outcome {
    let t = (0.95f64 * 0.95 * 2.0 / (1.0 - 0.95 * 0.95)).sqrt();
    let ci = mean_ci(&[2.0, 4.0, 9.0], 0.95).map_err(|e| e.to_string())?;
    let sd = ((1.0f64 + 9.0 + 16.0) / 2.0).sqrt();
    ensure!((ci.mean - 5.0).abs() < 1e-12, "mean {}", ci.mean);
    ensure!(
        (ci.halfwidth - t * sd / 3f64.sqrt()).abs() < 1e-6,
        "halfwidth {}",
        ci.halfwidth
    );
    ensure!((t - 4.3027).abs() < 5e-5, "quantile {t}");

    let (a, b) = ([0.31, 0.42, 0.28, 0.39, 0.35], [0.22, 0.18, 0.30, 0.25]);
    let w = two_sample_t(&a, &b).map_err(|e| e.to_string())?;
    let p = oracles::student_t_two_sided(w.t_stat, w.df);
    ensure!((w.p_value - p).abs() < 1e-6, "p {} vs oracle {p}", w.p_value);

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.gen_range(3..40);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let r = pearson(&x, &y).map_err(|e| e.to_string())?;
        ensure!((r - oracles::pearson(&x, &y)).abs() <= 1e-12, "pearson {r}");
    }
    let x = [1.0, 2.0, 3.0, 4.0];
    let up = pearson(&x, &[3.0, 5.0, 7.0, 9.0]).map_err(|e| e.to_string())?;
    let down = pearson(&x, &[1.0, 0.5, 0.0, -0.5]).map_err(|e| e.to_string())?;
    ensure!(
        (up - 1.0).abs() <= 1e-12 && (down + 1.0).abs() <= 1e-12,
        "perfect lines gave {up}, {down}"
    );
    Ok(format!("t = {t:.4}, Welch p = {:.6}", w.p_value))
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "{args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Speaker-level (score, rating) points for one method from a report.csv.
fn report_points(run_dir: &Path, method: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut reader = csv::Reader::from_path(run_dir.join("report.csv")).map_err(|e| e.to_string())?;
    let mut points = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        if &row[1] == method {
            let score: f64 = row[6].parse().map_err(|_| "bad score")?;
            let rating: f64 = row[7].parse().map_err(|_| "bad rating")?;
            points.push((score, rating));
        }
    }
    Ok(points)
}

fn criterion_7(fixture: &Path, work: &Path) -> Outcome {
    let start = Instant::now();
    let gen_dir = work.join("c7-synth");
    cli(&["synth", "--output-dir", p(&gen_dir)])?;
    let run_dir = work.join("c7-run");
    cli(&[
        "eval",
        "--manifest",
        p(&gen_dir.join("manifest.jsonl")),
        "--vocab",
        p(&gen_dir.join("vocab.txt")),
        "--lm",
        p(&gen_dir.join("lm.arpa")),
        "--methods",
        "ngram",
        "--output-dir",
        p(&run_dir),
    ])?;
    let secs = within(Duration::from_secs(60), start)?;
    ensure!(
        fs::read(gen_dir.join("manifest.jsonl")).ok() == fs::read(fixture.join("manifest.jsonl")).ok(),
        "generator output is not reproducible"
    );
    let points = report_points(&run_dir, "ngram")?;
    ensure!(points.len() == 12, "expected 12 speakers, found {}", points.len());
    let (x, y): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    let r = oracles::pearson(&x, &y);
    ensure!(r <= -0.9, "r = {r:.4}");
    Ok(format!("r = {r:.4} over 12 speakers, {secs:.2} s"))
}

#[derive(serde::Deserialize)]
struct TranscriptLine {
    utterance_id: String,
    source: String,
    text: String,
}

#[derive(serde::Deserialize)]
struct ManifestLine {
    utterance_id: String,
    speaker_id: String,
    rating: f64,
}

fn jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, String> {
    fs::read_to_string(path)
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect()
}

fn criterion_8(fixture: &Path, work: &Path) -> Outcome {
    let run_dir = work.join("c8-run");
    cli(&[
        "eval",
        "--manifest",
        p(&fixture.join("manifest.jsonl")),
        "--vocab",
        p(&fixture.join("vocab.txt")),
        "--methods",
        "llm",
        "--mock",
        "--mock-replies",
        p(&fixture.join("mock_replies.json")),
        "--llm-model",
        "mock",
        "--runs",
        "1",
        "--output-dir",
        p(&run_dir),
    ])?;
    let manifest: Vec<ManifestLine> = jsonl(&fixture.join("manifest.jsonl"))?;
    let transcripts: Vec<TranscriptLine> = jsonl(&run_dir.join("transcripts.jsonl"))?;
    let text = |id: &str, source: &str| -> Result<Vec<String>, String> {
        transcripts
            .iter()
            .find(|t| t.utterance_id == id && t.source == source)
            .map(|t| t.text.split_whitespace().map(str::to_string).collect())
            .ok_or_else(|| format!("no {source} transcript for {id}"))
    };
    let (mut greedy_edits, mut llm_edits, mut truth_words) = (0usize, 0usize, 0usize);
    let mut per_speaker: BTreeMap<&str, (f64, usize, f64)> = BTreeMap::new();
    for rec in &manifest {
        let truth = text(&rec.utterance_id, "ground_truth")?;
        let greedy = text(&rec.utterance_id, "greedy")?;
        let llm = text(&rec.utterance_id, "llm_reference")?;
        greedy_edits += oracles::edit_distance(&greedy, &truth);
        let edits = oracles::edit_distance(&llm, &truth);
        llm_edits += edits;
        truth_words += truth.len();
        let entry = per_speaker.entry(&rec.speaker_id).or_insert((0.0, 0, rec.rating));
        entry.0 += edits as f64 / truth.len() as f64;
        entry.1 += 1;
    }
    let greedy_wer = greedy_edits as f64 / truth_words as f64;
    let llm_wer = llm_edits as f64 / truth_words as f64;
    ensure!(
        llm_wer < greedy_wer,
        "W_LLM WER {llm_wer:.4} not below W_greedy WER {greedy_wer:.4}"
    );
    let (x, y): (Vec<f64>, Vec<f64>) = per_speaker.values().map(|(s, n, r)| (s / *n as f64, *r)).unzip();
    let r = oracles::pearson(&x, &y);
    ensure!(r < 0.0, "r_W_LLM = {r:.4}");
    Ok(format!(
        "W_greedy WER {greedy_wer:.4}, W_LLM WER {llm_wer:.4}, r_W_LLM {r:.4}"
    ))
}

fn criterion_10(fixture: &Path, work: &Path) -> Outcome {
    let mut reports = Vec::new();
    for jobs in ["1", "4"] {
        let run_dir = work.join(format!("c10-jobs{jobs}"));
        cli(&[
            "eval",
            "--manifest",
            p(&fixture.join("manifest.jsonl")),
            "--vocab",
            p(&fixture.join("vocab.txt")),
            "--lm",
            p(&fixture.join("lm.arpa")),
            "--mock",
            "--mock-replies",
            p(&fixture.join("mock_replies.json")),
            "--llm-model",
            "mock",
            "--jobs",
            jobs,
            "--output-dir",
            p(&run_dir),
        ])?;
        reports.push(fs::read(run_dir.join("report.csv")).map_err(|e| e.to_string())?);
    }
    ensure!(
        reports[0] == reports[1],
        "report.csv differs between --jobs 1 and --jobs 4"
    );
    Ok(format!("report.csv identical ({} bytes)", reports[0].len()))
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temp dir");
    let fixture: PathBuf = work.path().join("fixture");
    if let Err(e) = cli(&["synth", "--output-dir", p(&fixture)]) {
        println!("FAIL setup: {e}");
        return ExitCode::FAILURE;
    }
    let w = work.path();
    let criteria: Vec<(&str, Check)> = vec![
        ("CTC beam search equals the alignment-sum oracle", Box::new(criterion_1)),
        ("greedy argmax and collapse equal their oracles", Box::new(criterion_2)),
        ("shallow fusion flips at the analytic threshold", Box::new(criterion_3)),
        ("ARPA back-off values and round trip", Box::new(criterion_4)),
        ("WER alignment equals the DP oracle", Box::new(criterion_5)),
        ("WADA-SNR monotone, accurate and scale invariant", Box::new(criterion_6)),
        (
            "synthetic n-gram correlation r <= -0.9",
            Box::new(|| criterion_7(&fixture, w)),
        ),
        (
            "half-fixing corrector lowers WER, r stays negative",
            Box::new(|| criterion_8(&fixture, w)),
        ),
        ("statistics match closed forms and oracles", Box::new(criterion_9)),
        (
            "eval output independent of --jobs",
            Box::new(|| criterion_10(&fixture, w)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
