//! ARPA back-off n-gram language models.
//!
//! Probabilities are stored exactly as written in the file (log base 10) and
//! converted to natural log when queried, so every score that leaves this
//! module is in nats.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

pub const SENTENCE_START: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";
pub const UNKNOWN: &str = "<unk>";

/// Natural-log score returned for words the model cannot place.
pub const DEFAULT_OOV_LOGPROB: f64 = -23.025850929940457; // ln 1e-10

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ArpaError {
    #[error("cannot read language model: {0}")]
    Io(String),
    #[error("missing section {0}")]
    MissingSection(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("header declares {declared} {order}-grams, found {found}")]
    CountMismatch {
        order: usize,
        declared: usize,
        found: usize,
    },
    #[error("model ends before \\end\\")]
    TruncatedModel,
    #[error("cannot score an empty word sequence")]
    EmptySequence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    log10_prob: f64,
    log10_backoff: Option<f64>,
}

/// Back-off n-gram model of order N.
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    words: HashMap<String, u32>,
    word_list: Vec<String>,
    /// `tables[k]` holds the (k+1)-grams, in file order.
    tables: Vec<Vec<(Box<[u32]>, Entry)>>,
    index: Vec<HashMap<Box<[u32]>, usize>>,
    unk: Option<u32>,
    oov_logprob: f64,
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ngram_count(&self, order: usize) -> usize {
        self.tables.get(order.wrapping_sub(1)).map_or(0, Vec::len)
    }

    /// Unigram word list, in file order.
    pub fn vocabulary(&self) -> &[String] {
        &self.word_list
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains_key(word)
    }

    pub fn unk_token(&self) -> Option<&str> {
        self.unk.map(|id| self.word_list[id as usize].as_str())
    }

    pub fn oov_logprob(&self) -> f64 {
        self.oov_logprob
    }

    pub fn with_oov_logprob(mut self, logprob: f64) -> Self {
        self.oov_logprob = logprob;
        self
    }

    pub fn has_sentence_start(&self) -> bool {
        self.words.contains_key(SENTENCE_START)
    }

    pub fn has_sentence_end(&self) -> bool {
        self.words.contains_key(SENTENCE_END)
    }

    fn lookup(&self, ngram: &[u32]) -> Option<Entry> {
        let order = ngram.len();
        let table = self.index.get(order.checked_sub(1)?)?;
        table.get(ngram).map(|&i| self.tables[order - 1][i].1)
    }

    fn word_id(&self, word: &str) -> Option<u32> {
        match self.words.get(word) {
            Some(&id) => Some(id),
            None => {
                let folded = word.to_lowercase();
                self.words.get(&folded).copied()
            }
        }
    }

    /// log10 P(word | context) with standard back-off.
    fn log10_prob(&self, word: u32, context: &[u32]) -> f64 {
        let mut ngram: Vec<u32> = context.to_vec();
        ngram.push(word);
        let mut backoff = 0.0;
        let mut start = 0;
        loop {
            if let Some(entry) = self.lookup(&ngram[start..]) {
                return backoff + entry.log10_prob;
            }
            // the context ngram[start..len-1] was not followed by `word`
            if start + 1 >= ngram.len() {
                // unigram itself missing; only possible for ids that are not words
                return backoff;
            }
            if let Some(ctx) = self.lookup(&ngram[start..ngram.len() - 1]) {
                backoff += ctx.log10_backoff.unwrap_or(0.0);
            }
            start += 1;
        }
    }

    /// Natural-log P(word | history). The history is truncated to the last N−1 words.
    pub fn word_logprob<S: AsRef<str>>(&self, word: &str, history: &[S]) -> f64 {
        let id = match self.word_id(word).or(self.unk) {
            Some(id) => id,
            None => return self.oov_logprob,
        };
        let keep = self.order.saturating_sub(1).min(history.len());
        let context: Vec<u32> = history[history.len() - keep..]
            .iter()
            .map(|w| self.word_id(w.as_ref()).or(self.unk).unwrap_or(u32::MAX))
            .collect();
        // an unknown context word breaks every longer n-gram through it
        let cut = context.iter().rposition(|&c| c == u32::MAX).map_or(0, |p| p + 1);
        self.log10_prob(id, &context[cut..]) * std::f64::consts::LN_10
    }

    /// Context that opens a sentence: `<s>` when the model defines it.
    pub fn start_history(&self) -> Vec<String> {
        if self.has_sentence_start() {
            vec![SENTENCE_START.to_string()]
        } else {
            Vec::new()
        }
    }

    /// Natural-log P(</s> | history), or 0 when the model has no sentence end.
    pub fn end_logprob<S: AsRef<str>>(&self, history: &[S]) -> f64 {
        if self.has_sentence_end() {
            self.word_logprob(SENTENCE_END, history)
        } else {
            0.0
        }
    }

    /// Sum of conditional word log-probabilities, with sentence boundaries when defined.
    pub fn sequence_logprob<S: AsRef<str>>(&self, words: &[S]) -> Result<f64, ArpaError> {
        if words.is_empty() {
            return Err(ArpaError::EmptySequence);
        }
        let mut history = self.start_history();
        let mut total = 0.0;
        for w in words {
            total += self.word_logprob(w.as_ref(), &history);
            history.push(w.as_ref().to_string());
        }
        Ok(total + self.end_logprob(&history))
    }

    /// Serializes back to ARPA text; values print in shortest round-trip form.
    pub fn to_arpa(&self) -> String {
        let mut out = String::from("\\data\\\n");
        for (k, table) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, table.len());
        }
        for (k, table) in self.tables.iter().enumerate() {
            let _ = write!(out, "\n\\{}-grams:\n", k + 1);
            for (ngram, entry) in table {
                let words: Vec<&str> = ngram.iter().map(|&id| self.word_list[id as usize].as_str()).collect();
                let _ = write!(out, "{}\t{}", entry.log10_prob, words.join(" "));
                if let Some(b) = entry.log10_backoff {
                    let _ = write!(out, "\t{b}");
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> ArpaError {
    ArpaError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

pub fn parse_arpa(text: &str) -> Result<NGramModel, ArpaError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    // skip any preamble before \data\
    loop {
        match lines.next() {
            Some((_, "\\data\\")) => break,
            Some(_) => continue,
            None => return Err(ArpaError::MissingSection("\\data\\".into())),
        }
    }

    let mut declared: Vec<usize> = Vec::new();
    let mut pending = None;
    for (lineno, line) in lines.by_ref() {
        if let Some(rest) = line.strip_prefix("ngram ") {
            let (n, count) = rest
                .split_once('=')
                .ok_or_else(|| malformed(lineno, "expected 'ngram N=count'"))?;
            let n: usize = n.trim().parse().map_err(|_| malformed(lineno, "bad order"))?;
            let count: usize = count.trim().parse().map_err(|_| malformed(lineno, "bad count"))?;
            if n != declared.len() + 1 {
                return Err(malformed(lineno, "ngram orders must be listed 1..N"));
            }
            declared.push(count);
        } else {
            pending = Some((lineno, line));
            break;
        }
    }
    if declared.is_empty() {
        return Err(ArpaError::MissingSection("ngram counts".into()));
    }
    let order = declared.len();

    let mut model = NGramModel {
        order,
        words: HashMap::new(),
        word_list: Vec::new(),
        tables: vec![Vec::new(); order],
        index: vec![HashMap::new(); order],
        unk: None,
        oov_logprob: DEFAULT_OOV_LOGPROB,
    };

    let mut current: Option<usize> = None;
    let mut ended = false;
    let mut next = pending;
    while let Some((lineno, line)) = next.take().or_else(|| lines.next()) {
        if line == "\\end\\" {
            ended = true;
            break;
        }
        if line.starts_with('\\') {
            let n = line
                .strip_prefix('\\')
                .and_then(|l| l.strip_suffix("-grams:"))
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| malformed(lineno, format!("unknown section {line:?}")))?;
            if n == 0 || n > order {
                return Err(malformed(lineno, format!("section for undeclared order {n}")));
            }
            if let Some(prev) = current {
                if n <= prev {
                    return Err(malformed(lineno, "sections out of order"));
                }
            }
            current = Some(n);
            continue;
        }
        let n = current.ok_or_else(|| malformed(lineno, "entry outside an n-gram section"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != n + 1 && fields.len() != n + 2 {
            return Err(malformed(
                lineno,
                format!("expected {} or {} fields, found {}", n + 1, n + 2, fields.len()),
            ));
        }
        let log10_prob: f64 = fields[0].parse().map_err(|_| malformed(lineno, "bad probability"))?;
        let log10_backoff = match fields.get(n + 1) {
            Some(b) => {
                if n == order {
                    return Err(malformed(lineno, "back-off weight on highest-order n-gram"));
                }
                Some(b.parse::<f64>().map_err(|_| malformed(lineno, "bad back-off"))?)
            }
            None => None,
        };
        let mut ids = Vec::with_capacity(n);
        for &w in &fields[1..=n] {
            let id = match model.words.get(w) {
                Some(&id) => id,
                None if n == 1 => {
                    let id = model.word_list.len() as u32;
                    model.words.insert(w.to_string(), id);
                    model.word_list.push(w.to_string());
                    id
                }
                None => {
                    return Err(malformed(lineno, format!("word {w:?} has no unigram entry")));
                }
            };
            ids.push(id);
        }
        let key: Box<[u32]> = ids.into_boxed_slice();
        let table = &mut model.tables[n - 1];
        if model.index[n - 1].insert(key.clone(), table.len()).is_some() {
            return Err(malformed(lineno, "duplicate n-gram"));
        }
        table.push((
            key,
            Entry {
                log10_prob,
                log10_backoff,
            },
        ));
    }
    if !ended {
        return Err(ArpaError::TruncatedModel);
    }
    for (k, &count) in declared.iter().enumerate() {
        let found = model.tables[k].len();
        if found != count {
            return Err(ArpaError::CountMismatch {
                order: k + 1,
                declared: count,
                found,
            });
        }
    }
    model.unk = model.words.get(UNKNOWN).copied();
    Ok(model)
}

/// Reads an ARPA file, transparently gunzipping when it starts with the gzip magic.
pub fn load_arpa(path: impl AsRef<Path>) -> Result<NGramModel, ArpaError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| ArpaError::Io(format!("{}: {e}", path.display())))?;
    let text = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut text = String::new();
        flate2::read::MultiGzDecoder::new(&bytes[..])
            .read_to_string(&mut text)
            .map_err(|e| ArpaError::Io(format!("{}: {e}", path.display())))?;
        text
    } else {
        String::from_utf8(bytes).map_err(|_| ArpaError::Io(format!("{}: not UTF-8", path.display())))?
    };
    parse_arpa(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_10;

    const UNIGRAM: &str =
        "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.3010299956639812 a\n-0.3010299956639812 b\n\n\\end\\\n";

    const BIGRAM: &str = "\\data\\
ngram 1=3
ngram 2=2

\\1-grams:
-0.5 a -0.3
-0.6 b -0.2
-0.7 c

\\2-grams:
-0.1 a b
-0.4 b c

\\end\\
";

    #[test]
    fn unigram_read_back() {
        let m = parse_arpa(UNIGRAM).unwrap();
        let empty: [&str; 0] = [];
        assert!((m.word_logprob("a", &empty) - 0.5f64.ln()).abs() < 1e-12);
        assert!((m.sequence_logprob(&["b"]).unwrap() - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn explicit_and_backed_off_bigrams() {
        let m = parse_arpa(BIGRAM).unwrap();
        assert_eq!(m.order(), 2);
        assert!((m.word_logprob("b", &["a"]) - (-0.1 * LN_10)).abs() < 1e-12);
        let expected = (-0.3 + -0.7) * LN_10;
        assert!((m.word_logprob("c", &["a"]) - expected).abs() < 1e-12);
        // context without a back-off weight contributes nothing
        assert!((m.word_logprob("a", &["c"]) - (-0.5 * LN_10)).abs() < 1e-12);
    }

    #[test]
    fn history_is_truncated_and_case_folded() {
        let m = parse_arpa(BIGRAM).unwrap();
        let long = ["c", "c", "A"];
        assert_eq!(m.word_logprob("B", &long), m.word_logprob("b", &["a"]));
    }

    #[test]
    fn oov_policy() {
        let m = parse_arpa(BIGRAM).unwrap();
        let empty: [&str; 0] = [];
        assert_eq!(m.word_logprob("zzz", &empty), DEFAULT_OOV_LOGPROB);
        assert!((DEFAULT_OOV_LOGPROB - 1e-10f64.ln()).abs() < 1e-12);
        assert_eq!(m.sequence_logprob(&["zzz"]).unwrap(), DEFAULT_OOV_LOGPROB);
        let m = m.with_oov_logprob(-5.0);
        assert_eq!(m.word_logprob("zzz", &["a"]), -5.0);

        let with_unk = "\\data\\\nngram 1=2\n\n\\1-grams:\n-1 <unk>\n-0.1 a\n\n\\end\\\n";
        let m = parse_arpa(with_unk).unwrap();
        assert_eq!(m.unk_token(), Some("<unk>"));
        assert!((m.word_logprob("zzz", &empty) - (-LN_10)).abs() < 1e-12);
    }

    #[test]
    fn sequence_sums_conditionals() {
        let m = parse_arpa(BIGRAM).unwrap();
        let total = m.sequence_logprob(&["a", "b"]).unwrap();
        let empty: [&str; 0] = [];
        let expected = m.word_logprob("a", &empty) + m.word_logprob("b", &["a"]);
        assert_eq!(total, expected);
        assert!((total - (-0.6 * LN_10)).abs() < 1e-12);
        assert_eq!(m.sequence_logprob::<&str>(&[]), Err(ArpaError::EmptySequence));
    }

    #[test]
    fn sentence_boundaries_are_used_when_present() {
        let text = "\\data\\\nngram 1=3\nngram 2=2\n\n\\1-grams:\n-99 <s> -0.5\n-0.4 a -0.2\n-0.3 </s>\n\n\\2-grams:\n-0.05 <s> a\n-0.1 a </s>\n\n\\end\\\n";
        let m = parse_arpa(text).unwrap();
        let total = m.sequence_logprob(&["a"]).unwrap();
        assert!((total - (-0.15 * LN_10)).abs() < 1e-12);
    }

    #[test]
    fn count_mismatch() {
        let text = BIGRAM.replace("ngram 1=3", "ngram 1=2");
        assert_eq!(
            parse_arpa(&text).unwrap_err(),
            ArpaError::CountMismatch {
                order: 1,
                declared: 2,
                found: 3
            }
        );
    }

    #[test]
    fn truncated_and_malformed() {
        let text = BIGRAM.replace("\\end\\\n", "");
        assert_eq!(parse_arpa(&text).unwrap_err(), ArpaError::TruncatedModel);
        let text = BIGRAM.replace("-0.4 b c", "-0.4 b");
        assert!(matches!(
            parse_arpa(&text).unwrap_err(),
            ArpaError::MalformedLine { line: 12, .. }
        ));
        let text = BIGRAM.replace("-0.4 b c", "-0.4 b c -0.1");
        assert!(matches!(
            parse_arpa(&text).unwrap_err(),
            ArpaError::MalformedLine { .. }
        ));
        assert!(matches!(
            parse_arpa("no header").unwrap_err(),
            ArpaError::MissingSection(_)
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let m = parse_arpa(BIGRAM).unwrap();
        let again = parse_arpa(&m.to_arpa()).unwrap();
        for w in ["a", "b", "c", "x"] {
            for h in ["a", "b", "c", "x"] {
                assert_eq!(m.word_logprob(w, &[h]), again.word_logprob(w, &[h]));
            }
        }
    }

    #[test]
    fn gzip_is_detected() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lm.arpa.gz");
        let mut enc =
            flate2::write::GzEncoder::new(std::fs::File::create(&path).unwrap(), flate2::Compression::default());
        enc.write_all(BIGRAM.as_bytes()).unwrap();
        enc.finish().unwrap();
        let m = load_arpa(&path).unwrap();
        assert_eq!(m.ngram_count(2), 2);
    }
}
