//! Small hand-built inputs shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::LN_10;

/// Unigrams a, b, c (a and b with back-off weights) and bigrams a→b, b→c, c→a.
pub const BIGRAM_ARPA: &str = "\\data\\
ngram 1=3
ngram 2=3

\\1-grams:
-0.5\ta\t-0.3
-0.6\tb\t-0.2
-0.7\tc

\\2-grams:
-0.1\ta b
-0.4\tb c
-0.2\tc a

\\end\\
";

/// (history, word, natural-log probability) for every query against [`BIGRAM_ARPA`],
/// worked out by hand from the back-off rule.
pub fn bigram_hand_values() -> Vec<(Vec<&'static str>, &'static str, f64)> {
    let oov = 1e-10f64.ln();
    vec![
        (vec![], "a", -0.5 * LN_10),
        (vec![], "b", -0.6 * LN_10),
        (vec![], "c", -0.7 * LN_10),
        (vec!["a"], "a", (-0.3 + -0.5) * LN_10),
        (vec!["a"], "b", -0.1 * LN_10),
        (vec!["a"], "c", (-0.3 + -0.7) * LN_10),
        (vec!["b"], "a", (-0.2 + -0.5) * LN_10),
        (vec!["b"], "b", (-0.2 + -0.6) * LN_10),
        (vec!["b"], "c", -0.4 * LN_10),
        (vec!["c"], "a", -0.2 * LN_10),
        (vec!["c"], "b", -0.6 * LN_10),
        (vec!["c"], "c", -0.7 * LN_10),
        // only the last word of a longer history matters in a bigram model
        (vec!["b", "c"], "a", -0.2 * LN_10),
        (vec!["c", "a"], "b", -0.1 * LN_10),
        // an unknown history word leaves only the unigram
        (vec!["zzz"], "b", -0.6 * LN_10),
        (vec![], "zzz", oov),
        (vec!["a"], "zzz", oov),
    ]
}

pub const FLIP_SYMBOLS: [&str; 9] = ["<blank>", "|", "b", "d", "e", "k", "l", "o", "u"];

/// "oude" then "beul"/"beuk": the LM strongly prefers "beuk" after "oude".
pub const FLIP_ARPA: &str = "\\data\\
ngram 1=3
ngram 2=2

\\1-grams:
-1\toude\t-0.1
-1.5\tbeul
-1.5\tbeuk

\\2-grams:
-1.3010299956639813\toude beul
-0.045757490560675115\toude beuk

\\end\\
";

pub const FLIP_P_L: f64 = 0.6;
pub const FLIP_P_K: f64 = 0.4;
const FLIP_EPS: f64 = 1e-9;

/// Log-posteriors spelling "oude|beu" with near certainty, then one frame split
/// between "l" and "k". Only the last frame separates the two hypotheses.
pub fn flip_log_rows() -> Vec<Vec<f64>> {
    let idx = |s: &str| FLIP_SYMBOLS.iter().position(|x| *x == s).unwrap();
    let n = FLIP_SYMBOLS.len();
    let mut rows: Vec<Vec<f64>> = "oude|beu"
        .chars()
        .map(|c| {
            let k = idx(&c.to_string());
            (0..n)
                .map(|i| {
                    if i == k {
                        1.0 - FLIP_EPS * (n - 1) as f64
                    } else {
                        FLIP_EPS
                    }
                })
                .map(f64::ln)
                .collect()
        })
        .collect();
    let last: Vec<f64> = (0..n)
        .map(|i| match FLIP_SYMBOLS[i] {
            "l" => FLIP_P_L - FLIP_EPS * (n - 2) as f64,
            "k" => FLIP_P_K,
            _ => FLIP_EPS,
        })
        .map(f64::ln)
        .collect();
    rows.push(last);
    rows
}
