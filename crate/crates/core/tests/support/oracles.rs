//! Independent reference implementations used by the integration and acceptance tests.
//! Nothing here calls into the library under test.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// First index of the maximum, found by a plain linear scan.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    let mut i = 1;
    while i < row.len() {
        if row[i] > row[best] {
            best = i;
        }
        i += 1;
    }
    best
}

/// Merge runs first, then remove blanks, as two separate passes.
pub fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut merged: Vec<usize> = Vec::new();
    for &s in path {
        if merged.last() != Some(&s) {
            merged.push(s);
        }
    }
    merged.into_iter().filter(|&s| s != blank).collect()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Log-mass of every collapsed label sequence, summed over all V^T alignment paths.
pub fn alignment_sum(log_rows: &[Vec<f64>], blank: usize) -> BTreeMap<Vec<usize>, f64> {
    let t = log_rows.len();
    let v = log_rows[0].len();
    let mut per_prefix: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    let total = v.pow(t as u32);
    for code in 0..total {
        let mut path = Vec::with_capacity(t);
        let mut c = code;
        for _ in 0..t {
            path.push(c % v);
            c /= v;
        }
        let logp: f64 = path.iter().enumerate().map(|(f, &s)| log_rows[f][s]).sum();
        per_prefix.entry(collapse(&path, blank)).or_default().push(logp);
    }
    per_prefix
        .into_iter()
        .map(|(k, vals)| (k, log_sum_exp(&vals)))
        .collect()
}

/// Minimal word edit count via the textbook recurrence.
pub fn edit_distance<A: PartialEq>(a: &[A], b: &[A]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Pearson r from raw sums.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Two-sided Student-t tail probability P(|T| ≥ |t|) for ν > 1.
///
/// Substituting x = √ν·tanθ turns the density into cos^(ν−1)θ on (−π/2, π/2),
/// so the tail is a ratio of two smooth finite integrals and needs no gamma function.
pub fn student_t_two_sided(t: f64, nu: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let f = |theta: f64| theta.cos().max(0.0).powf(nu - 1.0);
    let theta_t = (t.abs() / nu.sqrt()).atan();
    let tail = simpson(f, theta_t, half_pi, 200_000);
    let whole = simpson(f, 0.0, half_pi, 200_000);
    tail / whole
}

/// Softmax of Gaussian logits, returned as natural-log probabilities.
pub fn random_log_rows<R: Rng>(rng: &mut R, frames: usize, symbols: usize, spread: f64) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, spread).expect("positive spread");
    (0..frames)
        .map(|_| {
            let logits: Vec<f64> = (0..symbols).map(|_| normal.sample(rng)).collect();
            let z = log_sum_exp(&logits);
            logits.iter().map(|l| l - z).collect()
        })
        .collect()
}

/// Gamma-distributed speech amplitudes with random sign plus white Gaussian noise.
/// The noise variance is set from the empirical speech power, so the true SNR is exact.
pub fn gamma_plus_noise<R: Rng>(rng: &mut R, n: usize, shape: f64, snr_db: f64) -> Vec<f64> {
    let gamma = rand_distr::Gamma::new(shape, 1.0).expect("valid gamma");
    let speech: Vec<f64> = (0..n)
        .map(|_| {
            let a: f64 = gamma.sample(rng);
            if rng.gen::<bool>() {
                a
            } else {
                -a
            }
        })
        .collect();
    let power = speech.iter().map(|s| s * s).sum::<f64>() / n as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    speech.into_iter().map(|s| s + noise.sample(rng)).collect()
}
