//! Confounder baselines: speech rate and blind WADA-SNR.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::io::{AudioBuffer, Transcript};
use crate::metrics::{Method, ScoreRecord};

const WADA_TABLE_ASSET: &str = include_str!("../assets/wada_snr_table.txt");

/// Floor applied to normalized magnitudes before taking logs.
const WADA_EPS: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BaselineError {
    #[error("utterance {0:?} has no ground-truth transcription")]
    MissingGroundTruth(String),
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("audio is silent")]
    SilentAudio,
    #[error("gain table: {0}")]
    BadTable(String),
    #[error("frame parameters: {0}")]
    BadFrame(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeechRateUnit {
    #[default]
    WordsPerMinute,
    WordsPerSecond,
}

impl SpeechRateUnit {
    fn per_second_factor(self) -> f64 {
        match self {
            Self::WordsPerMinute => 60.0,
            Self::WordsPerSecond => 1.0,
        }
    }
}

/// Piecewise-linear map from the WADA gain statistic to SNR in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    gains: Vec<f64>,
    snr_db: Vec<f64>,
}

impl GainTable {
    /// Two whitespace-separated columns (gain, dB); `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, BaselineError> {
        let mut gains = Vec::new();
        let mut snr_db = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let mut next = || -> Result<f64, BaselineError> {
                cols.next()
                    .and_then(|c| c.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| BaselineError::BadTable(format!("line {}: expected two numbers", i + 1)))
            };
            gains.push(next()?);
            snr_db.push(next()?);
        }
        Self::new(gains, snr_db)
    }

    pub fn new(gains: Vec<f64>, snr_db: Vec<f64>) -> Result<Self, BaselineError> {
        if gains.len() != snr_db.len() || gains.len() < 2 {
            return Err(BaselineError::BadTable("need at least two rows".into()));
        }
        if gains.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BaselineError::BadTable("gain column is not strictly increasing".into()));
        }
        if snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BaselineError::BadTable("SNR column is not strictly increasing".into()));
        }
        Ok(Self { gains, snr_db })
    }

    /// The bundled table, covering -20 dB to 100 dB in 1 dB steps.
    pub fn standard() -> &'static GainTable {
        static TABLE: OnceLock<GainTable> = OnceLock::new();
        TABLE.get_or_init(|| GainTable::parse(WADA_TABLE_ASSET).expect("bundled table is valid"))
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn snr_db(&self) -> &[f64] {
        &self.snr_db
    }

    pub fn min_db(&self) -> f64 {
        self.snr_db[0]
    }

    pub fn max_db(&self) -> f64 {
        self.snr_db[self.snr_db.len() - 1]
    }

    /// Linear interpolation, clamped to the table's end points.
    pub fn lookup(&self, gain: f64) -> f64 {
        let g = &self.gains;
        if gain.is_nan() || gain <= g[0] {
            return self.min_db();
        }
        if gain >= g[g.len() - 1] {
            return self.max_db();
        }
        let hi = g.partition_point(|&x| x <= gain);
        let lo = hi - 1;
        let frac = (gain - g[lo]) / (g[hi] - g[lo]);
        self.snr_db[lo] + frac * (self.snr_db[hi] - self.snr_db[lo])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum WadaMode {
    #[default]
    Utterance,
    /// Mean of per-frame estimates over non-silent frames.
    Framewise { window_s: f64, hop_s: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub speech_rate_unit: SpeechRateUnit,
    pub wada_mode: WadaMode,
}

pub fn speech_rate(
    utterance_id: &str,
    ground_truth: Option<&Transcript>,
    duration_s: f64,
    unit: SpeechRateUnit,
) -> Result<ScoreRecord, BaselineError> {
    let ground_truth = ground_truth.ok_or_else(|| BaselineError::MissingGroundTruth(utterance_id.to_string()))?;
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(BaselineError::NonPositiveDuration(duration_s));
    }
    Ok(ScoreRecord {
        utterance_id: utterance_id.to_string(),
        method: Method::SpeechRate,
        value: ground_truth.word_count() as f64 / duration_s * unit.per_second_factor(),
        hyp_source: None,
        ref_source: None,
    })
}

/// ln(mean |x|) - mean(ln |x|) over magnitudes normalized by their maximum.
pub fn wada_gain(samples: &[f64]) -> Result<f64, BaselineError> {
    let peak = samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()));
    if peak <= 0.0 {
        return Err(BaselineError::SilentAudio);
    }
    let n = samples.len() as f64;
    let (sum, sum_log) = samples.iter().fold((0.0, 0.0), |(a, l), &s| {
        let v = (s.abs() / peak).max(WADA_EPS);
        (a + v, l + v.ln())
    });
    Ok((sum / n).ln() - sum_log / n)
}

pub fn wada_snr_db(samples: &[f64], table: &GainTable) -> Result<f64, BaselineError> {
    Ok(table.lookup(wada_gain(samples)?))
}

pub fn wada_snr(utterance_id: &str, audio: &AudioBuffer, mode: WadaMode) -> Result<ScoreRecord, BaselineError> {
    wada_snr_with_table(utterance_id, audio, mode, GainTable::standard())
}

pub fn wada_snr_with_table(
    utterance_id: &str,
    audio: &AudioBuffer,
    mode: WadaMode,
    table: &GainTable,
) -> Result<ScoreRecord, BaselineError> {
    let value = match mode {
        WadaMode::Utterance => wada_snr_db(audio.samples(), table)?,
        WadaMode::Framewise { window_s, hop_s } => {
            framewise_snr(audio.samples(), audio.sample_rate_hz(), window_s, hop_s, table)?
        }
    };
    Ok(ScoreRecord {
        utterance_id: utterance_id.to_string(),
        method: Method::WadaSnr,
        value,
        hyp_source: None,
        ref_source: None,
    })
}

fn framewise_snr(
    samples: &[f64],
    rate: u32,
    window_s: f64,
    hop_s: f64,
    table: &GainTable,
) -> Result<f64, BaselineError> {
    let window = (window_s * rate as f64).round() as usize;
    let hop = (hop_s * rate as f64).round() as usize;
    if window < 2 || hop == 0 {
        return Err(BaselineError::BadFrame(format!(
            "window {window_s} s / hop {hop_s} s too short at {rate} Hz"
        )));
    }
    let mut total = 0.0;
    let mut frames = 0usize;
    let mut start = 0;
    loop {
        let end = (start + window).min(samples.len());
        match wada_snr_db(&samples[start..end], table) {
            Ok(db) => {
                total += db;
                frames += 1;
            }
            Err(BaselineError::SilentAudio) => {}
            Err(e) => return Err(e),
        }
        if end == samples.len() {
            break;
        }
        start += hop;
    }
    if frames == 0 {
        return Err(BaselineError::SilentAudio);
    }
    Ok(total / frames as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::TranscriptSource;

    #[test]
    fn bundled_table_spans_standard_range() {
        let t = GainTable::standard();
        assert_eq!(t.gains().len(), 121);
        assert_eq!(t.min_db(), -20.0);
        assert_eq!(t.max_db(), 100.0);
    }

    #[test]
    fn lookup_interpolates_and_clamps() {
        let t = GainTable::new(vec![0.4, 0.5, 0.7], vec![-20.0, 0.0, 20.0]).unwrap();
        assert_eq!(t.lookup(0.1), -20.0);
        assert_eq!(t.lookup(0.4), -20.0);
        assert!((t.lookup(0.45) + 10.0).abs() < 1e-12);
        assert!((t.lookup(0.6) - 10.0).abs() < 1e-12);
        assert_eq!(t.lookup(0.7), 20.0);
        assert_eq!(t.lookup(9.0), 20.0);
    }

    #[test]
    fn non_monotone_table_is_rejected() {
        assert!(GainTable::parse("0.4 -20\n0.39 -19\n").is_err());
        assert!(GainTable::parse("0.4 -20\n").is_err());
        assert!(GainTable::parse("0.4\n0.5 1\n").is_err());
    }

    #[test]
    fn speech_rate_units() {
        let gt = Transcript::new("a b c d e f g h i j k l", TranscriptSource::GroundTruth);
        let wpm = speech_rate("u", Some(&gt), 30.0, SpeechRateUnit::WordsPerMinute).unwrap();
        assert_eq!(wpm.value, 24.0);
        let wps = speech_rate("u", Some(&gt), 30.0, SpeechRateUnit::WordsPerSecond).unwrap();
        assert_eq!(wps.value, 0.4);
        let empty = Transcript::empty(TranscriptSource::GroundTruth);
        assert_eq!(
            speech_rate("u", Some(&empty), 3.0, SpeechRateUnit::default())
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            speech_rate("u", Some(&gt), 0.0, SpeechRateUnit::default()),
            Err(BaselineError::NonPositiveDuration(0.0))
        );
        assert_eq!(
            speech_rate("u", None, 1.0, SpeechRateUnit::default()),
            Err(BaselineError::MissingGroundTruth("u".into()))
        );
    }

    #[test]
    fn silent_audio_is_an_error() {
        let audio = AudioBuffer::new(vec![0.0; 100], 16000).unwrap();
        assert_eq!(
            wada_snr("u", &audio, WadaMode::Utterance),
            Err(BaselineError::SilentAudio)
        );
    }

    #[test]
    fn framewise_skips_silent_frames() {
        let mut samples = vec![0.0; 800];
        samples.extend((0..800).map(|i| ((i * 7919) % 200) as f64 / 100.0 - 1.0));
        let audio = AudioBuffer::new(samples, 8000).unwrap();
        let r = wada_snr(
            "u",
            &audio,
            WadaMode::Framewise {
                window_s: 0.05,
                hop_s: 0.05,
            },
        )
        .unwrap();
        assert!(r.value.is_finite());
        assert!(wada_snr(
            "u",
            &audio,
            WadaMode::Framewise {
                window_s: 0.0,
                hop_s: 0.01
            }
        )
        .is_err());
    }
}
