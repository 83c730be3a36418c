use std::io::Write;
use std::path::Path;

use super::{LoadError, Vocabulary};

pub const CTCP_MAGIC: &[u8; 4] = b"CTCP";
pub const CTCP_VERSION: u32 = 1;

/// Checks applied when a posterior matrix is constructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    /// Require entries ≤ 0 and rows that exponentiate to a distribution.
    pub check_normalization: bool,
    pub row_sum_tolerance: f64,
}

impl Default for Validation {
    fn default() -> Self {
        Self {
            check_normalization: true,
            row_sum_tolerance: 1e-3,
        }
    }
}

impl Validation {
    pub fn disabled() -> Self {
        Self {
            check_normalization: false,
            ..Self::default()
        }
    }
}

/// Per-frame natural-log symbol probabilities for one utterance, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    utterance_id: String,
    frame_count: usize,
    vocab_size: usize,
    data: Vec<f64>,
}

impl PosteriorMatrix {
    pub fn new(
        utterance_id: impl Into<String>,
        frame_count: usize,
        vocab_size: usize,
        data: Vec<f64>,
        validation: Validation,
    ) -> Result<Self, LoadError> {
        if frame_count == 0 || vocab_size == 0 {
            return Err(LoadError::EmptyMatrix);
        }
        if data.len() != frame_count * vocab_size {
            return Err(LoadError::Malformed(format!(
                "expected {} entries for {}x{} matrix, found {}",
                frame_count * vocab_size,
                frame_count,
                vocab_size,
                data.len()
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(LoadError::NonFiniteEntry {
                    frame: i / vocab_size,
                    column: i % vocab_size,
                });
            }
        }
        if validation.check_normalization {
            for (frame, row) in data.chunks_exact(vocab_size).enumerate() {
                if let Some(column) = row.iter().position(|&v| v > 0.0) {
                    return Err(LoadError::PositiveLogProb { frame, column });
                }
                let sum: f64 = row.iter().map(|v| v.exp()).sum();
                if (sum - 1.0).abs() > validation.row_sum_tolerance {
                    return Err(LoadError::RowNotNormalized { frame, sum });
                }
            }
        }
        Ok(Self {
            utterance_id: utterance_id.into(),
            frame_count,
            vocab_size,
            data,
        })
    }

    pub fn from_rows(
        utterance_id: impl Into<String>,
        rows: &[Vec<f64>],
        validation: Validation,
    ) -> Result<Self, LoadError> {
        let vocab_size = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != vocab_size) {
            return Err(LoadError::Malformed(format!(
                "ragged rows: expected {} columns, found {}",
                vocab_size,
                bad.len()
            )));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(utterance_id, rows.len(), vocab_size, data, validation)
    }

    /// Builds a matrix from probabilities (not logs); zero entries are rejected as non-finite.
    pub fn from_probabilities(
        utterance_id: impl Into<String>,
        rows: &[Vec<f64>],
        validation: Validation,
    ) -> Result<Self, LoadError> {
        let logs: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect();
        Self::from_rows(utterance_id, &logs, validation)
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.vocab_size..(frame + 1) * self.vocab_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.vocab_size)
    }

    pub fn get(&self, frame: usize, symbol: usize) -> f64 {
        self.data[frame * self.vocab_size + symbol]
    }

    pub fn ensure_matches(&self, vocab: &Vocabulary) -> Result<(), LoadError> {
        if self.vocab_size != vocab.len() {
            return Err(LoadError::DimensionMismatch {
                expected: vocab.len(),
                found: self.vocab_size,
            });
        }
        Ok(())
    }

    /// Serializes to the CTCP binary layout. Entries are narrowed to `f32`.
    pub fn to_ctcp_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(CTCP_MAGIC);
        out.extend_from_slice(&CTCP_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.frame_count as u32).to_le_bytes());
        out.extend_from_slice(&(self.vocab_size as u32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn write_ctcp(&self, path: impl AsRef<Path>) -> Result<(), LoadError> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|source| LoadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        file.write_all(&self.to_ctcp_bytes()).map_err(|source| LoadError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.frame_count, self.vocab_size);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

pub fn parse_ctcp(utterance_id: &str, bytes: &[u8], validation: Validation) -> Result<PosteriorMatrix, LoadError> {
    if bytes.len() < 16 || &bytes[..4] != CTCP_MAGIC {
        return Err(LoadError::BadMagic);
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != CTCP_VERSION {
        return Err(LoadError::UnsupportedVersion(version));
    }
    let frames = word(8) as usize;
    let columns = word(12) as usize;
    let expected = frames
        .checked_mul(columns)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| LoadError::Malformed("matrix dimensions overflow".into()))?;
    let payload = &bytes[16..];
    if payload.len() != expected {
        return Err(LoadError::Malformed(format!(
            "CTCP payload holds {} bytes, header declares {}",
            payload.len(),
            expected
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    PosteriorMatrix::new(utterance_id, frames, columns, data, validation)
}

pub fn parse_text_matrix(utterance_id: &str, text: &str, validation: Validation) -> Result<PosteriorMatrix, LoadError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| LoadError::Malformed("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| LoadError::Malformed(format!("bad header line: {header:?}")))?;
    let [frames, columns] = dims[..] else {
        return Err(LoadError::Malformed(format!("bad header line: {header:?}")));
    };
    let mut data = Vec::with_capacity(frames * columns);
    let mut rows = 0;
    for (lineno, line) in lines {
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| LoadError::Malformed(format!("line {}: unparsable value", lineno + 1)))?;
        if values.len() != columns {
            return Err(LoadError::Malformed(format!(
                "line {}: expected {} values, found {}",
                lineno + 1,
                columns,
                values.len()
            )));
        }
        data.extend(values);
        rows += 1;
    }
    if rows != frames {
        return Err(LoadError::Malformed(format!(
            "header declares {frames} frames, found {rows}"
        )));
    }
    PosteriorMatrix::new(utterance_id, frames, columns, data, validation)
}

/// Loads a CTCP or text matrix, detected by the magic bytes, and checks it against `vocab`.
pub fn load_posteriors(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<PosteriorMatrix, LoadError> {
    load_posteriors_with(path, vocab, Validation::default())
}

pub fn load_posteriors_with(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    validation: Validation,
) -> Result<PosteriorMatrix, LoadError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let matrix = if bytes.starts_with(CTCP_MAGIC) {
        parse_ctcp(&id, &bytes, validation)?
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| LoadError::Malformed("matrix file is neither CTCP nor UTF-8".into()))?;
        parse_text_matrix(&id, &text, validation)?
    };
    matrix.ensure_matches(vocab)?;
    Ok(matrix)
}
