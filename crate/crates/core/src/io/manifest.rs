use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::LoadError;

/// One line of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timepoint_id: Option<String>,
    pub posterior_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

/// Speaker/time-point pair under which utterance scores are pooled.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub speaker_id: String,
    pub timepoint_id: Option<String>,
}

impl UtteranceRecord {
    pub fn group_key(&self) -> GroupKey {
        GroupKey {
            speaker_id: self.speaker_id.clone(),
            timepoint_id: self.timepoint_id.clone(),
        }
    }

    fn validate(&self, line: usize) -> Result<(), LoadError> {
        let bad = |reason: &str| LoadError::ManifestLine {
            line,
            reason: reason.to_string(),
        };
        if self.utterance_id.trim().is_empty() {
            return Err(bad("empty utterance_id"));
        }
        if self.speaker_id.trim().is_empty() {
            return Err(bad("empty speaker_id"));
        }
        if let Some(d) = self.duration_s {
            if !(d > 0.0 && d.is_finite()) {
                return Err(bad("duration_s must be positive"));
            }
        }
        if let Some(r) = self.rating {
            if !r.is_finite() {
                return Err(bad("rating must be finite"));
            }
        }
        Ok(())
    }
}

/// Records in file order, with relative paths resolved against the manifest directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<UtteranceRecord>,
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(records: Vec<UtteranceRecord>, base_dir: impl Into<PathBuf>) -> Result<Self, LoadError> {
        let mut seen = HashSet::new();
        for (i, record) in records.iter().enumerate() {
            record.validate(i + 1)?;
            if !seen.insert(record.utterance_id.as_str()) {
                return Err(LoadError::DuplicateUtterance(record.utterance_id.clone()));
            }
        }
        Ok(Self {
            records,
            base_dir: base_dir.into(),
        })
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn get(&self, utterance_id: &str) -> Option<&UtteranceRecord> {
        self.records.iter().find(|r| r.utterance_id == utterance_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_ratings(&self) -> bool {
        self.records.iter().any(|r| r.rating.is_some())
    }

    /// Speech rate needs a duration, either declared or derivable from audio.
    pub fn require_durations(&self) -> Result<(), LoadError> {
        match self
            .records
            .iter()
            .find(|r| r.duration_s.is_none() && r.audio_path.is_none())
        {
            Some(r) => Err(LoadError::MissingDuration(r.utterance_id.clone())),
            None => Ok(()),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn parse_manifest(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest, LoadError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: UtteranceRecord = serde_json::from_str(line).map_err(|e| LoadError::ManifestLine {
            line: i + 1,
            reason: e.to_string(),
        })?;
        record.validate(i + 1)?;
        records.push(record);
    }
    Manifest::new(records, base_dir)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"{"utterance_id":"u1","speaker_id":"s1","posterior_path":"p/u1.ctcp","rating":4.0,"duration_s":2.5}
{"utterance_id":"u2","speaker_id":"s1","timepoint_id":"t0","posterior_path":"p/u2.ctcp","audio_path":"a/u2.wav"}
"#;

    #[test]
    fn keeps_file_order() {
        let m = parse_manifest(TWO, "/data").unwrap();
        let ids: Vec<_> = m.records.iter().map(|r| r.utterance_id.as_str()).collect();
        assert_eq!(ids, ["u1", "u2"]);
        assert_eq!(m.resolve(&m.records[0].posterior_path), Path::new("/data/p/u1.ctcp"));
        assert_eq!(m.records[1].timepoint_id.as_deref(), Some("t0"));
    }

    #[test]
    fn duplicate_utterance_is_rejected() {
        let text = format!("{}{}", TWO.lines().next().unwrap(), "\n") + TWO.lines().next().unwrap();
        assert!(matches!(
            parse_manifest(&text, ""),
            Err(LoadError::DuplicateUtterance(ref id)) if id == "u1"
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{}\n{{not json\n", TWO.lines().next().unwrap());
        assert!(matches!(
            parse_manifest(&text, ""),
            Err(LoadError::ManifestLine { line: 2, .. })
        ));
    }

    #[test]
    fn missing_duration_only_matters_for_speech_rate() {
        let text = r#"{"utterance_id":"u1","speaker_id":"s1","posterior_path":"u1.ctcp"}"#;
        let m = parse_manifest(text, "").unwrap();
        assert!(matches!(
            m.require_durations(),
            Err(LoadError::MissingDuration(ref id)) if id == "u1"
        ));
        parse_manifest(TWO, "").unwrap().require_durations().unwrap();
    }

    #[test]
    fn serialization_round_trips() {
        let m = parse_manifest(TWO, "/data").unwrap();
        let again = parse_manifest(&m.to_jsonl(), "/data").unwrap();
        assert_eq!(m, again);
    }
}
