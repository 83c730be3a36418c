use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::io::{GroupKey, Manifest};
use crate::metrics::{Method, ScoreRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerScore {
    pub speaker_id: String,
    pub timepoint_id: Option<String>,
    pub method: Method,
    pub mean_value: f64,
    pub n_utterances: usize,
    /// Utterances of this speaker-time without a score for this method.
    pub n_excluded: usize,
}

impl SpeakerScore {
    pub fn group_key(&self) -> GroupKey {
        GroupKey {
            speaker_id: self.speaker_id.clone(),
            timepoint_id: self.timepoint_id.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregation {
    /// Sorted by method, then speaker-time.
    pub scores: Vec<SpeakerScore>,
    /// Speaker-times with no scored utterance for a method.
    pub empty_groups: Vec<(Method, GroupKey)>,
}

impl Aggregation {
    pub fn require_complete(&self) -> Result<(), HarnessError> {
        match self.empty_groups.first() {
            Some((method, group)) => Err(HarnessError::EmptyGroup {
                method: method.label(),
                speaker_id: group.speaker_id.clone(),
                timepoint_id: group.timepoint_id.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn excluded_utterances(&self) -> usize {
        self.scores.iter().map(|s| s.n_excluded).sum()
    }

    pub fn methods(&self) -> Vec<Method> {
        let set: BTreeSet<&Method> = self.scores.iter().map(|s| &s.method).collect();
        set.into_iter().cloned().collect()
    }

    pub fn for_method<'a>(&'a self, method: &'a Method) -> impl Iterator<Item = &'a SpeakerScore> + 'a {
        self.scores.iter().filter(move |s| &s.method == method)
    }
}

/// Mean per (speaker, timepoint, method) over the utterances that have a score.
pub fn aggregate_speaker(records: &[ScoreRecord], manifest: &Manifest) -> Result<Aggregation, HarnessError> {
    let mut members: BTreeMap<GroupKey, Vec<&str>> = BTreeMap::new();
    let mut group_of: HashMap<&str, GroupKey> = HashMap::new();
    for rec in &manifest.records {
        members.entry(rec.group_key()).or_default().push(&rec.utterance_id);
        group_of.insert(&rec.utterance_id, rec.group_key());
    }

    let mut by_method: BTreeMap<&Method, HashMap<&str, f64>> = BTreeMap::new();
    for r in records {
        if !group_of.contains_key(r.utterance_id.as_str()) {
            return Err(HarnessError::UnknownUtterance(r.utterance_id.clone()));
        }
        let prev = by_method.entry(&r.method).or_default().insert(&r.utterance_id, r.value);
        if prev.is_some() {
            return Err(HarnessError::DuplicateScore {
                utterance_id: r.utterance_id.clone(),
                method: r.method.label(),
            });
        }
    }

    let mut out = Aggregation::default();
    for (method, values) in by_method {
        for (group, utts) in &members {
            // manifest order keeps the summation order fixed
            let scored: Vec<f64> = utts.iter().filter_map(|u| values.get(u).copied()).collect();
            let excluded = utts.len() - scored.len();
            if scored.is_empty() {
                tracing::warn!(method = %method.label(), speaker = %group.speaker_id, "no scored utterances");
                out.empty_groups.push((method.clone(), group.clone()));
                continue;
            }
            if excluded > 0 {
                tracing::info!(method = %method.label(), speaker = %group.speaker_id, excluded, "utterances excluded");
            }
            out.scores.push(SpeakerScore {
                speaker_id: group.speaker_id.clone(),
                timepoint_id: group.timepoint_id.clone(),
                method: method.clone(),
                mean_value: scored.iter().sum::<f64>() / scored.len() as f64,
                n_utterances: scored.len(),
                n_excluded: excluded,
            });
        }
    }
    Ok(out)
}

/// Mean utterance rating per speaker-time; groups without any rating are absent.
pub fn group_ratings(manifest: &Manifest) -> BTreeMap<GroupKey, f64> {
    let mut acc: BTreeMap<GroupKey, (f64, usize)> = BTreeMap::new();
    for rec in &manifest.records {
        if let Some(r) = rec.rating {
            let e = acc.entry(rec.group_key()).or_insert((0.0, 0));
            e.0 += r;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}
