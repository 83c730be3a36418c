use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_speaker, group_ratings, Aggregation};
use super::stats::{mean_ci, pearson, two_sample_t, WelchTest};
use super::HarnessError;
use crate::io::{GroupKey, Manifest};
use crate::metrics::{Method, MethodKind, ScoreRecord};

/// A per-utterance, per-method failure that was set aside instead of aborting the run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UtteranceFailure {
    pub utterance_id: String,
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    /// Absent when ratings are missing or either side has zero variance.
    pub pearson_r: Option<f64>,
    /// Speaker-times that entered the correlation.
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub kind: MethodKind,
    pub runs: Vec<RunResult>,
    /// Single-run r, or the mean over runs.
    pub r: Option<f64>,
    /// 95% Student-t half-width over runs; only for multi-run methods.
    pub ci_halfwidth: Option<f64>,
    pub mean_score: f64,
    pub n_groups: usize,
    pub significant: bool,
    pub best: bool,
    pub best_reference_free: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub test: WelchTest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub dataset: String,
    pub language: String,
    pub n_spk: usize,
    pub n_spk_time: usize,
    pub n_sen_min: usize,
    pub n_sen_max: usize,
    pub n_utterances: usize,
    pub has_ratings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub meta: ReportMeta,
    pub rows: Vec<ReportRow>,
    pub pairwise: Vec<PairwiseTest>,
    pub aggregation: Aggregation,
    pub ratings: BTreeMap<GroupKey, f64>,
    pub failures: Vec<UtteranceFailure>,
}

pub const CSV_HEADER: &str = "dataset,method,run_index,speaker_id,timepoint_id,n_utterances,score,rating";

fn is_proposed(kind: MethodKind) -> bool {
    matches!(kind, MethodKind::Ngram | MethodKind::Llm)
}

pub fn build_report(
    dataset: &str,
    language: &str,
    manifest: &Manifest,
    records: &[ScoreRecord],
    failures: &[UtteranceFailure],
) -> Result<ReportTable, HarnessError> {
    let aggregation = aggregate_speaker(records, manifest)?;
    let ratings = group_ratings(manifest);
    let has_ratings = !ratings.is_empty();

    let mut per_group: BTreeMap<GroupKey, usize> = BTreeMap::new();
    for rec in &manifest.records {
        *per_group.entry(rec.group_key()).or_default() += 1;
    }
    let speakers: BTreeSet<&str> = manifest.records.iter().map(|r| r.speaker_id.as_str()).collect();
    let meta = ReportMeta {
        dataset: dataset.to_string(),
        language: language.to_string(),
        n_spk: speakers.len(),
        n_spk_time: per_group.len(),
        n_sen_min: per_group.values().copied().min().unwrap_or(0),
        n_sen_max: per_group.values().copied().max().unwrap_or(0),
        n_utterances: manifest.len(),
        has_ratings,
    };

    let mut rows: Vec<ReportRow> = Vec::new();
    for method in aggregation.methods() {
        let scores: Vec<_> = aggregation.for_method(&method).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = scores
            .iter()
            .filter_map(|s| ratings.get(&s.group_key()).map(|r| (s.mean_value, *r)))
            .unzip();
        let pearson_r = if has_ratings { pearson(&xs, &ys).ok() } else { None };
        let run = RunResult {
            method: method.clone(),
            pearson_r,
            n_points: xs.len(),
        };
        let mean_score = scores.iter().map(|s| s.mean_value).sum::<f64>() / scores.len() as f64;
        let label = method.label();
        match rows.last_mut() {
            Some(row) if row.label == label => {
                row.runs.push(run);
                row.mean_score += mean_score;
            }
            _ => rows.push(ReportRow {
                label,
                kind: method.kind(),
                runs: vec![run],
                r: None,
                ci_halfwidth: None,
                mean_score,
                n_groups: scores.len(),
                significant: false,
                best: false,
                best_reference_free: false,
            }),
        }
    }

    for row in &mut rows {
        let n_runs = row.runs.len();
        if n_runs > 1 {
            row.mean_score /= n_runs as f64;
        }
        let rs: Option<Vec<f64>> = row.runs.iter().map(|r| r.pearson_r).collect();
        match rs {
            Some(rs) if rs.len() == 1 => row.r = Some(rs[0]),
            Some(rs) => {
                let ci = mean_ci(&rs, 0.95)?;
                row.r = Some(ci.mean);
                row.ci_halfwidth = Some(ci.halfwidth);
            }
            None => {}
        }
    }

    let mut pairwise = Vec::new();
    let llm_rows: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].kind == MethodKind::Llm && rows[i].ci_halfwidth.is_some())
        .collect();
    for (pos, &i) in llm_rows.iter().enumerate() {
        for &j in &llm_rows[pos + 1..] {
            let a: Vec<f64> = rows[i].runs.iter().filter_map(|r| r.pearson_r).collect();
            let b: Vec<f64> = rows[j].runs.iter().filter_map(|r| r.pearson_r).collect();
            let test = two_sample_t(&a, &b)?;
            if test.is_significant() {
                // the dagger goes on the better (more negative) model of the pair
                let better = if rows[i].r <= rows[j].r { i } else { j };
                rows[better].significant = true;
            }
            pairwise.push(PairwiseTest {
                a: rows[i].label.clone(),
                b: rows[j].label.clone(),
                test,
            });
        }
    }

    let pick = |rows: &[ReportRow], filter: &dyn Fn(MethodKind) -> bool| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            if let (true, Some(r)) = (filter(row.kind), row.r) {
                if best.is_none_or(|(_, b)| r < b) {
                    best = Some((i, r));
                }
            }
        }
        best.map(|(i, _)| i)
    };
    if let Some(i) = pick(&rows, &|k| is_proposed(k) || k == MethodKind::ReferenceWer) {
        rows[i].best = true;
    }
    if let Some(i) = pick(&rows, &is_proposed) {
        rows[i].best_reference_free = true;
    }

    let mut failures = failures.to_vec();
    failures.sort();
    Ok(ReportTable {
        meta,
        rows,
        pairwise,
        aggregation,
        ratings,
        failures,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ReportTable {
    /// One line per speaker-time and method run; values in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.aggregation.scores {
            let rating = self
                .ratings
                .get(&s.group_key())
                .map(|r| r.to_string())
                .unwrap_or_default();
            let run = s.method.run_index().map(|r| r.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                csv_field(&self.meta.dataset),
                csv_field(&s.method.label()),
                run,
                csv_field(&s.speaker_id),
                csv_field(s.timepoint_id.as_deref().unwrap_or("")),
                s.n_utterances,
                s.mean_value,
                rating
            );
        }
        out
    }

    /// Per-run and per-method correlations.
    pub fn correlations_csv(&self) -> String {
        let mut out = String::from("dataset,method,run_index,pearson_r,ci_halfwidth,n_points,flags\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for row in &self.rows {
            for run in &row.runs {
                let _ = writeln!(
                    out,
                    "{},{},{},{},,{},",
                    csv_field(&self.meta.dataset),
                    csv_field(&row.label),
                    run.method.run_index().map(|r| r.to_string()).unwrap_or_default(),
                    opt(run.pearson_r),
                    run.n_points
                );
            }
            if row.runs.len() > 1 {
                let _ = writeln!(
                    out,
                    "{},{},all,{},{},{},{}",
                    csv_field(&self.meta.dataset),
                    csv_field(&row.label),
                    opt(row.r),
                    opt(row.ci_halfwidth),
                    row.runs[0].n_points,
                    self.flags(row).join(" ")
                );
            } else if !self.flags(row).is_empty() {
                // single-run rows carry their flags on the run line
                out.pop();
                out.push_str(&self.flags(row).join(" "));
                out.push('\n');
            }
        }
        out
    }

    fn flags(&self, row: &ReportRow) -> Vec<&'static str> {
        let mut flags = Vec::new();
        if row.best {
            flags.push("best");
        }
        if row.best_reference_free {
            flags.push("best-ref-free");
        }
        if row.significant {
            flags.push("significant");
        }
        flags
    }

    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let _ = writeln!(out, "ASR inconsistency report");
        let _ = writeln!(out, "dataset: {}", m.dataset);
        let _ = writeln!(out, "language: {}", m.language);
        let n_sen = if m.n_sen_min == m.n_sen_max {
            m.n_sen_min.to_string()
        } else {
            format!("{}-{}", m.n_sen_min, m.n_sen_max)
        };
        let _ = writeln!(
            out,
            "n_spk: {}  n_spk-time: {}  n_sen: {}  n_utt: {}",
            m.n_spk, m.n_spk_time, n_sen, m.n_utterances
        );
        let _ = writeln!(
            out,
            "speaker-time score: mean of per-utterance scores (per-utterance WER)"
        );
        out.push('\n');

        if m.has_ratings {
            let _ = writeln!(
                out,
                "{:<24} {:>18} {:>5} {:>12}  flags",
                "method", "pearson r", "n", "mean score"
            );
            for row in &self.rows {
                let r = match (row.r, row.ci_halfwidth) {
                    (Some(r), Some(ci)) => format!("{r:.4}±{ci:.4}"),
                    (Some(r), None) => format!("{r:.4}"),
                    (None, _) => "n/a".to_string(),
                };
                let mut flags = Vec::new();
                if row.best {
                    flags.push("[best]");
                }
                if row.best_reference_free {
                    flags.push("[best ref-free]");
                }
                if row.significant {
                    flags.push("†");
                }
                let line = format!(
                    "{:<24} {:>18} {:>5} {:>12.4}  {}",
                    row.label,
                    r,
                    row.runs[0].n_points,
                    row.mean_score,
                    flags.join(" ")
                );
                let _ = writeln!(out, "{}", line.trim_end());
            }
        } else {
            let _ = writeln!(out, "no ratings in manifest: correlations omitted");
            let _ = writeln!(out, "{:<24} {:>5} {:>12}", "method", "n", "mean score");
            for row in &self.rows {
                let _ = writeln!(out, "{:<24} {:>5} {:>12.4}", row.label, row.n_groups, row.mean_score);
            }
        }

        let multi: Vec<&ReportRow> = self.rows.iter().filter(|r| r.runs.len() > 1).collect();
        if m.has_ratings && !multi.is_empty() {
            out.push('\n');
            let _ = writeln!(out, "per-run correlations");
            for row in multi {
                for run in &row.runs {
                    let r = run.pearson_r.map(|r| format!("{r:.4}")).unwrap_or_else(|| "n/a".into());
                    let _ = writeln!(
                        out,
                        "{:<24} run {:<3} {:>9}",
                        row.label,
                        run.method.run_index().unwrap_or(0),
                        r
                    );
                }
            }
        }
        if !self.pairwise.is_empty() {
            out.push('\n');
            let _ = writeln!(out, "Welch t-test on run-level r (significant at p < 0.05)");
            for p in &self.pairwise {
                let _ = writeln!(
                    out,
                    "{} vs {}: t = {:.4}, df = {:.2}, p = {:.4}{}",
                    p.a,
                    p.b,
                    p.test.t_stat,
                    p.test.df,
                    p.test.p_value,
                    if p.test.is_significant() { " †" } else { "" }
                );
            }
        }

        out.push('\n');
        let _ = writeln!(
            out,
            "excluded utterance scores: {}",
            self.aggregation.excluded_utterances()
        );
        for (method, group) in &self.aggregation.empty_groups {
            let _ = writeln!(
                out,
                "empty group: {} speaker {}{}",
                method.label(),
                group.speaker_id,
                group
                    .timepoint_id
                    .as_ref()
                    .map(|t| format!(" time {t}"))
                    .unwrap_or_default()
            );
        }
        let _ = writeln!(out, "quarantined failures: {}", self.failures.len());
        for f in &self.failures {
            let _ = writeln!(out, "  {} [{}]: {}", f.utterance_id, f.method, f.message);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_manifest;

    fn manifest(with_ratings: bool) -> Manifest {
        let lines: Vec<String> = (0..4)
            .map(|i| {
                let rating = if with_ratings {
                    format!(",\"rating\":{}", 5 - i)
                } else {
                    String::new()
                };
                format!("{{\"utterance_id\":\"u{i}\",\"speaker_id\":\"s{i}\",\"posterior_path\":\"p\"{rating}}}")
            })
            .collect();
        parse_manifest(&lines.join("\n"), ".").unwrap()
    }

    fn records() -> Vec<ScoreRecord> {
        let mut out = Vec::new();
        for i in 0..4 {
            let x = i as f64;
            let mut push = |method: Method, value: f64| {
                out.push(ScoreRecord {
                    utterance_id: format!("u{i}"),
                    method,
                    value,
                    hyp_source: None,
                    ref_source: None,
                })
            };
            push(Method::Ngram, 0.1 * x);
            push(Method::SpeechRate, 100.0 - 5.0 * x);
            for run in 0..3 {
                push(
                    Method::Llm {
                        model: "m".into(),
                        run_index: run,
                    },
                    0.1 * x + if i == 3 { 0.01 * run as f64 } else { 0.0 },
                );
            }
        }
        out
    }

    #[test]
    fn rows_are_grouped_and_flagged() {
        let table = build_report("d", "Dutch", &manifest(true), &records(), &[]).unwrap();
        let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["speech_rate", "ngram", "llm:m"]);
        assert!((table.rows[0].r.unwrap() - 1.0).abs() < 1e-12);
        assert!((table.rows[1].r.unwrap() + 1.0).abs() < 1e-12);
        assert!(table.rows[1].best && table.rows[1].best_reference_free);
        assert_eq!(table.rows[2].runs.len(), 3);
        assert!(table.rows[2].ci_halfwidth.unwrap() > 0.0);
        let csv = table.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + 4 * 5);
        assert!(csv.contains("d,llm:m,2,s3,,1,0.32000000000000006,2\n"));
        let text = table.to_text();
        assert!(text.contains("[best]"));
        assert!(text.contains("per-run correlations"));
    }

    #[test]
    fn missing_ratings_drop_correlations() {
        let table = build_report("d", "Dutch", &manifest(false), &records(), &[]).unwrap();
        assert!(table.rows.iter().all(|r| r.r.is_none()));
        let text = table.to_text();
        assert!(text.contains("correlations omitted"));
        assert!(!text.contains("pearson"));
        assert!(table.to_csv().lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn fields_with_commas_are_quoted() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\","), "\"say \"\"x\"\",\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
