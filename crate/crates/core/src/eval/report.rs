use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentSpec;
use crate::env::Termination;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub episode: usize,
    pub seed: u64,
    pub reward: f64,
    pub steps: u64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_reward: f64,
    /// Sample standard deviation of episode rewards.
    pub std_reward: f64,
    /// Standard deviation of per-seed mean rewards, when several seeds ran.
    pub per_seed_std: Option<f64>,
    pub causes: BTreeMap<String, usize>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Aggregates per-episode rows; `rows` must be non-empty.
pub fn summarize(rows: &[EpisodeOutcome]) -> Summary {
    let rewards: Vec<f64> = rows.iter().map(|r| r.reward).collect();
    let (mean_reward, std_reward) = mean_std(&rewards);
    let successes = rows.iter().filter(|r| r.termination.is_success()).count();
    let mut causes = BTreeMap::new();
    for r in rows {
        *causes.entry(r.termination.to_string()).or_insert(0) += 1;
    }
    Summary {
        episodes: rows.len(),
        successes,
        success_rate: successes as f64 / rows.len() as f64,
        mean_reward,
        std_reward,
        per_seed_std: None,
        causes,
    }
}

/// Pools the episodes of several single-seed reports and adds the spread
/// of their means.
pub fn combine_seeds(reports: &[ExperimentReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to combine".into()));
    }
    let rows: Vec<EpisodeOutcome> = reports.iter().flat_map(|r| r.episodes.clone()).collect();
    let means: Vec<f64> = reports.iter().map(|r| r.summary.mean_reward).collect();
    let mut s = summarize(&rows);
    s.per_seed_std = Some(mean_std(&means).1);
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label: String,
    pub spec: ExperimentSpec,
    pub episodes: Vec<EpisodeOutcome>,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn new(spec: ExperimentSpec, label: impl Into<String>, episodes: Vec<EpisodeOutcome>) -> Self {
        let summary = summarize(&episodes);
        Self {
            label: label.into(),
            spec,
            episodes,
            summary,
        }
    }

    pub fn success_rate(&self) -> f64 {
        self.summary.success_rate
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,seed,reward,steps,termination\n");
        for r in &self.episodes {
            let _ = writeln!(out, "{},{},{},{},{}", r.episode, r.seed, r.reward, r.steps, r.termination);
        }
        out
    }

    /// Markdown summary with the spec echoed underneath.
    pub fn to_markdown(&self) -> String {
        let mut out = render_table(
            &format!("{} evaluation", self.spec.kind),
            &[(self.label.clone(), self.summary.clone())],
        );
        let _ = writeln!(out, "\nTermination causes:\n");
        for (cause, n) in &self.summary.causes {
            let _ = writeln!(out, "- {cause}: {n}");
        }
        let _ = writeln!(
            out,
            "\nSpec:\n\n```json\n{}\n```",
            serde_json::to_string_pretty(&self.spec).unwrap_or_default()
        );
        out
    }
}

/// Short stable digest of a spec, used in report file names.
pub fn spec_hash(spec: &ExperimentSpec) -> String {
    let json = serde_json::to_vec(spec).expect("spec serializes");
    Sha256::digest(&json)[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// Table with `Agent | Reward | Success Rate` rows.
pub fn render_table(title: &str, rows: &[(String, Summary)]) -> String {
    render_table_with(title, "Agent", rows)
}

/// [`render_table`] with a different first column header.
pub fn render_table_with(title: &str, first: &str, rows: &[(String, Summary)]) -> String {
    let mut out = format!("## {title}\n\n| {first} | Reward | Success Rate |\n|---|---|---|\n");
    for (label, s) in rows {
        let spread = match s.per_seed_std {
            Some(p) => format!("{:.3} ± {:.3} (seeds ± {p:.3})", s.mean_reward, s.std_reward),
            None => format!("{:.3} ± {:.3}", s.mean_reward, s.std_reward),
        };
        let _ = writeln!(out, "| {label} | {spread} | {:.0}% |", 100.0 * s.success_rate);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub markdown: PathBuf,
    pub json: PathBuf,
}

/// Writes `<stem>.csv` (one row per episode), `<stem>.md` and the full
/// report as `<stem>.json`; the stem encodes kind, label, spec hash and seed.
pub fn write_report(dir: impl AsRef<Path>, report: &ExperimentReport) -> Result<ReportFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = format!(
        "eval-{}-{}-{}-seed{}",
        report.spec.kind,
        report.label.to_lowercase().replace(' ', "_"),
        spec_hash(&report.spec),
        report.spec.seed
    );
    let csv = dir.join(format!("{stem}.csv"));
    let markdown = dir.join(format!("{stem}.md"));
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
    std::fs::write(&markdown, report.to_markdown()).map_err(|e| Error::io(&markdown, e))?;
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    Ok(ReportFiles { csv, markdown, json })
}

/// Reads back a report written by [`write_report`].
pub fn read_report(path: impl AsRef<Path>) -> Result<ExperimentReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
