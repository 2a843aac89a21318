//! Run summaries: per-bug counts, error rates, entropy tables, budget curves
//! and throughput, derived from the artifacts in a run directory.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifacts::{
    read_json, read_jsonl, write_atomic, write_json, ArtifactError, FilterRecord, GenerationLog,
    Plan, RankingRecord, RunLayout, UnitId, ValidationEntry,
};
use crate::assemble::{CandidateStatus, PatchCandidate};
use crate::prompt::RepairSetting;
use crate::rank::{
    budget_curve, entropy_report, validation_order, CorrectnessScorer, RankingStrategy,
    StrategyKind,
};
use crate::validate::{Correctness, Outcome};

/// What a run directory holds, stage by stage.
#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub config: Option<serde_json::Value>,
    pub plan: Plan,
    pub units: Vec<UnitArtifacts>,
    pub generation_logs: Vec<GenerationLog>,
}

#[derive(Debug, Clone)]
pub struct UnitArtifacts {
    pub unit: UnitId,
    pub filtered: Option<Vec<PatchCandidate>>,
    pub filter: Option<FilterRecord>,
    pub ranking: Option<RankingRecord>,
    pub validation: Option<Vec<ValidationEntry>>,
}

fn read_optional<T>(
    path: PathBuf,
    read: impl FnOnce(&Path) -> Result<T, ArtifactError>,
) -> Result<Option<T>, ArtifactError> {
    if path.exists() {
        read(&path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn load_run(layout: &RunLayout) -> Result<RunArtifacts, ArtifactError> {
    let config = read_optional(layout.config(), read_json)?;
    let plan: Plan = read_optional(layout.plan(), read_json)?.unwrap_or_default();
    let mut units = Vec::with_capacity(plan.units.len());
    let mut generation_logs = Vec::new();
    for unit in &plan.units {
        units.push(UnitArtifacts {
            unit: unit.clone(),
            filtered: read_optional(layout.filtered(unit), read_jsonl)?,
            filter: read_optional(layout.filter_record(unit), read_json)?,
            ranking: read_optional(layout.ranking(unit), read_json)?,
            validation: read_optional(layout.validation(unit), read_jsonl)?,
        });
        if let Some(log) = read_optional(layout.generation_log(unit), read_json)? {
            generation_logs.push(log);
        }
    }
    Ok(RunArtifacts {
        config,
        plan,
        units,
        generation_logs,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BugRow {
    pub bug_id: String,
    pub setting: Option<RepairSetting>,
    /// Generated samples.
    pub samples: usize,
    /// Distinct candidates after dedupe.
    pub unique: usize,
    pub dedup_removed: usize,
    pub syntax_errors: usize,
    pub semantic_errors: usize,
    /// Syntax and build failures counted per sample rather than per
    /// distinct candidate.
    pub syntax_error_samples: usize,
    pub semantic_error_samples: usize,
    /// Candidates that passed syntax but were not built for lack of a build
    /// command.
    pub semantic_skipped: usize,
    pub validated: usize,
    /// Includes timeouts.
    pub test_fail: usize,
    pub timeouts: usize,
    pub plausible: usize,
    pub auto_correct: usize,
    pub needs_review: usize,
    /// Passed filtering but fell outside the validation budget.
    pub unvalidated: usize,
    pub best_plausible_rank: Option<usize>,
}

impl BugRow {
    /// auto_correct <= plausible <= samples - syntax - semantic - dedup_removed.
    pub fn is_monotone(&self) -> bool {
        self.auto_correct <= self.plausible
            && self.auto_correct + self.needs_review == self.plausible
            && self.plausible + self.syntax_errors + self.semantic_errors + self.dedup_removed
                <= self.samples
            && self.validated == self.test_fail + self.plausible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: RepairSetting,
    pub bugs: usize,
    pub samples: usize,
    pub bugs_plausible: usize,
    pub bugs_auto_correct: usize,
    /// Undefined (None) when no samples were generated.
    pub syntactic_rate: Option<f64>,
    pub semantic_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub bugs: usize,
    pub bugs_plausible: usize,
    pub bugs_auto_correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub setting: RepairSetting,
    pub group: String,
    pub count: usize,
    pub mean_entropy: f64,
    pub sum_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub setting: RepairSetting,
    pub strategy: StrategyKind,
    pub budget: usize,
    pub bugs_fixed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub bug_id: String,
    pub setting: RepairSetting,
    pub sample_index: usize,
    pub duplicate_count: usize,
    pub template: Option<String>,
    pub location: Option<String>,
    /// Final status; `assembled` means never validated.
    pub status: CandidateStatus,
    pub mean_entropy: Option<f64>,
    pub sum_entropy: Option<f64>,
    pub validation_rank: Option<usize>,
    /// Positive leans correct; plausible candidates only.
    pub correctness_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    /// None for the run as a whole.
    pub setting: Option<RepairSetting>,
    pub samples: usize,
    pub generation_seconds: f64,
    pub patches_per_minute: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Some planned unit has not finished validation.
    pub partial: bool,
    pub config: Option<serde_json::Value>,
    pub rows: Vec<BugRow>,
    pub settings: Vec<SettingSummary>,
    pub totals: Totals,
    pub entropy: Vec<EntropyRow>,
    pub curves: Vec<CurvePoint>,
    pub candidates: Vec<CandidateRow>,
    /// Wall-clock derived; kept out of the deterministic report files.
    pub throughput: Vec<Throughput>,
}

/// Final status of each candidate once validation results are applied.
fn final_candidates(unit: &UnitArtifacts) -> Vec<(PatchCandidate, Option<usize>)> {
    let Some(filtered) = &unit.filtered else {
        return Vec::new();
    };
    let results: HashMap<usize, &ValidationEntry> = unit
        .validation
        .iter()
        .flatten()
        .map(|e| (e.sample_index, e))
        .collect();
    filtered
        .iter()
        .map(|c| {
            let mut c = c.clone();
            let mut rank = None;
            if let Some(e) = results.get(&c.sample_index) {
                rank = Some(e.rank);
                c.status = match (e.outcome, e.correctness) {
                    (Outcome::Plausible, Correctness::AutoCorrect) => CandidateStatus::Correct,
                    (Outcome::Plausible, _) => CandidateStatus::NeedsReview,
                    _ => CandidateStatus::TestFail,
                };
            }
            (c, rank)
        })
        .collect()
}

fn bug_row(unit: &UnitArtifacts, candidates: &[(PatchCandidate, Option<usize>)]) -> BugRow {
    let mut row = BugRow {
        bug_id: unit.unit.bug_id.clone(),
        setting: Some(unit.unit.setting),
        ..BugRow::default()
    };
    let semantic_checked = unit.filter.is_none_or(|f| f.semantic_checked);
    for (c, rank) in candidates {
        row.samples += c.duplicate_count;
        row.unique += 1;
        match c.status {
            CandidateStatus::SyntaxError => {
                row.syntax_errors += 1;
                row.syntax_error_samples += c.duplicate_count;
            }
            CandidateStatus::SemanticError => {
                row.semantic_errors += 1;
                row.semantic_error_samples += c.duplicate_count;
            }
            CandidateStatus::Assembled => row.unvalidated += 1,
            CandidateStatus::TestFail => row.test_fail += 1,
            CandidateStatus::Correct => row.auto_correct += 1,
            CandidateStatus::NeedsReview => row.needs_review += 1,
            CandidateStatus::Plausible => {}
        }
        if !semantic_checked && !c.status.is_filtered_out() {
            row.semantic_skipped += 1;
        }
        if c.status.is_plausible() {
            row.best_plausible_rank = match (row.best_plausible_rank, rank) {
                (Some(a), Some(b)) => Some(a.min(*b)),
                (a, b) => a.or(*b),
            };
        }
    }
    row.plausible = row.auto_correct + row.needs_review;
    row.validated = row.test_fail + row.plausible;
    row.dedup_removed = row.samples - row.unique;
    row.timeouts = unit
        .validation
        .iter()
        .flatten()
        .filter(|e| e.outcome == Outcome::Timeout)
        .count();
    row
}

fn rate(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| part as f64 / whole as f64)
}

/// Per-setting and whole-run aggregates recomputed from rows alone.
pub fn aggregate(rows: &[BugRow]) -> (Vec<SettingSummary>, Totals) {
    let mut by_setting: BTreeMap<RepairSetting, Vec<&BugRow>> = BTreeMap::new();
    for r in rows {
        if let Some(s) = r.setting {
            by_setting.entry(s).or_default().push(r);
        }
    }
    let settings = by_setting
        .into_iter()
        .map(|(setting, rs)| {
            let samples: usize = rs.iter().map(|r| r.samples).sum();
            SettingSummary {
                setting,
                bugs: rs.len(),
                samples,
                bugs_plausible: rs.iter().filter(|r| r.plausible > 0).count(),
                bugs_auto_correct: rs.iter().filter(|r| r.auto_correct > 0).count(),
                syntactic_rate: rate(rs.iter().map(|r| r.syntax_error_samples).sum(), samples),
                semantic_rate: rate(rs.iter().map(|r| r.semantic_error_samples).sum(), samples),
            }
        })
        .collect();
    let ids = |f: &dyn Fn(&BugRow) -> bool| -> usize {
        rows.iter()
            .filter(|r| f(r))
            .map(|r| r.bug_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    };
    let totals = Totals {
        bugs: ids(&|_| true),
        bugs_plausible: ids(&|r| r.plausible > 0),
        bugs_auto_correct: ids(&|r| r.auto_correct > 0),
    };
    (settings, totals)
}

fn curves(
    units: &[(&UnitArtifacts, Vec<(PatchCandidate, Option<usize>)>)],
) -> Vec<CurvePoint> {
    let mut by_setting: BTreeMap<RepairSetting, Vec<usize>> = BTreeMap::new();
    for (i, (u, _)) in units.iter().enumerate() {
        if u.filtered.is_some() {
            by_setting.entry(u.unit.setting).or_default().push(i);
        }
    }
    let mut out = Vec::new();
    for (setting, members) in by_setting {
        let mut oracle: HashMap<String, HashSet<usize>> = HashMap::new();
        let mut survivors: Vec<(String, Vec<PatchCandidate>, u64)> = Vec::new();
        for &i in &members {
            let (u, cands) = &units[i];
            let key = u.unit.bug_id.clone();
            oracle.insert(
                key.clone(),
                cands
                    .iter()
                    .filter(|(c, _)| c.status == CandidateStatus::Correct)
                    .map(|(c, _)| c.sample_index)
                    .collect(),
            );
            let alive = cands
                .iter()
                .filter(|(c, _)| !c.status.is_filtered_out())
                .map(|(c, _)| c.clone())
                .collect();
            let seed = u.ranking.as_ref().map_or(0, |r| r.strategy.seed);
            survivors.push((key, alive, seed));
        }
        let longest = survivors.iter().map(|s| s.1.len()).max().unwrap_or(0).max(1);
        let budgets: Vec<usize> = (1..=longest).collect();
        for kind in StrategyKind::ALL {
            let rankings: Vec<(String, Vec<usize>)> = survivors
                .iter()
                .map(|(id, alive, seed)| {
                    (id.clone(), validation_order(alive, RankingStrategy::new(kind, *seed)))
                })
                .collect();
            let curve = budget_curve(&rankings, &oracle, &budgets).expect("oracle covers every unit");
            out.extend(curve.into_iter().map(|(budget, bugs_fixed)| CurvePoint {
                setting,
                strategy: kind,
                budget,
                bugs_fixed,
            }));
        }
    }
    out
}

fn throughput(logs: &[GenerationLog]) -> Vec<Throughput> {
    let mut by_setting: BTreeMap<RepairSetting, (usize, f64)> = BTreeMap::new();
    for log in logs {
        let e = by_setting.entry(log.setting).or_default();
        e.0 += log.samples;
        e.1 += log.wall_seconds;
    }
    let make = |setting, samples: usize, seconds: f64| Throughput {
        setting,
        samples,
        generation_seconds: seconds,
        patches_per_minute: (seconds > 0.0).then(|| samples as f64 / (seconds / 60.0)),
    };
    let total_samples = by_setting.values().map(|v| v.0).sum();
    let total_seconds = by_setting.values().map(|v| v.1).sum();
    let mut out: Vec<Throughput> = by_setting
        .into_iter()
        .map(|(s, (n, t))| make(Some(s), n, t))
        .collect();
    out.push(make(None, total_samples, total_seconds));
    out
}

pub fn summarize(artifacts: &RunArtifacts) -> RunReport {
    let scorer = CorrectnessScorer::default_calibrated();
    let units: Vec<(&UnitArtifacts, Vec<(PatchCandidate, Option<usize>)>)> = artifacts
        .units
        .iter()
        .map(|u| (u, final_candidates(u)))
        .collect();
    let partial = artifacts.units.iter().any(|u| u.validation.is_none());

    let mut rows = Vec::new();
    let mut entropy = Vec::new();
    let mut by_setting: BTreeMap<RepairSetting, Vec<PatchCandidate>> = BTreeMap::new();
    let mut candidates = Vec::new();
    for (u, cands) in &units {
        if u.filtered.is_none() {
            continue;
        }
        rows.push(bug_row(u, cands));
        for (c, rank) in cands {
            by_setting.entry(u.unit.setting).or_default().push(c.clone());
            candidates.push(CandidateRow {
                bug_id: c.bug_id.clone(),
                setting: c.setting,
                sample_index: c.sample_index,
                duplicate_count: c.duplicate_count,
                template: c.template.map(|t| t.as_str().to_string()),
                location: c.location.map(|l| l.to_string()),
                status: c.status,
                mean_entropy: c.mean_entropy,
                sum_entropy: c.sum_entropy,
                validation_rank: *rank,
                correctness_score: if c.status.is_plausible() {
                    scorer.score(c)
                } else {
                    None
                },
            });
        }
    }
    for (setting, cands) in &by_setting {
        for (group, g) in entropy_report(cands) {
            entropy.push(EntropyRow {
                setting: *setting,
                group: group.as_str().to_string(),
                count: g.count,
                mean_entropy: g.mean_entropy,
                sum_entropy: g.sum_entropy,
            });
        }
    }
    let (settings, totals) = aggregate(&rows);
    RunReport {
        partial,
        config: artifacts.config.clone(),
        rows,
        settings,
        totals,
        entropy,
        curves: curves(&units),
        candidates,
        throughput: throughput(&artifacts.generation_logs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    HumanTable,
    Csv,
    JsonLines,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::HumanTable, Format::Csv, Format::JsonLines];

    pub fn file_name(self) -> &'static str {
        match self {
            Format::HumanTable => "report.txt",
            Format::Csv => "report.csv",
            Format::JsonLines => "report.jsonl",
        }
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn opt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

fn config_line(config: &Option<serde_json::Value>) -> String {
    let Some(c) = config else {
        return "config: none".into();
    };
    let show = |v: Option<&serde_json::Value>| match v {
        None | Some(serde_json::Value::Null) => "-".to_string(),
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(v) => v.to_string(),
    };
    let get = |k: &str| show(c.get(k));
    let backend = show(c.get("backend").and_then(|b| b.get("kind")));
    format!(
        "backend: {backend}  strategy: {}  samples: {}  temperature: {}  top_p: {}  templates: {}  budget: {}",
        get("strategy"),
        get("num_samples"),
        get("temperature"),
        get("top_p"),
        get("templates"),
        get("budget"),
    )
}

pub fn render_table(report: &RunReport) -> String {
    let mut s = String::new();
    let status = if report.partial { "partial" } else { "complete" };
    let _ = writeln!(s, "repair run report ({status})");
    let _ = writeln!(s, "{}", config_line(&report.config));
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<28} {:<22} {:>7} {:>6} {:>6} {:>8} {:>9} {:>9} {:>9} {:>7} {:>6} {:>9}",
        "bug", "setting", "samples", "unique", "syntax", "semantic", "validated", "test_fail", "plausible", "correct", "review", "best_rank"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<28} {:<22} {:>7} {:>6} {:>6} {:>8} {:>9} {:>9} {:>9} {:>7} {:>6} {:>9}",
            r.bug_id,
            opt(r.setting),
            r.samples,
            r.unique,
            r.syntax_errors,
            r.semantic_errors,
            r.validated,
            r.test_fail,
            r.plausible,
            r.auto_correct,
            r.needs_review,
            opt(r.best_plausible_rank),
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<22} {:>5} {:>8} {:>9} {:>7} {:>11} {:>13}",
        "setting", "bugs", "samples", "plausible", "correct", "syntax_rate", "semantic_rate"
    );
    for g in &report.settings {
        let _ = writeln!(
            s,
            "{:<22} {:>5} {:>8} {:>9} {:>7} {:>11} {:>13}",
            g.setting.as_str(),
            g.bugs,
            g.samples,
            g.bugs_plausible,
            g.bugs_auto_correct,
            opt_rate(g.syntactic_rate),
            opt_rate(g.semantic_rate),
        );
    }
    let t = &report.totals;
    let _ = writeln!(
        s,
        "all settings: {} bugs, {} with a plausible patch, {} with an auto-correct patch",
        t.bugs, t.bugs_plausible, t.bugs_auto_correct
    );
    if !report.entropy.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<22} {:<5} {:>6} {:>12} {:>12}", "setting", "group", "count", "mean_entropy", "sum_entropy");
        for e in &report.entropy {
            let _ = writeln!(
                s,
                "{:<22} {:<5} {:>6} {:>12.6} {:>12.6}",
                e.setting.as_str(),
                e.group,
                e.count,
                e.mean_entropy,
                e.sum_entropy
            );
        }
    }
    s
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

const ROW_COLUMNS: [&str; 19] = [
    "bug_id",
    "setting",
    "samples",
    "unique",
    "dedup_removed",
    "syntax_errors",
    "semantic_errors",
    "syntax_error_samples",
    "semantic_error_samples",
    "semantic_skipped",
    "validated",
    "test_fail",
    "timeouts",
    "plausible",
    "auto_correct",
    "needs_review",
    "unvalidated",
    "best_plausible_rank",
    "partial",
];

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum JsonLine<'a> {
    Run {
        partial: bool,
        config: &'a Option<serde_json::Value>,
        totals: &'a Totals,
    },
    Row(&'a BugRow),
    Setting(&'a SettingSummary),
    Entropy(&'a EntropyRow),
}

pub fn render(report: &RunReport, format: Format) -> Vec<u8> {
    match format {
        Format::HumanTable => render_table(report).into_bytes(),
        Format::Csv => {
            let rows: Vec<(&BugRow, bool)> =
                report.rows.iter().map(|row| (row, report.partial)).collect();
            csv_bytes(&rows, &ROW_COLUMNS)
        }
        Format::JsonLines => {
            let mut lines = vec![JsonLine::Run {
                partial: report.partial,
                config: &report.config,
                totals: &report.totals,
            }];
            lines.extend(report.rows.iter().map(JsonLine::Row));
            lines.extend(report.settings.iter().map(JsonLine::Setting));
            lines.extend(report.entropy.iter().map(JsonLine::Entropy));
            let mut out = Vec::new();
            for l in lines {
                serde_json::to_writer(&mut out, &l).expect("report serializes");
                out.push(b'\n');
            }
            out
        }
    }
}

pub fn render_curves(report: &RunReport) -> Vec<u8> {
    csv_bytes(&report.curves, &["setting", "strategy", "budget", "bugs_fixed"])
}

pub fn render_candidates(report: &RunReport) -> Vec<u8> {
    csv_bytes(
        &report.candidates,
        &[
            "bug_id",
            "setting",
            "sample_index",
            "duplicate_count",
            "template",
            "location",
            "status",
            "mean_entropy",
            "sum_entropy",
            "validation_rank",
            "correctness_score",
        ],
    )
}

/// Writes one report format into `dir`.
pub fn emit(report: &RunReport, format: Format, dir: &Path) -> Result<PathBuf, ArtifactError> {
    let path = dir.join(format.file_name());
    write_atomic(&path, &render(report, format))?;
    Ok(path)
}

/// Summarizes a run directory and writes every report file into it.
pub fn write_run_report(layout: &RunLayout) -> Result<RunReport, ArtifactError> {
    let report = summarize(&load_run(layout)?);
    for format in Format::ALL {
        emit(&report, format, layout.root())?;
    }
    write_atomic(&layout.root().join("curves.csv"), &render_curves(&report))?;
    write_atomic(&layout.root().join("candidates.csv"), &render_candidates(&report))?;
    write_json(&layout.throughput(), &report.throughput)?;
    Ok(report)
}
