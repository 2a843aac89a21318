//! Acceptance suite. Runs every criterion in order and prints one PASS/FAIL
//! line per criterion. Criteria that cannot run because a toolchain is missing
//! are reported as FAIL with the reason and do not fail the process.
//!
//! Set `APR_BLESS=1` to rewrite the golden prompt fixtures.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use apr_core::artifacts::{read_jsonl, RunLayout, UnitId, ValidationEntry};
use apr_core::assemble::{assemble_infill, CandidateStatus, PatchCandidate, SampleKey};
use apr_core::corpus::{load_benchmark, Bug};
use apr_core::model::{FinishReason, GenerationResult, Token};
use apr_core::pipeline::{BackendConfig, Run, RunConfig};
use apr_core::prompt::{
    build_function_prompt, build_infill_prompt, build_single_line_prompt, examples_for,
    InfillStyle, RepairSetting, SingleLineMode,
};
use apr_core::rank::simulation::{simulate, SimulationParams};
use apr_core::rank::{
    budget_curve, entropy_report, first_correct_ranks, mean_entropy, sum_entropy,
    validation_order, RankingStrategy, StrategyKind,
};
use apr_core::report::RunReport;
use apr_core::templates::{generate_templates, TemplateKind, TEMPLATE_KEYWORDS};
use apr_core::Language;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    /// The environment lacks something the criterion needs.
    Blocked(String),
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Verdict::Fail(format!($($msg)+));
        }
    };
}

fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/mini")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/prompts")
}

fn has_tool(name: &str) -> bool {
    Command::new("sh")
        .arg("-c")
        .arg(format!("command -v {name}"))
        .output()
        .is_ok_and(|o| o.status.success())
}

fn toolchain(language: Language) -> Option<&'static str> {
    let tools: &[&'static str] = match language {
        Language::Python => &["python3"],
        Language::C => &["cc"],
        Language::Java => &["javac", "java"],
    };
    tools.iter().copied().find(|t| !has_tool(t))
}

fn mini_bugs() -> Vec<Bug> {
    load_benchmark(&mini().join("mini.jsonl")).expect("mini benchmark loads")
}

fn mock_config(benchmark: PathBuf, script: PathBuf) -> RunConfig {
    RunConfig {
        benchmark,
        backend: BackendConfig::Mock {
            script,
            call_delay_ms: 0,
            max_batch: 16,
        },
        parallel_validate: 4,
        ..RunConfig::default()
    }
}

fn gen(texts: &[&str], logprob: f64) -> GenerationResult {
    GenerationResult::from_tokens(
        texts
            .iter()
            .map(|t| Token {
                text: t.to_string(),
                logprob,
            })
            .collect(),
        FinishReason::Stop,
    )
}

// 1

const ENTROPY_ORACLE: &str = r#"
import json, sys
from fractions import Fraction
seqs = json.load(open(sys.argv[1]))
out = []
for seq in seqs:
    total = -sum(Fraction(x) for x in seq)
    out.append([float(total / len(seq)), float(total)])
json.dump(out, open(sys.argv[2], "w"))
"#;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE)
}

fn entropy_oracle() -> Verdict {
    if let Some(tool) = toolchain(Language::Python) {
        return Verdict::Blocked(format!("{tool} not found for the oracle script"));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xe47);
    let seqs: Vec<Vec<f64>> = (0..1000)
        .map(|_| {
            let n = rng.random_range(1..=512);
            (0..n).map(|_| -20.0 * rng.random::<f64>()).collect()
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let (script, input, output) = (
        dir.path().join("oracle.py"),
        dir.path().join("in.json"),
        dir.path().join("out.json"),
    );
    fs::write(&script, ENTROPY_ORACLE).unwrap();
    fs::write(&input, serde_json::to_vec(&seqs).unwrap()).unwrap();
    let status = Command::new("python3")
        .arg(&script)
        .arg(&input)
        .arg(&output)
        .status()
        .unwrap();
    ensure!(status.success(), "oracle script failed: {status}");
    let expected: Vec<(f64, f64)> = serde_json::from_slice(&fs::read(&output).unwrap()).unwrap();
    let mut worst = 0.0f64;
    for (seq, (want_mean, want_sum)) in seqs.iter().zip(&expected) {
        let g = GenerationResult::from_tokens(
            seq.iter()
                .map(|&logprob| Token {
                    text: "t".into(),
                    logprob,
                })
                .collect(),
            FinishReason::Stop,
        );
        let mean = mean_entropy(&g).unwrap();
        let sum = sum_entropy(&g).unwrap();
        ensure!(close(mean, *want_mean), "mean {mean} != oracle {want_mean} (n={})", seq.len());
        ensure!(close(sum, *want_sum), "sum {sum} != oracle {want_sum} (n={})", seq.len());
        ensure!(close(mean * seq.len() as f64, sum), "mean x n != sum for n={}", seq.len());
        worst = worst.max((sum - want_sum).abs() / want_sum.abs());
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Verdict::Pass(format!(
        "1000 sequences, worst relative error {worst:.1e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// 2

fn identity_splice() -> Verdict {
    let bugs = mini_bugs();
    let mut languages = HashSet::new();
    for bug in &bugs {
        languages.insert(bug.language());
        let slices = bug.slices().unwrap();
        ensure!(
            slices.reassemble() == bug.original_function(),
            "{}: prefix + hunk + suffix differs from the function",
            bug.id()
        );
        let key = SampleKey {
            bug_id: bug.id().into(),
            setting: RepairSetting::Infill,
            sample_index: 0,
        };
        let cand = assemble_infill(key, &slices, gen(&[&slices.buggy_hunk], -0.1));
        ensure!(
            cand.patched_function == bug.original_function(),
            "{}: assemble_infill with the buggy hunk differs",
            bug.id()
        );
    }
    ensure!(bugs.len() >= 15 && languages.len() == 3, "only {} bugs", bugs.len());
    Verdict::Pass(format!("{} bugs across {} languages", bugs.len(), languages.len()))
}

// 3

fn render_prompts(bug: &Bug) -> Vec<(RepairSetting, String)> {
    let slices = bug.slices().unwrap();
    let lang = bug.language();
    let style = InfillStyle::Marker;
    vec![
        (
            RepairSetting::CompleteFunction,
            build_function_prompt(&slices, &examples_for(bug), lang).unwrap().text,
        ),
        (RepairSetting::Infill, build_infill_prompt(&slices, lang, style).text),
        (
            RepairSetting::SingleLineInfill,
            build_single_line_prompt(&slices, SingleLineMode::Infill, lang, style)
                .unwrap()
                .text,
        ),
        (
            RepairSetting::SingleLineGenerative,
            build_single_line_prompt(&slices, SingleLineMode::Generative, lang, style)
                .unwrap()
                .text,
        ),
    ]
}

fn golden_prompts() -> Verdict {
    let bless = std::env::var_os("APR_BLESS").is_some();
    let bugs = mini_bugs();
    let mut checked = 0;
    for bug in bugs.iter().filter(|b| b.id().ends_with("-gcd")) {
        let lang = bug.language();
        let slices = bug.slices().unwrap();
        for (setting, text) in render_prompts(bug) {
            let path = fixtures().join(format!("{setting}_{lang}.txt"));
            if bless {
                fs::create_dir_all(fixtures()).unwrap();
                fs::write(&path, &text).unwrap();
            }
            let Ok(want) = fs::read_to_string(&path) else {
                return Verdict::Fail(format!("missing fixture {}", path.display()));
            };
            ensure!(text == want, "{} differs from the rendered prompt", path.display());
            match setting {
                RepairSetting::CompleteFunction => {
                    let task = format!("{} Provide a fix for the buggy function", lang.comment_prefix());
                    ensure!(text.starts_with(&task), "{lang}: prompt does not open with `{task}`");
                }
                RepairSetting::Infill | RepairSetting::SingleLineInfill => {
                    let want = format!("{}<INFILL>{}", slices.prefix, slices.suffix);
                    ensure!(text == want, "{lang}: marker is not in place of the hunk");
                    let at = text.find("<INFILL>").unwrap();
                    ensure!(text[..at].ends_with('\n'), "{lang}: marker does not start a line");
                }
                RepairSetting::SingleLineGenerative => {
                    ensure!(text == slices.prefix, "{lang}: generative prompt is not the prefix");
                }
            }
            checked += 1;
        }
    }
    ensure!(checked == 12, "checked {checked} fixtures, expected 12");
    Verdict::Pass(format!(
        "{checked} fixtures (4 settings x 3 languages){}",
        if bless { ", rewritten" } else { "" }
    ))
}

// 4 and 10

struct PipelineRuns {
    first: PathBuf,
    second: PathBuf,
    _dir: tempfile::TempDir,
}

fn report_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    ["report.txt", "report.csv", "report.jsonl", "curves.csv", "candidates.csv"]
        .iter()
        .map(|f| (f.to_string(), fs::read(dir.join(f)).unwrap_or_default()))
        .collect()
}

fn check_report(report: &RunReport, bugs: &[Bug]) -> Result<(), String> {
    for bug in bugs {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.bug_id == bug.id()).collect();
        if rows.is_empty() {
            return Err(format!("{} has no report rows", bug.id()));
        }
        if !rows.iter().any(|r| r.auto_correct >= 1) {
            return Err(format!("{} has no auto-correct patch", bug.id()));
        }
    }
    if let Some(r) = report.rows.iter().find(|r| !r.is_monotone()) {
        return Err(format!("{} ({:?}) breaks monotone inclusion", r.bug_id, r.setting));
    }
    if report.partial {
        return Err("report is marked partial".into());
    }
    Ok(())
}

fn pipeline_end_to_end(runs: &mut Option<PipelineRuns>) -> Verdict {
    let all = mini_bugs();
    let missing: Vec<String> = [Language::Python, Language::C, Language::Java]
        .into_iter()
        .filter_map(|l| toolchain(l).map(|t| format!("{l} ({t} not found)")))
        .collect();
    let runnable: Vec<Bug> = all
        .into_iter()
        .filter(|b| toolchain(b.language()).is_none())
        .collect();
    if runnable.is_empty() {
        return Verdict::Blocked(format!("no toolchain available: {}", missing.join(", ")));
    }
    let manifest = if missing.is_empty() {
        mini().join("mini.jsonl")
    } else {
        mini().join("python_c.jsonl")
    };
    let dir = tempfile::tempdir().unwrap();
    let config = mock_config(manifest, mini().join("mock.jsonl"));
    let started = Instant::now();
    let first = dir.path().join("first");
    let report = match Run::create(&first, config.clone()).and_then(|r| r.run()) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("run failed: {e}")),
    };
    let elapsed = started.elapsed();
    let sanity = fs::read_to_string(first.join("sanity.json")).unwrap_or_default();
    ensure!(sanity.trim() == "[]", "sanity gates recorded failures: {sanity}");
    let bugs: Vec<Bug> = load_benchmark(&config.benchmark).unwrap();
    if let Err(e) = check_report(&report, &bugs) {
        return Verdict::Fail(e);
    }
    let second = dir.path().join("second");
    Run::create(&second, config.clone()).and_then(|r| r.run()).unwrap();
    ensure!(
        report_files(&first) == report_files(&second),
        "report files differ between identical runs"
    );
    let before = report_files(&first);
    Run::open(&first).and_then(|r| r.run()).unwrap();
    ensure!(before == report_files(&first), "resumed run changed the report");
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    let detail = format!(
        "{} bugs x {} settings, {} rows, sanity gates passed, every bug auto-correct, monotone, report identical on re-run and resume, {:.1}s",
        bugs.len(),
        config.settings.len(),
        report.rows.len(),
        elapsed.as_secs_f64()
    );
    *runs = Some(PipelineRuns {
        first,
        second,
        _dir: dir,
    });
    if missing.is_empty() {
        Verdict::Pass(detail)
    } else {
        Verdict::Blocked(format!(
            "the full benchmark needs {}; runnable subset passed: {detail}",
            missing.join(", ")
        ))
    }
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(root).unwrap().to_path_buf();
            if rel == Path::new("logs") {
                continue;
            }
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn determinism(runs: &Option<PipelineRuns>) -> Verdict {
    let Some(runs) = runs else {
        return Verdict::Fail("no pipeline runs to compare".into());
    };
    let (a, b) = (tree(&runs.first), tree(&runs.second));
    ensure!(!a.is_empty(), "empty run directory");
    let differing: Vec<_> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .collect();
    ensure!(differing.is_empty(), "{} files differ, first {:?}", differing.len(), differing[0]);
    let logs = runs.first.join("logs");
    ensure!(logs.join("throughput.json").exists(), "no timing logs under logs/");
    Verdict::Pass(format!("{} artifact files identical outside logs/", a.len()))
}

// 5 and 6

fn ranking_effectiveness() -> Verdict {
    let started = Instant::now();
    let params = SimulationParams::default();
    let budgets: Vec<usize> = (1..=params.candidates_per_bug).collect();
    let mut dominated = 0;
    let (mut sum_ranks, mut random_ranks) = (Vec::new(), Vec::new());
    for seed in 0..100u64 {
        let sim = simulate(seed, &params);
        let oracle = sim.oracle();
        let order = |kind: StrategyKind| -> Vec<(String, Vec<usize>)> {
            sim.bugs
                .iter()
                .map(|b| {
                    let strategy = RankingStrategy::new(kind, seed).keyed(&b.id);
                    (b.id.clone(), validation_order(&b.candidates, strategy))
                })
                .collect()
        };
        let (by_sum, by_random) = (order(StrategyKind::SumEntropy), order(StrategyKind::Random));
        let sum_curve = budget_curve(&by_sum, &oracle, &budgets).unwrap();
        let random_curve = budget_curve(&by_random, &oracle, &budgets).unwrap();
        if sum_curve.iter().zip(&random_curve).all(|(s, r)| s.1 >= r.1) {
            dominated += 1;
        }
        sum_ranks.extend(first_correct_ranks(&by_sum, &oracle));
        random_ranks.extend(first_correct_ranks(&by_random, &oracle));
    }
    let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
    let (s, r) = (mean(&sum_ranks), mean(&random_ranks));
    let elapsed = started.elapsed();
    ensure!(dominated >= 95, "sum entropy dominates random in only {dominated}/100 seeds");
    ensure!(s < r, "expected first-correct rank {s:.2} (sum) is not below {r:.2} (random)");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Verdict::Pass(format!(
        "dominates in {dominated}/100 seeds, expected first-correct rank {s:.2} vs {r:.2}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn tally_group(status: CandidateStatus) -> &'static str {
    match status {
        CandidateStatus::Correct => "C",
        CandidateStatus::Plausible | CandidateStatus::NeedsReview => "P",
        _ => "NP",
    }
}

fn entropy_separation() -> Verdict {
    let params = SimulationParams::default();
    for seed in 0..100u64 {
        let candidates: Vec<PatchCandidate> = simulate(seed, &params).all_candidates();
        let mut tally: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
        for c in &candidates {
            let lps: Vec<f64> = c.generated.tokens.iter().map(|t| t.logprob).collect();
            let total: f64 = -lps.iter().sum::<f64>();
            let e = tally.entry(tally_group(c.status)).or_default();
            e.0 += 1;
            e.1 += total / lps.len() as f64;
            e.2 += total;
        }
        let table = entropy_report(&candidates);
        ensure!(table.len() == tally.len(), "seed {seed}: group sets differ");
        for (group, g) in &table {
            let Some(&(n, mean_acc, sum_acc)) = tally.get(group.as_str()) else {
                return Verdict::Fail(format!("seed {seed}: unexpected group {}", group.as_str()));
            };
            let (mean, sum) = (mean_acc / n as f64, sum_acc / n as f64);
            ensure!(g.count == n, "seed {seed}: {} count {} != {n}", group.as_str(), g.count);
            ensure!(
                (g.mean_entropy - mean).abs() <= 1e-9 * mean && (g.sum_entropy - sum).abs() <= 1e-9 * sum,
                "seed {seed}: {} entropies disagree with the tally",
                group.as_str()
            );
        }
        let (c, np) = (tally["C"], tally["NP"]);
        ensure!((c.1 / c.0 as f64) < np.1 / np.0 as f64, "seed {seed}: mean entropy C >= NP");
        ensure!((c.2 / c.0 as f64) < np.2 / np.0 as f64, "seed {seed}: sum entropy C >= NP");
    }
    Verdict::Pass("C < NP for mean and sum entropy in 100/100 seeds; tables match the tally".into())
}

// 7 and 9

/// A one-bug manifest for `python-gcd` with absolute paths, plus its rule
/// from the bundled mock script.
fn gcd_fixture(dir: &Path) -> (PathBuf, serde_json::Value) {
    let record = fs::read_to_string(mini().join("python.jsonl"))
        .unwrap()
        .lines()
        .find(|l| l.contains("\"python-gcd\""))
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .unwrap();
    let mut record = record;
    let base = mini().canonicalize().unwrap();
    for key in ["source_path", "project_root"] {
        let rel = record[key].as_str().unwrap().to_string();
        record[key] = base.join(rel).to_string_lossy().into_owned().into();
    }
    let manifest = dir.join("gcd.jsonl");
    fs::write(&manifest, format!("{record}\n")).unwrap();
    let rule = fs::read_to_string(mini().join("mock.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|r| {
            let m = r["match"].to_string();
            m.contains("<INFILL>") && m.contains("def gcd(")
        })
        .unwrap();
    (manifest, rule)
}

fn error_rates() -> Verdict {
    if let Some(tool) = toolchain(Language::Python) {
        return Verdict::Blocked(format!("{tool} not found"));
    }
    let dir = tempfile::tempdir().unwrap();
    let (manifest, mut rule) = gcd_fixture(dir.path());
    // Bundled order: correct, syntax-broken, build-broken, plausible.
    let r = rule["responses"].as_array().unwrap().clone();
    let (correct, syntax, semantic, plausible) = (&r[0], &r[1], &r[2], &r[3]);
    rule["responses"] = serde_json::json!([
        syntax, syntax, semantic, correct, correct, correct, plausible, plausible, plausible, correct
    ]);
    let script = dir.path().join("mock.jsonl");
    fs::write(&script, format!("{rule}\n")).unwrap();
    let config = RunConfig {
        settings: vec![RepairSetting::Infill],
        ..mock_config(manifest, script)
    };
    let run_dir = dir.path().join("run");
    let report = match Run::create(&run_dir, config).and_then(|r| r.run()) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("run failed: {e}")),
    };
    let s = &report.settings[0];
    ensure!(s.samples == 200, "{} samples", s.samples);
    ensure!(
        s.syntactic_rate == Some(0.20) && s.semantic_rate == Some(0.10),
        "rates {:?} / {:?}",
        s.syntactic_rate,
        s.semantic_rate
    );
    let layout = RunLayout::new(&run_dir);
    let unit = UnitId {
        bug_id: "python-gcd".into(),
        setting: RepairSetting::Infill,
    };
    let filtered: Vec<PatchCandidate> = read_jsonl(&layout.filtered(&unit)).unwrap();
    let validated: Vec<ValidationEntry> = read_jsonl(&layout.validation(&unit)).unwrap();
    let excluded: HashSet<usize> = filtered
        .iter()
        .filter(|c| c.status.is_filtered_out())
        .map(|c| c.sample_index)
        .collect();
    ensure!(excluded.len() == 2, "{} distinct broken candidates", excluded.len());
    ensure!(
        validated.iter().all(|e| !excluded.contains(&e.sample_index)),
        "a filtered candidate was validated"
    );
    ensure!(validated.len() == filtered.len() - 2, "{} validated", validated.len());
    Verdict::Pass(format!(
        "200 samples, 40 syntax-broken, 20 build-broken: rates (0.20, 0.10), {} distinct survivors validated",
        validated.len()
    ))
}

fn throughput() -> Verdict {
    if let Some(tool) = toolchain(Language::Python) {
        return Verdict::Blocked(format!("{tool} not found for the sanity gates"));
    }
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = gcd_fixture(dir.path());
    let delay_ms = 80;
    let config = RunConfig {
        settings: vec![RepairSetting::Infill, RepairSetting::SingleLineInfill],
        backend: BackendConfig::Mock {
            script: mini().join("mock.jsonl"),
            call_delay_ms: delay_ms,
            max_batch: 8,
        },
        ..mock_config(manifest, PathBuf::new())
    };
    let run = Run::create(&dir.path().join("run"), config).unwrap();
    run.sanity().unwrap();
    let started = Instant::now();
    run.generate_all().unwrap();
    let stopwatch = started.elapsed().as_secs_f64();
    let report = run.report().unwrap();
    let total = report.throughput.iter().find(|t| t.setting.is_none()).unwrap();
    let Some(ppm) = total.patches_per_minute else {
        return Verdict::Fail("no patches/minute reported".into());
    };
    let calls = 2 * 200usize.div_ceil(8);
    let recorded = total.samples as f64 / (total.generation_seconds / 60.0);
    let external = total.samples as f64 / (stopwatch / 60.0);
    ensure!(total.samples == 400, "{} samples", total.samples);
    ensure!((ppm - recorded).abs() <= 1e-9 * recorded, "ppm {ppm} != samples / recorded time {recorded}");
    ensure!(
        (ppm - external).abs() <= 0.01 * external,
        "ppm {ppm:.1} vs stopwatch {external:.1}"
    );
    ensure!(
        total.generation_seconds >= calls as f64 * delay_ms as f64 / 1000.0,
        "recorded {:.3}s is below the injected delay",
        total.generation_seconds
    );
    Verdict::Pass(format!(
        "{:.1} patches/minute over {:.3}s recorded ({calls} calls x {delay_ms}ms injected), stopwatch {:.1}, deviation {:.2}%",
        ppm,
        total.generation_seconds,
        external,
        100.0 * (ppm - external).abs() / external
    ))
}

// 8

fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn template_coverage() -> Verdict {
    let cases = [
        (Language::Java, "        ok = items.get(i) > limit && count < max;\n"),
        (Language::Python, "    ok = items.get(i) > limit and count < top\n"),
        (Language::C, "    ok = lookup(items, i) > limit && count < max;\n"),
    ];
    let kinds = [
        TemplateKind::KeepPrefixFragment,
        TemplateKind::KeepSuffixFragment,
        TemplateKind::ReplaceCall,
        TemplateKind::ReplaceArguments,
        TemplateKind::MutateOperator,
        TemplateKind::AddCondition,
    ];
    let mut total = 0;
    for (lang, line) in cases {
        let templates = generate_templates(line, lang);
        ensure!(templates == generate_templates(line, lang), "{lang}: not deterministic");
        ensure!(
            templates.first().map(|t| t.kind) == Some(TemplateKind::Identity),
            "{lang}: identity is not first"
        );
        for kind in kinds {
            ensure!(templates.iter().any(|t| t.kind == kind), "{lang}: no {kind} template");
        }
        let allowed: HashSet<String> = tokens(line)
            .into_iter()
            .chain(TEMPLATE_KEYWORDS.iter().flat_map(|k| tokens(k)))
            .collect();
        let body = line.trim_end_matches(['\n', '\r']);
        for t in &templates {
            let kept = format!("{}{}", t.rendered_prefix_extension, t.rendered_suffix_extension);
            if let Some(tok) = tokens(&kept).into_iter().find(|tok| !allowed.contains(tok)) {
                return Verdict::Fail(format!("{lang}: {} introduces `{tok}`", t.kind));
            }
            if !matches!(t.kind, TemplateKind::Identity | TemplateKind::AddCondition) {
                let r = t.origin_tokens.clone();
                ensure!(
                    t.rendered_prefix_extension == body[..r.start]
                        && t.rendered_suffix_extension.trim_end_matches(['\n', '\r']) == &body[r.end..],
                    "{lang}: {} does not keep the line around its mask",
                    t.kind
                );
            }
        }
        total += templates.len();
    }
    Verdict::Pass(format!(
        "all six kinds in Java, Python and C ({total} templates), identity first, tokens traceable, deterministic"
    ))
}

fn main() {
    let mut runs = None;
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Verdict + '_>)> = vec![
        ("entropy oracle equivalence", Box::new(entropy_oracle)),
        ("identity splice", Box::new(identity_splice)),
        ("golden prompts", Box::new(golden_prompts)),
        ("pipeline end-to-end with scripted mock", Box::new(|| pipeline_end_to_end(&mut runs))),
        ("ranking effectiveness", Box::new(ranking_effectiveness)),
        ("entropy separation", Box::new(entropy_separation)),
        ("error-rate accounting", Box::new(error_rates)),
        ("template coverage", Box::new(template_coverage)),
        ("throughput accounting", Box::new(throughput)),
    ];
    let mut verdicts: Vec<(&str, Verdict)> = criteria
        .into_iter()
        .map(|(name, check)| {
            let verdict = catch_unwind(AssertUnwindSafe(check))
                .unwrap_or_else(|e| Verdict::Fail(format!("panicked: {}", panic_message(&e))));
            (name, verdict)
        })
        .collect();
    verdicts.push(("determinism", determinism(&runs)));

    let mut failed = 0;
    let mut blocked = 0;
    for (i, (name, verdict)) in verdicts.iter().enumerate() {
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d.clone()),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d.clone())
            }
            Verdict::Blocked(d) => {
                blocked += 1;
                ("FAIL", format!("environment: {d}"))
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    println!(
        "acceptance: {} passed, {failed} failed, {blocked} blocked by the environment",
        verdicts.len() - failed - blocked
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}
