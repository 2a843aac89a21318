use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use apr_core::artifacts::{read_jsonl, ValidationEntry};
use apr_core::assemble::{PatchCandidate, SampleKey};
use apr_core::model::{FinishReason, GenerationResult, Token};
use apr_core::pipeline::Run;
use apr_core::prompt::RepairSetting;
use apr_core::rank::score_entropies;

fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../benchmarks/mini")
        .canonicalize()
        .unwrap()
}

fn repair(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repair"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// One `python-gcd` record with absolute paths, optionally rewritten.
fn gcd_manifest(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut record: serde_json::Value = fs::read_to_string(mini().join("python.jsonl"))
        .unwrap()
        .lines()
        .find(|l| l.contains("\"python-gcd\""))
        .map(|l| serde_json::from_str(l).unwrap())
        .unwrap();
    for key in ["source_path", "project_root"] {
        let rel = record[key].as_str().unwrap().to_string();
        record[key] = mini().join(rel).to_string_lossy().into_owned().into();
    }
    edit(&mut record);
    let path = dir.join("gcd.jsonl");
    fs::write(&path, format!("{record}\n")).unwrap();
    path
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(root).unwrap().to_path_buf();
            if rel.starts_with("logs") {
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

fn mock_args<'a>(benchmark: &'a str, samples: &'a str) -> Vec<&'a str> {
    vec![
        "--benchmark",
        benchmark,
        "--backend",
        "mock",
        "--samples",
        samples,
        "--settings",
        "complete_function,infill",
    ]
}

#[test]
fn invalid_configuration_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let out = repair(
        &["run", "--backend", "mock", "--samples", "0", "--top-p", "2"],
        dir.path(),
    );
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let err = stderr(&out);
    for needle in ["benchmark", "num_samples", "top_p"] {
        assert!(err.contains(needle), "missing {needle:?} in {err}");
    }
}

#[test]
fn failing_reference_fix_stops_the_run_at_the_sanity_gate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gcd_manifest(dir.path(), |r| {
        r["reference_patch"] = "def gcd(a, b):\n    while b > 0:\n        a, b = b, a - b\n    return a\n".into();
    });
    let script = mini().join("mock.jsonl");
    let out = repair(
        &[
            "run",
            "--benchmark",
            manifest.to_str().unwrap(),
            "--backend",
            "mock",
            "--mock-script",
            script.to_str().unwrap(),
            "--run-dir",
            "r",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("python-gcd"));
    assert!(!dir.path().join("r/report.txt").exists());
}

#[test]
fn unreachable_endpoint_is_a_backend_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gcd_manifest(dir.path(), |_| {});
    let out = repair(
        &[
            "generate",
            "--benchmark",
            manifest.to_str().unwrap(),
            "--backend",
            "http",
            "--endpoint",
            "http://127.0.0.1:1/v1/completions",
            "--samples",
            "2",
            "--settings",
            "infill",
            "--run-dir",
            "r",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn sanity_passes_on_the_bundled_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = mini().join("python_c.jsonl");
    let out = repair(&["sanity", "--benchmark", manifest.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("passed"));
}

fn ranked(dir: &Path, file: &Path, strategy: &str) -> Vec<usize> {
    let out = repair(
        &["rank", "--candidates", file.to_str().unwrap(), "--strategy", strategy],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| l.split('\t').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn mean_and_sum_entropy_disagree_on_length() {
    let dir = tempfile::tempdir().unwrap();
    let make = |index: usize, n: usize, logprob: f64| {
        let tokens = (0..n)
            .map(|_| Token {
                text: "x".into(),
                logprob,
            })
            .collect();
        let mut c = PatchCandidate::new(
            SampleKey {
                bug_id: "b".into(),
                setting: RepairSetting::CompleteFunction,
                sample_index: index,
            },
            GenerationResult::from_tokens(tokens, FinishReason::Stop),
            "x".repeat(n),
        );
        score_entropies(&mut c);
        serde_json::to_string(&c).unwrap()
    };
    // short and unsure: sum 2.0, mean 1.0; long and sure: sum 3.0, mean 0.3
    let file = dir.path().join("candidates.jsonl");
    fs::write(&file, format!("{}\n{}\n", make(0, 2, -1.0), make(1, 10, -0.3))).unwrap();
    assert_eq!(ranked(dir.path(), &file, "sum_entropy"), vec![0, 1]);
    assert_eq!(ranked(dir.path(), &file, "mean_entropy"), vec![1, 0]);
}

#[test]
fn staged_commands_match_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = mini().join("python.jsonl");
    let bench = manifest.to_str().unwrap();

    let mut args = vec!["run"];
    args.extend(mock_args(bench, "6"));
    args.extend(["--run-dir", "whole"]);
    let out = repair(&args, dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let mut args = vec!["generate"];
    args.extend(mock_args(bench, "6"));
    args.extend(["--run-dir", "staged"]);
    assert_eq!(code(&repair(&args, dir.path())), 0);
    for stage in ["validate", "report"] {
        let out = repair(&[stage, "--run-dir", "staged"], dir.path());
        assert_eq!(code(&out), 0, "{stage}: {}", stderr(&out));
    }
    let whole = tree(&dir.path().join("whole"));
    assert!(whole.keys().any(|k| k.ends_with("report.csv")));
    assert_eq!(whole, tree(&dir.path().join("staged")));
}

#[test]
fn resume_does_not_sample_again() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.jsonl");
    fs::copy(mini().join("mock.jsonl"), &script).unwrap();
    let manifest = mini().join("python.jsonl");
    let mut args = vec!["generate"];
    args.extend(mock_args(manifest.to_str().unwrap(), "4"));
    args.extend(["--mock-script", script.to_str().unwrap(), "--run-dir", "runs/r1"]);
    assert_eq!(code(&repair(&args, dir.path())), 0);
    let before = tree(&dir.path().join("runs/r1"));

    // any sampling now would fail to load the script
    fs::remove_file(&script).unwrap();
    let out = repair(&["run", "--resume", "r1"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let after = tree(&dir.path().join("runs/r1"));
    for (path, bytes) in &before {
        assert_eq!(after.get(path), Some(bytes), "{} changed", path.display());
    }
    assert!(after.len() > before.len());
}

#[test]
fn budget_caps_validations() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = mini().join("python.jsonl");
    let mut args = vec!["run"];
    args.extend(mock_args(manifest.to_str().unwrap(), "10"));
    args.extend(["--budget", "2", "--run-dir", "r"]);
    let out = repair(&args, dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let run = Run::open(&dir.path().join("r")).unwrap();
    let plan = run.plan().unwrap();
    assert!(!plan.units.is_empty());
    for unit in &plan.units {
        let alive = read_jsonl::<PatchCandidate>(&run.layout().filtered(unit))
            .unwrap()
            .iter()
            .filter(|c| !c.status.is_filtered_out())
            .count();
        let validated: Vec<ValidationEntry> = read_jsonl(&run.layout().validation(unit)).unwrap();
        assert_eq!(validated.len(), alive.min(2), "{} {}", unit.bug_id, unit.setting);
    }
}
