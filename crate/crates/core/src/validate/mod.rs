//! Applying candidates to project copies and running their test suites.

pub mod sandbox;

use std::fmt;
use std::io;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use sandbox::{CommandRun, ExitKind, Workspace, WorkspacePool};

use crate::assemble::{CandidateStatus, PatchCandidate};
use crate::corpus::{Bug, SourceFile};
use crate::syntax::normalized_tokens;

#[derive(Debug, thiserror::Error)]
pub enum ValidateError {
    #[error("workspace I/O failed: {0}")]
    Io(#[from] io::Error),
    #[error("{id}: {path} no longer matches the loaded source")]
    SpanDrift { id: String, path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TestFail,
    Plausible,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::TestFail => "test_fail",
            Outcome::Plausible => "plausible",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correctness {
    AutoCorrect,
    NeedsReview,
    NotApplicable,
}

impl Correctness {
    pub fn as_str(self) -> &'static str {
        match self {
            Correctness::AutoCorrect => "auto_correct",
            Correctness::NeedsReview => "needs_review",
            Correctness::NotApplicable => "not_applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub bug_id: String,
    pub sample_index: usize,
    pub outcome: Outcome,
    pub correctness: Correctness,
    pub wall_time_seconds: f64,
    pub failing_tests: Vec<String>,
}

impl ValidationResult {
    pub fn is_well_formed(&self) -> bool {
        let plausible = self.outcome == Outcome::Plausible;
        (self.correctness == Correctness::NotApplicable) != plausible
            && (!plausible || self.failing_tests.is_empty())
    }

    /// Final candidate status implied by this result.
    pub fn status(&self) -> CandidateStatus {
        match (self.outcome, self.correctness) {
            (Outcome::Plausible, Correctness::AutoCorrect) => CandidateStatus::Correct,
            (Outcome::Plausible, _) => CandidateStatus::NeedsReview,
            _ => CandidateStatus::TestFail,
        }
    }
}

/// Everything recorded about one test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationLog {
    pub result: ValidationResult,
    pub run: CommandRun,
}

/// Writes `function` over the bug's function span in the workspace copy.
pub fn apply_function(ws: &Workspace, bug: &Bug, function: &str) -> Result<(), ValidateError> {
    let path = ws.root().join(bug.relative_source_path());
    let current = std::fs::read(&path)?;
    if current != bug.source.bytes() {
        return Err(ValidateError::SpanDrift {
            id: bug.id().to_string(),
            path,
        });
    }
    let file = SourceFile::from_bytes(current);
    let range = file
        .byte_range(bug.record.function_span)
        .expect("checked at load time");
    let bytes = file.bytes();
    let mut patched = Vec::with_capacity(bytes.len() + function.len());
    patched.extend_from_slice(&bytes[..range.start]);
    patched.extend_from_slice(function.as_bytes());
    patched.extend_from_slice(&bytes[range.end..]);
    std::fs::write(&path, patched)?;
    Ok(())
}

pub fn apply_patch(ws: &Workspace, bug: &Bug, candidate: &PatchCandidate) -> Result<(), ValidateError> {
    apply_function(ws, bug, &candidate.patched_function)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub outcome: Outcome,
    pub failing_tests: Vec<String>,
    pub run: CommandRun,
}

/// Runs the test command; exit status 0 means every test passed.
pub fn run_tests(ws: &Workspace, bug: &Bug) -> Result<TestRun, ValidateError> {
    let run = ws.run(
        &bug.record.test_command,
        Duration::from_secs(bug.record.timeout_seconds),
    )?;
    let outcome = match run.exit {
        ExitKind::TimedOut => Outcome::Timeout,
        e if e.success() => Outcome::Plausible,
        _ => Outcome::TestFail,
    };
    let failing_tests = if outcome == Outcome::Plausible {
        Vec::new()
    } else {
        failing_tests(&run.output)
    };
    Ok(TestRun {
        outcome,
        failing_tests,
        run,
    })
}

/// Test identifiers from `FAIL: x`, `ERROR: x` and `FAILED x` report lines.
pub fn failing_tests(output: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in output.lines() {
        let line = line.trim_start();
        let rest = ["FAIL: ", "ERROR: ", "FAILED "]
            .iter()
            .find_map(|p| line.strip_prefix(p));
        let Some(rest) = rest else { continue };
        let id = rest.split(" - ").next().unwrap_or(rest).trim();
        if !id.is_empty() && !out.iter().any(|t| t == id) {
            out.push(id.to_string());
        }
    }
    out
}

/// Token-level equality with the reference, ignoring comments and layout.
pub fn check_correctness(candidate: &PatchCandidate, bug: &Bug) -> Correctness {
    let lang = bug.language();
    if normalized_tokens(lang, &candidate.patched_function)
        == normalized_tokens(lang, &bug.record.reference_patch)
    {
        Correctness::AutoCorrect
    } else {
        Correctness::NeedsReview
    }
}

/// Resets the workspace, applies the candidate and runs the tests.
pub fn validate_candidate(
    ws: &mut Workspace,
    bug: &Bug,
    candidate: &PatchCandidate,
) -> Result<ValidationLog, ValidateError> {
    ws.reset()?;
    apply_patch(ws, bug, candidate)?;
    let test = run_tests(ws, bug)?;
    let correctness = match test.outcome {
        Outcome::Plausible => check_correctness(candidate, bug),
        _ => Correctness::NotApplicable,
    };
    Ok(ValidationLog {
        result: ValidationResult {
            bug_id: bug.id().to_string(),
            sample_index: candidate.sample_index,
            outcome: test.outcome,
            correctness,
            wall_time_seconds: test.run.wall_seconds,
            failing_tests: test.failing_tests,
        },
        run: test.run,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    ReferencePlausible,
    BuggyFails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityFailure {
    pub bug_id: String,
    pub gate: Gate,
    pub outcome: Outcome,
    pub output: String,
}

impl fmt::Display for SanityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gate {
            Gate::ReferencePlausible => write!(
                f,
                "{}: reference patch is not plausible ({})",
                self.bug_id,
                self.outcome.as_str()
            ),
            Gate::BuggyFails => write!(f, "{}: buggy function passes the tests", self.bug_id),
        }
    }
}

/// Checks that the reference passes and the original fails, for one bug.
pub fn sanity_check(ws: &mut Workspace, bug: &Bug) -> Result<Vec<SanityFailure>, ValidateError> {
    let mut failures = Vec::new();
    ws.reset()?;
    apply_function(ws, bug, &bug.record.reference_patch)?;
    let reference = run_tests(ws, bug)?;
    if reference.outcome != Outcome::Plausible {
        failures.push(SanityFailure {
            bug_id: bug.id().to_string(),
            gate: Gate::ReferencePlausible,
            outcome: reference.outcome,
            output: reference.run.output,
        });
    }
    ws.reset()?;
    let buggy = run_tests(ws, bug)?;
    if buggy.outcome == Outcome::Plausible {
        failures.push(SanityFailure {
            bug_id: bug.id().to_string(),
            gate: Gate::BuggyFails,
            outcome: buggy.outcome,
            output: buggy.run.output,
        });
    }
    Ok(failures)
}

/// Runs both gates for every bug, `parallelism` bugs at a time.
pub fn sanity_gates(bugs: &[Bug], parallelism: usize) -> Result<Vec<SanityFailure>, ValidateError> {
    let chunks: Vec<&[Bug]> = bugs.chunks(parallelism.max(1)).collect();
    let mut failures = Vec::new();
    for chunk in chunks {
        let results: Vec<Result<Vec<SanityFailure>, ValidateError>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|bug| {
                    s.spawn(move || {
                        let mut ws = Workspace::create(&bug.project_root)?;
                        sanity_check(&mut ws, bug)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sanity worker panicked"))
                .collect()
        });
        for r in results {
            failures.extend(r?);
        }
    }
    Ok(failures)
}
