//! Syntax and build checks ahead of test validation.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::assemble::{CandidateStatus, PatchCandidate};
use crate::corpus::Bug;
use crate::syntax::check_function;
use crate::validate::{apply_patch, CommandRun, ValidateError, Workspace, WorkspacePool};
use crate::Language;

/// Parses the patched function; marks it `syntax_error` on failure.
pub fn check_syntax(candidate: &mut PatchCandidate, language: Language) -> bool {
    if candidate.status != CandidateStatus::Assembled {
        return !candidate.status.is_filtered_out();
    }
    match check_function(language, &candidate.patched_function) {
        Ok(()) => true,
        Err(_) => {
            candidate.status = CandidateStatus::SyntaxError;
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum SemanticCheck {
    Pass { build: CommandRun },
    Failed { build: CommandRun },
    /// The record has no build command.
    Skipped,
}

/// Builds the project with the candidate applied; marks it
/// `semantic_error` when the build fails or times out.
pub fn check_semantics(
    candidate: &mut PatchCandidate,
    bug: &Bug,
    ws: &mut Workspace,
) -> Result<SemanticCheck, ValidateError> {
    let Some(command) = &bug.record.build_command else {
        return Ok(SemanticCheck::Skipped);
    };
    ws.reset()?;
    apply_patch(ws, bug, candidate)?;
    let build = ws.run(command, Duration::from_secs(bug.record.timeout_seconds))?;
    if build.exit.success() {
        Ok(SemanticCheck::Pass { build })
    } else {
        candidate.status = CandidateStatus::SemanticError;
        Ok(SemanticCheck::Failed { build })
    }
}

/// Syntax-checks every candidate, then builds the survivors on a pool of
/// `parallelism` workspaces. Returns the semantic check of each candidate
/// in input order (`None` for syntax failures).
pub fn filter_candidates(
    candidates: &mut [PatchCandidate],
    bug: &Bug,
    parallelism: usize,
) -> Result<Vec<Option<SemanticCheck>>, ValidateError> {
    let language = bug.language();
    let passed: Vec<usize> = (0..candidates.len())
        .filter(|&i| check_syntax(&mut candidates[i], language))
        .collect();
    let mut checks: Vec<Option<SemanticCheck>> = vec![None; candidates.len()];
    if bug.record.build_command.is_none() {
        for &i in &passed {
            checks[i] = Some(SemanticCheck::Skipped);
        }
        return Ok(checks);
    }
    let work: Vec<PatchCandidate> = passed.iter().map(|&i| candidates[i].clone()).collect();
    let pool = WorkspacePool::new(&bug.project_root, parallelism);
    let results = pool.map(&work, |ws, c| {
        let mut c = c.clone();
        let check = check_semantics(&mut c, bug, ws)?;
        Ok::<_, ValidateError>((c.status, check))
    })?;
    for (&i, (status, check)) in passed.iter().zip(results) {
        candidates[i].status = status;
        checks[i] = Some(check);
    }
    Ok(checks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub syntactic: f64,
    pub semantic: f64,
}

/// Fractions of all assembled samples that failed to parse and that parsed
/// but failed to build. Each candidate counts once per duplicate it stands
/// for. `None` for an empty list.
pub fn error_rates(candidates: &[PatchCandidate]) -> Option<ErrorRates> {
    let total: usize = candidates.iter().map(|c| c.duplicate_count).sum();
    if total == 0 {
        return None;
    }
    let count = |s: CandidateStatus| -> usize {
        candidates
            .iter()
            .filter(|c| c.status == s)
            .map(|c| c.duplicate_count)
            .sum()
    };
    Some(ErrorRates {
        syntactic: count(CandidateStatus::SyntaxError) as f64 / total as f64,
        semantic: count(CandidateStatus::SemanticError) as f64 / total as f64,
    })
}
