//! Converts a directory of `{buggy file, fixed file, meta.json}` triples into
//! a benchmark manifest.
//!
//! Each immediate subdirectory of the input holding a `meta.json` is one bug.
//! Paths inside `meta.json` are relative to that subdirectory.

use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use serde::Deserialize;

use super::{BugRecord, FunctionPair, LineSpan, SourceFile, DEFAULT_TIMEOUT_SECONDS};
use crate::Language;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertMeta {
    pub id: String,
    pub language: Language,
    pub buggy_file: PathBuf,
    pub fixed_file: PathBuf,
    /// Span of the buggy function in `buggy_file`.
    pub function_span: LineSpan,
    #[serde(default)]
    pub project_root: Option<PathBuf>,
    #[serde(default)]
    pub project_example: Option<FunctionPair>,
    #[serde(default)]
    pub build_command: Option<String>,
    pub test_command: String,
    #[serde(default)]
    pub timeout_seconds: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConvertError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: invalid meta.json: {source}")]
    Meta {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("bug {id}: {reason}")]
    Bug { id: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ConvertError + '_ {
    move |source| ConvertError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Path of `target` expressed relative to directory `base`.
fn relative_to(target: &Path, base: &Path) -> PathBuf {
    let target: Vec<_> = target.components().collect();
    let base: Vec<_> = base.components().collect();
    let common = target
        .iter()
        .zip(&base)
        .take_while(|(a, b)| a == b)
        .count();
    if common == 0 {
        return target.iter().collect();
    }
    let mut out = PathBuf::new();
    for _ in common..base.len() {
        out.push(Component::ParentDir);
    }
    for c in &target[common..] {
        out.push(c);
    }
    out
}

/// Changed buggy-file line range and the line delta introduced by the fix.
///
/// The range runs from the first to the last line that differs once the
/// common leading and trailing lines are removed.
fn changed_region(buggy: &str, fixed: &str) -> Option<(LineSpan, isize)> {
    let old: Vec<&str> = buggy.split_inclusive('\n').collect();
    let new: Vec<&str> = fixed.split_inclusive('\n').collect();
    let prefix = old.iter().zip(&new).take_while(|(a, b)| a == b).count();
    let suffix = old[prefix..]
        .iter()
        .rev()
        .zip(new[prefix..].iter().rev())
        .take_while(|(a, b)| a == b)
        .count();
    let (old_end, new_end) = (old.len() - suffix, new.len() - suffix);
    if prefix == old_end && prefix == new_end {
        return None;
    }
    let delta = (new_end - prefix) as isize - (old_end - prefix) as isize;
    // 1-based lines; pure insertions anchor on the preceding line
    let span = if prefix == old_end {
        let at = prefix.max(1);
        LineSpan::new(at, at)
    } else {
        LineSpan::new(prefix + 1, old_end)
    };
    Some((span, delta))
}

fn convert_one(dir: &Path, out_dir: &Path) -> Result<BugRecord, ConvertError> {
    let meta_path = dir.join("meta.json");
    let raw = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: ConvertMeta = serde_json::from_str(&raw).map_err(|source| ConvertError::Meta {
        path: meta_path.clone(),
        source,
    })?;
    let bug_err = |reason: String| ConvertError::Bug {
        id: meta.id.clone(),
        reason,
    };
    let buggy_path = dir.join(&meta.buggy_file);
    let fixed_path = dir.join(&meta.fixed_file);
    let buggy = SourceFile::read(&buggy_path).map_err(io_err(&buggy_path))?;
    let fixed = SourceFile::read(&fixed_path).map_err(io_err(&fixed_path))?;

    let (hunk, delta) = changed_region(&buggy.full_text(), &fixed.full_text())
        .ok_or_else(|| bug_err("buggy and fixed files are identical".into()))?;
    let function = meta.function_span;
    if !function.is_well_formed() || function.end > buggy.line_count() {
        return Err(bug_err(format!("function span {function} out of bounds")));
    }
    if !function.contains(&hunk) {
        return Err(bug_err(format!(
            "fix touches lines {hunk} outside function {function}"
        )));
    }
    let fixed_end = function.end as isize + delta;
    if fixed_end < function.start as isize {
        return Err(bug_err("fix deletes the whole function".into()));
    }
    let reference_patch = fixed
        .text(LineSpan::new(function.start, fixed_end as usize))
        .ok_or_else(|| bug_err("fixed function span out of bounds".into()))?;

    let project_root = meta.project_root.as_ref().map(|r| dir.join(r));
    Ok(BugRecord {
        id: meta.id.clone(),
        language: meta.language,
        source_path: relative_to(&buggy_path, out_dir),
        project_root: project_root.map(|r| relative_to(&r, out_dir)),
        function_span: function,
        hunk_span: hunk,
        reference_patch,
        project_example: meta.project_example.clone(),
        build_command: meta.build_command.clone(),
        test_command: meta.test_command.clone(),
        timeout_seconds: meta.timeout_seconds.unwrap_or(DEFAULT_TIMEOUT_SECONDS),
    })
}

/// Converts every bug directory under `input` and writes the manifest to
/// `output`. Bug directories are processed in name order.
pub fn convert_directory(input: &Path, output: &Path) -> Result<Vec<BugRecord>, ConvertError> {
    let input = input.canonicalize().map_err(io_err(input))?;
    let out_dir = match output.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let out_dir = out_dir.canonicalize().map_err(io_err(&out_dir))?;

    let mut dirs: Vec<PathBuf> = fs::read_dir(&input)
        .map_err(io_err(&input))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join("meta.json").is_file())
        .collect();
    dirs.sort();

    let records = dirs
        .iter()
        .map(|d| convert_one(d, &out_dir))
        .collect::<Result<Vec<_>, _>>()?;

    let mut file = fs::File::create(output).map_err(io_err(output))?;
    for record in &records {
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(file, "{line}").map_err(io_err(output))?;
    }
    Ok(records)
}
