//! Benchmark ingestion: bug records, source files and context slicing.
//!
//! A benchmark is a JSON-lines manifest, one [`BugRecord`] per line. Paths in
//! a record are resolved relative to the manifest's directory. Loading
//! validates every record and reports all problems at once.

mod convert;
mod diff;

use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::syntax;
use crate::Language;

pub use convert::{convert_directory, ConvertError, ConvertMeta};
pub use diff::{enumerate_locations, parse_unified_diff, reference_diff, DiffHunk};

pub const DEFAULT_TIMEOUT_SECONDS: u64 = 300;

/// 1-based inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl LineSpan {
    pub fn new(start: usize, end: usize) -> Self {
        LineSpan { start, end }
    }

    pub fn single(line: usize) -> Self {
        LineSpan { start: line, end: line }
    }

    pub fn is_well_formed(&self) -> bool {
        self.start >= 1 && self.start <= self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn contains(&self, other: &LineSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for LineSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// A (buggy, fixed) function pair from the same project as a bug.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionPair {
    pub buggy: String,
    pub fixed: String,
}

/// One line of the benchmark manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BugRecord {
    pub id: String,
    pub language: Language,
    pub source_path: PathBuf,
    /// Directory copied into each validation workspace. Defaults to the
    /// directory holding `source_path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project_root: Option<PathBuf>,
    pub function_span: LineSpan,
    pub hunk_span: LineSpan,
    pub reference_patch: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project_example: Option<FunctionPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_command: Option<String>,
    pub test_command: String,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECONDS
}

/// Raw bytes of a source file plus a lossy UTF-8 view split into lines.
///
/// Line terminators are kept on each line, so concatenating lines gives the
/// file back byte for byte when it is valid UTF-8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    bytes: Vec<u8>,
    lines: Vec<Range<usize>>,
}

impl SourceFile {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let mut lines = Vec::new();
        let mut start = 0;
        for (i, b) in bytes.iter().enumerate() {
            if *b == b'\n' {
                lines.push(start..i + 1);
                start = i + 1;
            }
        }
        if start < bytes.len() {
            lines.push(start..bytes.len());
        }
        SourceFile { bytes, lines }
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        fs::read(path).map(Self::from_bytes)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// Byte range covered by a span of lines, terminators included.
    pub fn byte_range(&self, span: LineSpan) -> Option<Range<usize>> {
        if !span.is_well_formed() || span.end > self.lines.len() {
            return None;
        }
        Some(self.lines[span.start - 1].start..self.lines[span.end - 1].end)
    }

    /// Lossy text of a span of lines.
    pub fn text(&self, span: LineSpan) -> Option<String> {
        self.byte_range(span)
            .map(|r| String::from_utf8_lossy(&self.bytes[r]).into_owned())
    }

    pub fn line(&self, line: usize) -> Option<String> {
        self.text(LineSpan::single(line))
    }

    pub fn full_text(&self) -> String {
        String::from_utf8_lossy(&self.bytes).into_owned()
    }
}

/// The buggy function cut around the hunk. `prefix + buggy_hunk + suffix`
/// equals `full_function` byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSlices {
    pub prefix: String,
    pub buggy_hunk: String,
    pub suffix: String,
    pub full_function: String,
}

impl ContextSlices {
    pub fn reassemble(&self) -> String {
        format!("{}{}{}", self.prefix, self.buggy_hunk, self.suffix)
    }

    pub fn hunk_line_count(&self) -> usize {
        self.buggy_hunk.split_inclusive('\n').count()
    }

    /// Terminator of the hunk's last line (`"\n"`, `"\r\n"` or empty).
    pub fn hunk_terminator(&self) -> &str {
        line_terminator(&self.buggy_hunk)
    }
}

pub(crate) fn line_terminator(text: &str) -> &str {
    if text.ends_with("\r\n") {
        "\r\n"
    } else if text.ends_with('\n') {
        "\n"
    } else {
        ""
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("benchmark has {} invalid record(s):\n{}", .0.len(), render_problems(.0))]
    InvalidRecords(Vec<RecordProblem>),
    #[error("bug {id}: hunk {hunk} is not inside the extracted function {function}")]
    HunkOutsideFunction {
        id: String,
        hunk: LineSpan,
        function: LineSpan,
    },
    #[error("bug {id}: reference diff does not apply: {reason}")]
    DiffDoesNotApply { id: String, reason: String },
}

fn render_problems(problems: &[RecordProblem]) -> String {
    problems
        .iter()
        .map(|p| format!("  - {p}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A single invalid manifest record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordProblem {
    /// 1-based manifest line.
    pub line: usize,
    /// Record id, when the line parsed far enough to have one.
    pub id: Option<String>,
    pub kind: ProblemKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemKind {
    Malformed(String),
    DuplicateId,
    MissingFile(PathBuf),
    SpanOutOfBounds { span: LineSpan, lines: usize },
    HunkNotInFunction { hunk: LineSpan, function: LineSpan },
    EmptyReference,
    ReferenceDoesNotParse(String),
    SourceOutsideProject,
}

impl fmt::Display for RecordProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {} ({}): ",
            self.line,
            self.id.as_deref().unwrap_or("<no id>")
        )?;
        match &self.kind {
            ProblemKind::Malformed(msg) => write!(f, "malformed record: {msg}"),
            ProblemKind::DuplicateId => write!(f, "duplicate id"),
            ProblemKind::MissingFile(p) => write!(f, "missing file {}", p.display()),
            ProblemKind::SpanOutOfBounds { span, lines } => {
                write!(f, "span {span} out of bounds (file has {lines} lines)")
            }
            ProblemKind::HunkNotInFunction { hunk, function } => {
                write!(f, "hunk {hunk} not contained in function {function}")
            }
            ProblemKind::EmptyReference => write!(f, "reference_patch is empty"),
            ProblemKind::ReferenceDoesNotParse(why) => {
                write!(f, "reference_patch does not parse: {why}")
            }
            ProblemKind::SourceOutsideProject => {
                write!(f, "source_path is not inside project_root")
            }
        }
    }
}

/// A validated bug with its source file loaded.
#[derive(Debug, Clone)]
pub struct Bug {
    pub record: BugRecord,
    /// Absolute (manifest-resolved) path of the buggy file.
    pub source_file: PathBuf,
    /// Absolute path of the project directory copied for validation.
    pub project_root: PathBuf,
    pub source: Arc<SourceFile>,
}

impl Bug {
    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn language(&self) -> Language {
        self.record.language
    }

    /// Path of the buggy file relative to the project root.
    pub fn relative_source_path(&self) -> &Path {
        self.source_file
            .strip_prefix(&self.project_root)
            .expect("checked at load time")
    }

    pub fn original_function(&self) -> String {
        self.source
            .text(self.record.function_span)
            .expect("checked at load time")
    }

    pub fn is_single_line(&self) -> bool {
        self.record.hunk_span.len() == 1
    }

    /// Slices the function around the record's hunk.
    pub fn slices(&self) -> Result<ContextSlices, CorpusError> {
        slice_contexts(self)
    }

    /// Slices the function around an arbitrary hunk inside it.
    pub fn slices_at(&self, hunk: LineSpan) -> Result<ContextSlices, CorpusError> {
        let function = self.record.function_span;
        if !hunk.is_well_formed() || !function.contains(&hunk) {
            return Err(CorpusError::HunkOutsideFunction {
                id: self.record.id.clone(),
                hunk,
                function,
            });
        }
        let text = |span: Option<LineSpan>| {
            span.map(|s| self.source.text(s).expect("inside function"))
                .unwrap_or_default()
        };
        let prefix_span = (hunk.start > function.start)
            .then(|| LineSpan::new(function.start, hunk.start - 1));
        let suffix_span =
            (hunk.end < function.end).then(|| LineSpan::new(hunk.end + 1, function.end));
        Ok(ContextSlices {
            prefix: text(prefix_span),
            buggy_hunk: text(Some(hunk)),
            suffix: text(suffix_span),
            full_function: self.original_function(),
        })
    }
}

/// Cuts the buggy function of `bug` into prefix, hunk and suffix.
pub fn slice_contexts(bug: &Bug) -> Result<ContextSlices, CorpusError> {
    bug.slices_at(bug.record.hunk_span)
}

/// Loads and validates a benchmark manifest.
pub fn load_benchmark(manifest: &Path) -> Result<Vec<Bug>, CorpusError> {
    let content = fs::read_to_string(manifest).map_err(|source| CorpusError::Manifest {
        path: manifest.to_path_buf(),
        source,
    })?;
    let base = manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let base = if base.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        base
    };
    let base = base.canonicalize().unwrap_or(base);
    parse_manifest(&content, &base)
}

/// Parses manifest text; relative paths resolve against `base`.
pub fn parse_manifest(content: &str, base: &Path) -> Result<Vec<Bug>, CorpusError> {
    let mut bugs = Vec::new();
    let mut problems = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let record: BugRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(String::from));
                problems.push(RecordProblem {
                    line: line_no,
                    id,
                    kind: ProblemKind::Malformed(e.to_string()),
                });
                continue;
            }
        };
        if !seen.insert(record.id.clone()) {
            problems.push(RecordProblem {
                line: line_no,
                id: Some(record.id.clone()),
                kind: ProblemKind::DuplicateId,
            });
            continue;
        }
        match validate_record(record, base) {
            Ok(bug) => bugs.push(bug),
            Err((id, kind)) => problems.push(RecordProblem {
                line: line_no,
                id: Some(id),
                kind,
            }),
        }
    }
    if problems.is_empty() {
        Ok(bugs)
    } else {
        Err(CorpusError::InvalidRecords(problems))
    }
}

fn validate_record(record: BugRecord, base: &Path) -> Result<Bug, (String, ProblemKind)> {
    let id = record.id.clone();
    let fail = |kind| Err((id.clone(), kind));
    for span in [record.function_span, record.hunk_span] {
        if !span.is_well_formed() {
            return fail(ProblemKind::Malformed(format!(
                "span {span} must be 1-based with start <= end"
            )));
        }
    }
    let source_file = base.join(&record.source_path);
    let source = match SourceFile::read(&source_file) {
        Ok(s) => s,
        Err(_) => return fail(ProblemKind::MissingFile(source_file)),
    };
    let project_root = match &record.project_root {
        Some(root) => base.join(root),
        None => source_file
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| base.to_path_buf()),
    };
    if !project_root.is_dir() {
        return fail(ProblemKind::MissingFile(project_root));
    }
    if !source_file.starts_with(&project_root) {
        return fail(ProblemKind::SourceOutsideProject);
    }
    if record.function_span.end > source.line_count() {
        return fail(ProblemKind::SpanOutOfBounds {
            span: record.function_span,
            lines: source.line_count(),
        });
    }
    if !record.function_span.contains(&record.hunk_span) {
        return fail(ProblemKind::HunkNotInFunction {
            hunk: record.hunk_span,
            function: record.function_span,
        });
    }
    if record.reference_patch.trim().is_empty() {
        return fail(ProblemKind::EmptyReference);
    }
    if let Err(why) = syntax::check_function(record.language, &record.reference_patch) {
        return fail(ProblemKind::ReferenceDoesNotParse(why.to_string()));
    }
    Ok(Bug {
        record,
        source_file,
        project_root,
        source: Arc::new(source),
    })
}
