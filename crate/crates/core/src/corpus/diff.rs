//! Unified-diff parsing and changed-location enumeration.

use super::{line_terminator, Bug, CorpusError, LineSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffLine {
    Context(String),
    Removed(String),
    Added(String),
}

/// One `@@ -a,b +c,d @@` block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffHunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub lines: Vec<DiffLine>,
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((start, len)) => Some((start.parse().ok()?, len.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_header(line: &str) -> Option<(usize, usize, usize, usize)> {
    let rest = line.strip_prefix("@@ ")?;
    let (ranges, _) = rest.split_once(" @@")?;
    let (old, new) = ranges.split_once(' ')?;
    let (os, ol) = parse_range(old.strip_prefix('-')?)?;
    let (ns, nl) = parse_range(new.strip_prefix('+')?)?;
    Some((os, ol, ns, nl))
}

/// Parses the hunks of a unified diff. File headers and any text outside
/// hunks are ignored.
pub fn parse_unified_diff(text: &str) -> Result<Vec<DiffHunk>, String> {
    let mut hunks = Vec::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        if !line.starts_with("@@") {
            continue;
        }
        let (old_start, old_len, new_start, new_len) =
            parse_header(line).ok_or_else(|| format!("bad hunk header `{line}`"))?;
        let mut hunk = DiffHunk {
            old_start,
            old_len,
            new_start,
            new_len,
            lines: Vec::new(),
        };
        let (mut old_seen, mut new_seen) = (0, 0);
        while old_seen < old_len || new_seen < new_len {
            let Some(body) = lines.next() else {
                return Err(format!("hunk `{line}` ends early"));
            };
            let mut chars = body.chars();
            let tag = chars.next();
            let rest = chars.as_str().to_string();
            match tag {
                Some('+') => {
                    new_seen += 1;
                    hunk.lines.push(DiffLine::Added(rest));
                }
                Some('-') => {
                    old_seen += 1;
                    hunk.lines.push(DiffLine::Removed(rest));
                }
                Some(' ') | None => {
                    old_seen += 1;
                    new_seen += 1;
                    hunk.lines.push(DiffLine::Context(rest));
                }
                Some('\\') => {}
                Some(_) => return Err(format!("unexpected diff line `{body}`")),
            }
        }
        while lines.peek().is_some_and(|l| l.starts_with('\\')) {
            lines.next();
        }
        hunks.push(hunk);
    }
    Ok(hunks)
}

fn strip_terminator(line: &str) -> &str {
    &line[..line.len() - line_terminator(line).len()]
}

/// Changed regions of `reference_diff` as line spans of the buggy file, in
/// start order.
///
/// `reference_diff` is a unified diff against the buggy source file (file line
/// numbers). A region that only inserts lines is anchored on the line before
/// the insertion point, or the line after it at the top of the function.
pub fn enumerate_locations(bug: &Bug, reference_diff: &str) -> Result<Vec<LineSpan>, CorpusError> {
    let id = bug.id().to_string();
    let fail = |reason: String| CorpusError::DiffDoesNotApply {
        id: id.clone(),
        reason,
    };
    let hunks = parse_unified_diff(reference_diff).map_err(&fail)?;
    let function = bug.record.function_span;
    let mut spans: Vec<LineSpan> = Vec::new();

    let check = |line_no: usize, expected: &str| -> Result<(), CorpusError> {
        match bug.source.line(line_no) {
            Some(actual) if strip_terminator(&actual) == expected => Ok(()),
            Some(actual) => Err(fail(format!(
                "line {line_no} is `{}`, diff expects `{expected}`",
                strip_terminator(&actual)
            ))),
            None => Err(fail(format!("line {line_no} does not exist"))),
        }
    };

    for hunk in &hunks {
        let mut old_line = if hunk.old_len == 0 {
            hunk.old_start + 1
        } else {
            hunk.old_start
        };
        let mut removed: Vec<usize> = Vec::new();
        let mut insert_at: Option<usize> = None;

        let close = |removed: &mut Vec<usize>, insert_at: &mut Option<usize>| {
            let span = if let (Some(first), Some(last)) = (removed.first(), removed.last()) {
                Some(LineSpan::new(*first, *last))
            } else {
                insert_at.map(|at| {
                    if at > function.start {
                        LineSpan::single(at - 1)
                    } else {
                        LineSpan::single(at)
                    }
                })
            };
            removed.clear();
            *insert_at = None;
            span
        };

        for line in &hunk.lines {
            match line {
                DiffLine::Context(text) => {
                    check(old_line, text)?;
                    old_line += 1;
                    if let Some(span) = close(&mut removed, &mut insert_at) {
                        spans.push(span);
                    }
                }
                DiffLine::Removed(text) => {
                    check(old_line, text)?;
                    removed.push(old_line);
                    old_line += 1;
                }
                DiffLine::Added(_) => {
                    insert_at.get_or_insert(old_line);
                }
            }
        }
        if let Some(span) = close(&mut removed, &mut insert_at) {
            spans.push(span);
        }
    }

    for span in &spans {
        if !function.contains(span) {
            return Err(fail(format!(
                "change at lines {span} is outside function {function}"
            )));
        }
    }
    spans.sort();
    let mut merged: Vec<LineSpan> = Vec::new();
    for span in spans {
        match merged.last_mut() {
            Some(last) if span.start <= last.end => last.end = last.end.max(span.end),
            _ => merged.push(span),
        }
    }
    Ok(merged)
}

/// Unified diff (no context lines) from the buggy file to the file with the
/// reference patch in place of the buggy function.
pub fn reference_diff(bug: &Bug) -> String {
    let range = bug
        .source
        .byte_range(bug.record.function_span)
        .expect("checked at load time");
    let bytes = bug.source.bytes();
    let before = String::from_utf8_lossy(&bytes[..range.start]);
    let after = String::from_utf8_lossy(&bytes[range.end..]);
    let original = bug.original_function();
    let mut reference = bug.record.reference_patch.clone();
    let terminator = line_terminator(&original);
    if !terminator.is_empty() && line_terminator(&reference).is_empty() {
        reference.push_str(terminator);
    }
    let old = bug.source.full_text();
    let new = format!("{before}{reference}{after}");
    let path = bug.relative_source_path().display().to_string();
    similar::TextDiff::from_lines(&old, &new)
        .unified_diff()
        .context_radius(0)
        .header(&format!("a/{path}"), &format!("b/{path}"))
        .to_string()
}
