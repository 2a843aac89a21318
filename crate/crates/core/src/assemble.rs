//! Turning raw generations into candidate functions.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{ContextSlices, LineSpan};
use crate::model::{FinishReason, GenerationResult};
use crate::prompt::RepairSetting;
use crate::templates::{TemplateInstance, TemplateKind};
use crate::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Assembled,
    SyntaxError,
    SemanticError,
    TestFail,
    Plausible,
    Correct,
    NeedsReview,
}

impl CandidateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateStatus::Assembled => "assembled",
            CandidateStatus::SyntaxError => "syntax_error",
            CandidateStatus::SemanticError => "semantic_error",
            CandidateStatus::TestFail => "test_fail",
            CandidateStatus::Plausible => "plausible",
            CandidateStatus::Correct => "correct",
            CandidateStatus::NeedsReview => "needs_review",
        }
    }

    /// Whether the lifecycle allows moving from `self` to `next`.
    pub fn can_become(self, next: CandidateStatus) -> bool {
        use CandidateStatus::*;
        matches!(
            (self, next),
            (Assembled, SyntaxError | SemanticError | TestFail | Plausible)
                | (Plausible, Correct | NeedsReview)
        )
    }

    /// Passed the test suite (correct and needs_review are refinements).
    pub fn is_plausible(self) -> bool {
        matches!(
            self,
            CandidateStatus::Plausible | CandidateStatus::Correct | CandidateStatus::NeedsReview
        )
    }

    pub fn is_filtered_out(self) -> bool {
        matches!(self, CandidateStatus::SyntaxError | CandidateStatus::SemanticError)
    }
}

impl fmt::Display for CandidateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("illegal status change {from} -> {to}")]
pub struct StatusTransitionError {
    pub from: CandidateStatus,
    pub to: CandidateStatus,
}

/// Which sample of which bug a candidate came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleKey {
    pub bug_id: String,
    pub setting: RepairSetting,
    pub sample_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchCandidate {
    pub bug_id: String,
    pub setting: RepairSetting,
    pub sample_index: usize,
    pub generated: GenerationResult,
    pub patched_function: String,
    pub status: CandidateStatus,
    pub mean_entropy: Option<f64>,
    pub sum_entropy: Option<f64>,
    /// Number of samples this candidate stands for after dedupe.
    pub duplicate_count: usize,
    pub template: Option<TemplateKind>,
    /// Hunk the candidate replaces when several locations are repaired.
    pub location: Option<LineSpan>,
}

impl PatchCandidate {
    pub fn new(key: SampleKey, generated: GenerationResult, patched_function: String) -> Self {
        PatchCandidate {
            bug_id: key.bug_id,
            setting: key.setting,
            sample_index: key.sample_index,
            generated,
            patched_function,
            status: CandidateStatus::Assembled,
            mean_entropy: None,
            sum_entropy: None,
            duplicate_count: 1,
            template: None,
            location: None,
        }
    }

    pub fn set_status(&mut self, next: CandidateStatus) -> Result<(), StatusTransitionError> {
        if !self.status.can_become(next) {
            return Err(StatusTransitionError {
                from: self.status,
                to: next,
            });
        }
        self.status = next;
        Ok(())
    }
}

/// `prefix + generation + suffix`.
pub fn assemble_infill(key: SampleKey, slices: &ContextSlices, gen: GenerationResult) -> PatchCandidate {
    let patched = format!("{}{}{}", slices.prefix, gen.text, slices.suffix);
    PatchCandidate::new(key, gen, patched)
}

/// Infill through a template: the template's extensions sit between the
/// context and the generation.
pub fn assemble_template(
    key: SampleKey,
    slices: &ContextSlices,
    instance: &TemplateInstance,
    gen: GenerationResult,
) -> PatchCandidate {
    let patched = format!(
        "{}{}{}{}{}",
        slices.prefix,
        instance.rendered_prefix_extension,
        gen.text,
        instance.rendered_suffix_extension,
        slices.suffix
    );
    let mut candidate = PatchCandidate::new(key, gen, patched);
    candidate.template = Some(instance.kind);
    candidate
}

/// Single generated line in place of the buggy line. An empty line deletes it.
pub fn assemble_single_line(
    key: SampleKey,
    slices: &ContextSlices,
    gen: GenerationResult,
) -> PatchCandidate {
    let line = extract_single_line(&gen);
    let replacement = if line.is_empty() {
        String::new()
    } else {
        format!("{line}{}", slices.hunk_terminator())
    };
    let patched = format!("{}{replacement}{}", slices.prefix, slices.suffix);
    PatchCandidate::new(key, gen, patched)
}

/// Extracts the function from a complete-function generation. On failure the
/// candidate keeps the raw text and is marked `syntax_error`.
pub fn assemble_function(
    key: SampleKey,
    slices: &ContextSlices,
    language: Language,
    gen: GenerationResult,
) -> PatchCandidate {
    match extract_function(&gen, language) {
        Ok(mut function) => {
            let terminator = crate::corpus::line_terminator(&slices.full_function);
            if crate::corpus::line_terminator(&function).is_empty() {
                function.push_str(terminator);
            }
            PatchCandidate::new(key, gen, function)
        }
        Err(_) => {
            let raw = gen.text.clone();
            let mut candidate = PatchCandidate::new(key, gen, raw);
            candidate.status = CandidateStatus::SyntaxError;
            candidate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("no function definition in the generation")]
    NoFunction,
    #[error("generation ended before the function was complete")]
    Incomplete,
}

/// Text up to (excluding) the first newline, trailing whitespace removed.
pub fn extract_single_line(gen: &GenerationResult) -> String {
    let first = gen.text.split('\n').next().unwrap_or("");
    first.trim_end().to_string()
}

/// First complete function in a complete-function generation.
pub fn extract_function(gen: &GenerationResult, language: Language) -> Result<String, ExtractError> {
    let text = strip_leading_blank_lines(&gen.text);
    if text.trim().is_empty() {
        return Err(ExtractError::NoFunction);
    }
    match function_end(text, language) {
        Some(end) => Ok(text[..end].to_string()),
        None if language == Language::Python && gen.finish_reason != FinishReason::Length => {
            python_trailing_body(text).ok_or(ExtractError::Incomplete)
        }
        None => Err(ExtractError::Incomplete),
    }
}

fn strip_leading_blank_lines(text: &str) -> &str {
    let mut start = 0;
    for line in text.split_inclusive('\n') {
        if line.trim().is_empty() && line.ends_with('\n') {
            start += line.len();
        } else {
            break;
        }
    }
    &text[start..]
}

/// Byte offset just past the first complete function in `text` (including the
/// newline after its last line), when the end is visible in the text.
pub fn function_end(text: &str, language: Language) -> Option<usize> {
    match language {
        Language::Java | Language::C => brace_function_end(text),
        Language::Python => python_function_end(text),
    }
}

fn include_newline(text: &str, at: usize) -> usize {
    let rest = &text[at..];
    let line_rest = rest.split_inclusive('\n').next().unwrap_or("");
    if line_rest.ends_with('\n') && line_rest.trim().is_empty() {
        at + line_rest.len()
    } else {
        at
    }
}

fn brace_function_end(text: &str) -> Option<usize> {
    #[derive(PartialEq)]
    enum State {
        Code,
        LineComment,
        BlockComment,
        Str(u8),
    }
    let bytes = text.as_bytes();
    let mut state = State::Code;
    let mut depth = 0usize;
    let mut opened = false;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let next = bytes.get(i + 1).copied();
        match state {
            State::Code => match b {
                b'/' if next == Some(b'/') => {
                    state = State::LineComment;
                    i += 1;
                }
                b'/' if next == Some(b'*') => {
                    state = State::BlockComment;
                    i += 1;
                }
                b'"' | b'\'' => state = State::Str(b),
                b'{' => {
                    depth += 1;
                    opened = true;
                }
                b'}' => {
                    if depth == 0 {
                        return None;
                    }
                    depth -= 1;
                    if opened && depth == 0 {
                        return Some(include_newline(text, i + 1));
                    }
                }
                b';' if !opened => {
                    // a declaration or statement before any body
                    return None;
                }
                _ => {}
            },
            State::LineComment => {
                if b == b'\n' {
                    state = State::Code;
                }
            }
            State::BlockComment => {
                if b == b'*' && next == Some(b'/') {
                    state = State::Code;
                    i += 1;
                }
            }
            State::Str(q) => {
                if b == b'\\' {
                    i += 1;
                } else if b == q || b == b'\n' {
                    state = State::Code;
                }
            }
        }
        i += 1;
    }
    None
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start_matches([' ', '\t']).len()
}

/// Lines of `text` with byte offsets, skipping the interior of triple-quoted
/// strings for structural purposes.
struct PyLine<'a> {
    start: usize,
    text: &'a str,
    in_string: bool,
}

fn python_lines(text: &str) -> Vec<PyLine<'_>> {
    let mut out = Vec::new();
    let mut offset = 0;
    let mut open: Option<&str> = None;
    for line in text.split_inclusive('\n') {
        let in_string = open.is_some();
        let mut rest = line;
        loop {
            match open {
                Some(q) => match rest.find(q) {
                    Some(p) => {
                        rest = &rest[p + 3..];
                        open = None;
                    }
                    None => break,
                },
                None => {
                    let next = ["\"\"\"", "'''"]
                        .into_iter()
                        .filter_map(|q| rest.find(q).map(|p| (p, q)))
                        .min();
                    match next {
                        Some((p, q)) => {
                            rest = &rest[p + 3..];
                            open = Some(q);
                        }
                        None => break,
                    }
                }
            }
        }
        out.push(PyLine {
            start: offset,
            text: line,
            in_string,
        });
        offset += line.len();
    }
    out
}

/// Index of the line ending the `def` header (the one with the trailing `:`).
fn python_header(lines: &[PyLine<'_>]) -> Option<(usize, usize)> {
    let first = lines.iter().position(|l| !l.text.trim().is_empty())?;
    let base = indent_of(lines[first].text);
    let mut i = first;
    while lines.get(i)?.text.trim_start().starts_with('@') {
        i += 1;
    }
    let def = lines[i].text.trim_start();
    if !(def.starts_with("def ") || def.starts_with("async def ")) || indent_of(lines[i].text) != base
    {
        return None;
    }
    let mut depth: i32 = 0;
    for (j, line) in lines.iter().enumerate().skip(i) {
        for c in line.text.chars() {
            match c {
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => depth -= 1,
                _ => {}
            }
        }
        let code = line.text.split('#').next().unwrap_or("").trim_end();
        if depth <= 0 && code.ends_with(':') {
            return Some((j, base));
        }
        if depth <= 0 && code.contains(':') && !code.ends_with(':') && j == i {
            // one-line body: `def f(): return 1`
            return Some((j, base));
        }
    }
    None
}

fn python_function_end(text: &str) -> Option<usize> {
    let lines = python_lines(text);
    let (header, base) = python_header(&lines)?;
    let mut last_body: Option<usize> = None;
    for (j, line) in lines.iter().enumerate().skip(header + 1) {
        if line.in_string || line.text.trim().is_empty() {
            continue;
        }
        if indent_of(line.text) <= base {
            let end = last_body.map_or(header, |b| b);
            let l = &lines[end];
            let at = l.start + l.text.len();
            return (last_body.is_some() || one_line_def(lines[header].text)).then_some(at);
        }
        last_body = Some(j);
    }
    None
}

fn one_line_def(line: &str) -> bool {
    let code = line.split('#').next().unwrap_or("").trim_end();
    !code.ends_with(':')
}

/// The whole generation when it is a Python function that simply ran to the
/// end of the text (stopped by a stop string rather than a dedent).
fn python_trailing_body(text: &str) -> Option<String> {
    let lines = python_lines(text);
    let (header, base) = python_header(&lines)?;
    let last = lines
        .iter()
        .enumerate()
        .skip(header + 1)
        .filter(|(_, l)| !l.text.trim().is_empty())
        .last()?;
    if indent_of(last.1.text) <= base && !last.1.in_string {
        return None;
    }
    let end = last.1.start + last.1.text.len();
    Some(text[..end].to_string())
}

/// Trailing whitespace stripped from every line.
pub fn normalize_for_dedupe(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        out.push_str(line.trim_end());
        if line.ends_with('\n') {
            out.push('\n');
        }
    }
    out.trim_end().to_string()
}

/// Collapses candidates whose normalized text matches onto the lowest
/// `sample_index`, summing their duplicate counts. Survivors keep input order.
pub fn dedupe(candidates: Vec<PatchCandidate>) -> Vec<PatchCandidate> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by_key(|&i| candidates[i].sample_index);
    let mut owner: HashMap<String, usize> = HashMap::new();
    let mut extra = vec![0usize; candidates.len()];
    let mut keep = vec![false; candidates.len()];
    for i in order {
        let key = normalize_for_dedupe(&candidates[i].patched_function);
        match owner.get(&key) {
            Some(&rep) => extra[rep] += candidates[i].duplicate_count,
            None => {
                owner.insert(key, i);
                keep[i] = true;
            }
        }
    }
    candidates
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(i, mut c)| {
            c.duplicate_count += extra[i];
            c
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Token;
    use proptest::prelude::*;

    fn gen(text: &str, finish: FinishReason) -> GenerationResult {
        GenerationResult::from_tokens(
            vec![Token {
                text: text.into(),
                logprob: -0.1,
            }],
            finish,
        )
    }

    fn key(i: usize) -> SampleKey {
        SampleKey {
            bug_id: "b".into(),
            setting: RepairSetting::Infill,
            sample_index: i,
        }
    }

    fn slices() -> ContextSlices {
        ContextSlices {
            prefix: "int f(int x) {\n".into(),
            buggy_hunk: "    return x;\n".into(),
            suffix: "}\n".into(),
            full_function: "int f(int x) {\n    return x;\n}\n".into(),
        }
    }

    #[test]
    fn identity_and_deletion_splices() {
        let s = slices();
        let c = assemble_infill(key(0), &s, gen("    return x;\n", FinishReason::Stop));
        assert_eq!(c.patched_function, s.full_function);
        let c = assemble_infill(key(0), &s, GenerationResult::empty());
        assert_eq!(c.patched_function, "int f(int x) {\n}\n");
    }

    #[test]
    fn single_line_extraction() {
        assert_eq!(extract_single_line(&gen("return x;  \nmore", FinishReason::Stop)), "return x;");
        assert_eq!(extract_single_line(&gen("\nreturn y;", FinishReason::Stop)), "");
        let s = slices();
        let c = assemble_single_line(key(1), &s, gen("    return -x;", FinishReason::Stop));
        assert_eq!(c.patched_function, "int f(int x) {\n    return -x;\n}\n");
    }

    #[test]
    fn java_function_junk_is_stripped() {
        let text = "public int f(int x) {\n    String s = \"}\";\n    // }\n    return x;\n}\n\n// Buggy Function\nint g() {";
        let out = extract_function(&gen(text, FinishReason::Length), Language::Java).unwrap();
        assert_eq!(out, "public int f(int x) {\n    String s = \"}\";\n    // }\n    return x;\n}\n");
    }

    #[test]
    fn truncated_body_is_incomplete() {
        let text = "int f(int x)\n{\n    if (x) {\n        return 1;\n";
        assert_eq!(
            extract_function(&gen(text, FinishReason::Length), Language::C),
            Err(ExtractError::Incomplete)
        );
        let text = "def f(x):\n    return (x +\n";
        assert_eq!(
            extract_function(&gen(text, FinishReason::Length), Language::Python),
            Err(ExtractError::Incomplete)
        );
    }

    #[test]
    fn python_function_ends_at_dedent() {
        let text = "def f(x):\n    if x:\n        return 1\n\n    return 2\nprint(f(1))\n";
        let out = extract_function(&gen(text, FinishReason::Length), Language::Python).unwrap();
        assert_eq!(out, "def f(x):\n    if x:\n        return 1\n\n    return 2\n");
    }

    #[test]
    fn python_docstring_lines_do_not_end_the_body() {
        let text = "def f(x):\n    \"\"\"\nDoc at column zero.\n\"\"\"\n    return x\n\nnext_thing = 1\n";
        let out = extract_function(&gen(text, FinishReason::Stop), Language::Python).unwrap();
        assert_eq!(out, "def f(x):\n    \"\"\"\nDoc at column zero.\n\"\"\"\n    return x\n");
    }

    #[test]
    fn python_body_running_to_stop_string_is_complete() {
        let text = "def f(x):\n    return x\n\n";
        let out = extract_function(&gen(text, FinishReason::Stop), Language::Python).unwrap();
        assert_eq!(out, "def f(x):\n    return x\n");
    }

    #[test]
    fn missing_function_is_reported() {
        assert_eq!(
            extract_function(&gen("   \n", FinishReason::Stop), Language::Java),
            Err(ExtractError::NoFunction)
        );
    }

    #[test]
    fn dedupe_collapses_trailing_whitespace() {
        let s = slices();
        let a = assemble_infill(key(3), &s, gen("    return 1;\n", FinishReason::Stop));
        let b = assemble_infill(key(1), &s, gen("    return 1;   \n", FinishReason::Stop));
        let c = assemble_infill(key(2), &s, gen("    return 2;\n", FinishReason::Stop));
        let out = dedupe(vec![a, b.clone(), c]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].sample_index, 1);
        assert_eq!(out[0].duplicate_count, 2);
        assert_eq!(out[0].patched_function, b.patched_function);
    }

    #[test]
    fn two_hundred_identical_samples_collapse_to_one() {
        let s = slices();
        let all: Vec<_> = (0..200)
            .map(|i| assemble_infill(key(i), &s, gen("x\n", FinishReason::Stop)))
            .collect();
        let out = dedupe(all);
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].sample_index, out[0].duplicate_count), (0, 200));
    }

    #[test]
    fn lifecycle_only_moves_forward() {
        let s = slices();
        let mut c = assemble_infill(key(0), &s, gen("x\n", FinishReason::Stop));
        c.set_status(CandidateStatus::Plausible).unwrap();
        c.set_status(CandidateStatus::Correct).unwrap();
        assert!(c.set_status(CandidateStatus::Assembled).is_err());
        assert!(c.set_status(CandidateStatus::TestFail).is_err());
    }

    fn java_function() -> impl Strategy<Value = String> {
        proptest::collection::vec("[a-z]{1,6} = [a-z0-9]{1,4};", 0..5).prop_map(|stmts| {
            let body: String = stmts.iter().map(|s| format!("    {s}\n")).collect();
            format!("void f() {{\n{body}}}\n")
        })
    }

    fn python_function() -> impl Strategy<Value = String> {
        proptest::collection::vec("[a-z]{1,6} = [a-z0-9]{1,4}", 1..5).prop_map(|stmts| {
            let body: String = stmts.iter().map(|s| format!("    {s}\n")).collect();
            format!("def f():\n{body}")
        })
    }

    proptest! {
        #[test]
        fn extraction_is_idempotent_java(f in java_function(), junk in "[a-z{}\n]{0,20}") {
            let once = extract_function(&gen(&format!("{f}{junk}"), FinishReason::Stop), Language::Java).unwrap();
            prop_assert_eq!(&once, &f);
            let twice = extract_function(&gen(&once, FinishReason::Stop), Language::Java).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn extraction_is_idempotent_python(f in python_function(), junk in "[a-z]{1,10}\n") {
            let once = extract_function(&gen(&format!("{f}{junk}"), FinishReason::Length), Language::Python).unwrap();
            prop_assert_eq!(&once, &f);
            let twice = extract_function(&gen(&once, FinishReason::Stop), Language::Python).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn dedupe_keeps_first_occurrences(texts in proptest::collection::vec("[ab]{1,3}[ ]{0,2}", 1..30)) {
            let s = slices();
            let all: Vec<_> = texts.iter().enumerate()
                .map(|(i, t)| assemble_infill(key(i), &s, gen(t, FinishReason::Stop)))
                .collect();
            let out = dedupe(all.clone());
            let total: usize = out.iter().map(|c| c.duplicate_count).sum();
            prop_assert_eq!(total, all.len());
            prop_assert_eq!(out[0].sample_index, 0);
            for c in &out {
                prop_assert_eq!(&c.patched_function, &all[c.sample_index].patched_function);
            }
        }
    }
}
