//! Model inputs for the three repair settings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Bug, ContextSlices};
use crate::syntax;
use crate::Language;

/// Placeholder for the removed hunk in marker-style infill prompts.
pub const INFILL_MARKER: &str = "<INFILL>";

pub const TASK_LINE: &str = "Provide a fix for the buggy function";
pub const BUGGY_HEADER: &str = "Buggy Function";
pub const FIXED_HEADER: &str = "Fixed Function";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairSetting {
    CompleteFunction,
    Infill,
    SingleLineInfill,
    SingleLineGenerative,
}

impl RepairSetting {
    pub const ALL: [RepairSetting; 4] = [
        RepairSetting::CompleteFunction,
        RepairSetting::Infill,
        RepairSetting::SingleLineInfill,
        RepairSetting::SingleLineGenerative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RepairSetting::CompleteFunction => "complete_function",
            RepairSetting::Infill => "infill",
            RepairSetting::SingleLineInfill => "single_line_infill",
            RepairSetting::SingleLineGenerative => "single_line_generative",
        }
    }

    pub fn is_infill(self) -> bool {
        matches!(self, RepairSetting::Infill | RepairSetting::SingleLineInfill)
    }

    pub fn is_single_line(self) -> bool {
        matches!(
            self,
            RepairSetting::SingleLineInfill | RepairSetting::SingleLineGenerative
        )
    }

    /// Default generation length: 512 tokens for whole functions, 128 for
    /// hunks, 64 for single lines.
    pub fn default_max_new_tokens(self) -> u32 {
        match self {
            RepairSetting::CompleteFunction => 512,
            RepairSetting::Infill => 128,
            RepairSetting::SingleLineInfill | RepairSetting::SingleLineGenerative => 64,
        }
    }
}

impl fmt::Display for RepairSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RepairSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RepairSetting::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown repair setting `{s}`"))
    }
}

/// How the suffix reaches an infilling backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfillStyle {
    /// `prefix <INFILL> suffix` in a single prompt.
    #[default]
    Marker,
    /// Prompt is the prefix; the suffix goes in the request's `suffix` field.
    SuffixParameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleLineMode {
    Infill,
    Generative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Sent to the backend and also enforced client-side.
    Literal(String),
    /// Cut after the first complete function.
    EndOfFunction,
    /// Cut at the end of the first generated line.
    FirstLine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub setting: RepairSetting,
    pub language: Language,
    pub text: String,
    /// Byte offset in `text` where the generation is spliced.
    pub infill_marker: Option<usize>,
    pub suffix_text: Option<String>,
    pub stop_criteria: Vec<StopRule>,
}

impl PromptSpec {
    pub fn literal_stops(&self) -> Vec<String> {
        self.stop_criteria
            .iter()
            .filter_map(|s| match s {
                StopRule::Literal(l) => Some(l.clone()),
                _ => None,
            })
            .collect()
    }

    /// Text the backend sees with `generation` in place of the hole.
    pub fn splice(&self, generation: &str) -> String {
        match (self.infill_marker, &self.suffix_text) {
            (Some(at), Some(suffix)) => format!("{}{generation}{suffix}", &self.text[..at]),
            (Some(at), None) => format!(
                "{}{generation}{}",
                &self.text[..at],
                &self.text[at + INFILL_MARKER.len()..]
            ),
            (None, _) => format!("{}{generation}", self.text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleOrigin {
    Builtin,
    SameProject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub buggy_function: String,
    pub fixed_function: String,
    pub origin: ExampleOrigin,
}

impl FewShotExample {
    pub fn is_valid(&self, language: Language) -> bool {
        !self.buggy_function.trim().is_empty()
            && !self.fixed_function.trim().is_empty()
            && syntax::is_valid_function(language, &self.buggy_function)
            && syntax::is_valid_function(language, &self.fixed_function)
    }
}

/// Fibonacci off-by-one pair shipped with the harness.
pub fn builtin_example(language: Language) -> FewShotExample {
    let (buggy, fixed) = match language {
        Language::Python => (
            include_str!("../fixtures/examples/python/buggy.py"),
            include_str!("../fixtures/examples/python/fixed.py"),
        ),
        Language::Java => (
            include_str!("../fixtures/examples/java/buggy.java"),
            include_str!("../fixtures/examples/java/fixed.java"),
        ),
        Language::C => (
            include_str!("../fixtures/examples/c/buggy.c"),
            include_str!("../fixtures/examples/c/fixed.c"),
        ),
    };
    FewShotExample {
        buggy_function: buggy.to_string(),
        fixed_function: fixed.to_string(),
        origin: ExampleOrigin::Builtin,
    }
}

/// Built-in example followed by the record's same-project pair, if any.
pub fn examples_for(bug: &Bug) -> Vec<FewShotExample> {
    let mut out = vec![builtin_example(bug.language())];
    if let Some(pair) = &bug.record.project_example {
        out.push(FewShotExample {
            buggy_function: pair.buggy.clone(),
            fixed_function: pair.fixed.clone(),
            origin: ExampleOrigin::SameProject,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("the function prompt needs at least one few-shot example")]
    NoExamples,
    #[error("single-line prompt requested for a {lines}-line hunk")]
    NotSingleLine { lines: usize },
}

fn push_section(out: &mut String, comment: &str, header: &str, body: &str) {
    out.push_str(comment);
    out.push(' ');
    out.push_str(header);
    out.push('\n');
    out.push_str(body.trim_end_matches(['\n', '\r']));
    out.push_str("\n\n");
}

fn render_function_prompt(
    target: &str,
    examples: &[FewShotExample],
    language: Language,
) -> String {
    let c = language.comment_prefix();
    let mut out = format!("{c} {TASK_LINE}\n\n");
    for example in examples {
        push_section(&mut out, c, BUGGY_HEADER, &example.buggy_function);
        push_section(&mut out, c, FIXED_HEADER, &example.fixed_function);
    }
    push_section(&mut out, c, BUGGY_HEADER, target);
    out.push_str(c);
    out.push(' ');
    out.push_str(FIXED_HEADER);
    out.push('\n');
    out
}

fn keep_lines(text: &str, n: usize) -> String {
    text.split_inclusive('\n').take(n).collect()
}

/// Complete-function prompt without a length limit.
pub fn build_function_prompt(
    slices: &ContextSlices,
    examples: &[FewShotExample],
    language: Language,
) -> Result<PromptSpec, PromptError> {
    build_function_prompt_within(slices, examples, language, None)
}

/// Complete-function prompt. When `char_budget` is exceeded, same-project
/// examples are dropped first, then built-in examples are cut line by line
/// (removed once empty). The target function is never shortened, so the result
/// can still exceed the budget.
pub fn build_function_prompt_within(
    slices: &ContextSlices,
    examples: &[FewShotExample],
    language: Language,
    char_budget: Option<usize>,
) -> Result<PromptSpec, PromptError> {
    if examples.is_empty() {
        return Err(PromptError::NoExamples);
    }
    let target = &slices.full_function;
    let mut kept: Vec<FewShotExample> = examples.to_vec();
    let fits = |kept: &[FewShotExample]| match char_budget {
        Some(budget) => render_function_prompt(target, kept, language).chars().count() <= budget,
        None => true,
    };

    while !fits(&kept) {
        if let Some(pos) = kept
            .iter()
            .rposition(|e| e.origin == ExampleOrigin::SameProject)
        {
            kept.remove(pos);
            continue;
        }
        let Some(last) = kept.last_mut() else { break };
        let fixed_lines = last.fixed_function.lines().count();
        let buggy_lines = last.buggy_function.lines().count();
        if fixed_lines > 1 {
            last.fixed_function = keep_lines(&last.fixed_function, fixed_lines - 1);
        } else if buggy_lines > 1 {
            last.buggy_function = keep_lines(&last.buggy_function, buggy_lines - 1);
        } else {
            kept.pop();
        }
    }
    if kept.len() < examples.len() {
        tracing::debug!(
            kept = kept.len(),
            given = examples.len(),
            "function prompt shortened to fit the character budget"
        );
    }

    let c = language.comment_prefix();
    Ok(PromptSpec {
        setting: RepairSetting::CompleteFunction,
        language,
        text: render_function_prompt(target, &kept, language),
        infill_marker: None,
        suffix_text: None,
        stop_criteria: vec![
            StopRule::Literal(format!("{c} {BUGGY_HEADER}")),
            StopRule::EndOfFunction,
        ],
    })
}

fn infill_spec(slices: &ContextSlices, language: Language, style: InfillStyle) -> PromptSpec {
    let (text, suffix_text) = match style {
        InfillStyle::Marker => (
            format!("{}{INFILL_MARKER}{}", slices.prefix, slices.suffix),
            None,
        ),
        InfillStyle::SuffixParameter => (slices.prefix.clone(), Some(slices.suffix.clone())),
    };
    PromptSpec {
        setting: RepairSetting::Infill,
        language,
        text,
        infill_marker: Some(slices.prefix.len()),
        suffix_text,
        stop_criteria: Vec::new(),
    }
}

/// Infill prompt: the function with the buggy hunk removed.
pub fn build_infill_prompt(
    slices: &ContextSlices,
    language: Language,
    style: InfillStyle,
) -> PromptSpec {
    infill_spec(slices, language, style)
}

/// Single-line prompt. Infill mode is the infill prompt; generative mode is the
/// prefix alone, stopped after one line.
pub fn build_single_line_prompt(
    slices: &ContextSlices,
    mode: SingleLineMode,
    language: Language,
    style: InfillStyle,
) -> Result<PromptSpec, PromptError> {
    let lines = slices.hunk_line_count();
    if lines != 1 {
        return Err(PromptError::NotSingleLine { lines });
    }
    Ok(match mode {
        SingleLineMode::Infill => PromptSpec {
            setting: RepairSetting::SingleLineInfill,
            ..infill_spec(slices, language, style)
        },
        SingleLineMode::Generative => PromptSpec {
            setting: RepairSetting::SingleLineGenerative,
            language,
            text: slices.prefix.clone(),
            infill_marker: None,
            suffix_text: None,
            stop_criteria: vec![StopRule::Literal("\n".into()), StopRule::FirstLine],
        },
    })
}
