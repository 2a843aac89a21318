//! Fix templates derived from the buggy line.
//!
//! A template keeps part of the buggy line around the infill hole: the
//! generation is spliced between `rendered_prefix_extension` and
//! `rendered_suffix_extension`, which sit between the bug's own prefix and
//! suffix.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use crate::corpus::{line_terminator, ContextSlices};
use crate::prompt::{build_infill_prompt, InfillStyle, PromptSpec, RepairSetting};
use crate::syntax::LineSyntax;
use crate::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// Plain infill: nothing of the buggy line is kept.
    Identity,
    KeepPrefixFragment,
    KeepSuffixFragment,
    ReplaceCall,
    ReplaceArguments,
    MutateOperator,
    AddCondition,
}

impl TemplateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateKind::Identity => "identity",
            TemplateKind::KeepPrefixFragment => "keep_prefix_fragment",
            TemplateKind::KeepSuffixFragment => "keep_suffix_fragment",
            TemplateKind::ReplaceCall => "replace_call",
            TemplateKind::ReplaceArguments => "replace_arguments",
            TemplateKind::MutateOperator => "mutate_operator",
            TemplateKind::AddCondition => "add_condition",
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateInstance {
    pub kind: TemplateKind,
    pub rendered_prefix_extension: String,
    pub rendered_suffix_extension: String,
    /// Byte range of the buggy line (terminator excluded) the template masks.
    pub origin_tokens: Range<usize>,
}

impl TemplateInstance {
    pub fn identity() -> Self {
        TemplateInstance {
            kind: TemplateKind::Identity,
            rendered_prefix_extension: String::new(),
            rendered_suffix_extension: String::new(),
            origin_tokens: 0..0,
        }
    }
}

/// Relational and boolean operators a template may mask.
pub const CONDITION_OPERATORS: &[&str] = &[
    "<", "<=", ">", ">=", "==", "!=", "&&", "||", "and", "or", "is", "is not", "in", "not in",
];

/// Text a template may add that is not copied from the buggy line.
pub const TEMPLATE_KEYWORDS: &[&str] = &["if", "(", ")", "{", "}", ":", "&&", "||", "and", "or"];

struct Builder<'a> {
    line: &'a str,
    indent: &'a str,
    terminator: &'a str,
    seen: HashSet<(String, String)>,
    out: Vec<TemplateInstance>,
}

impl Builder<'_> {
    fn push(&mut self, kind: TemplateKind, prefix: String, suffix: String, origin: Range<usize>) {
        if self.seen.insert((prefix.clone(), suffix.clone())) {
            self.out.push(TemplateInstance {
                kind,
                rendered_prefix_extension: prefix,
                rendered_suffix_extension: suffix,
                origin_tokens: origin,
            });
        }
    }

    /// Keeps `line[..mask.start]` and `line[mask.end..]`.
    fn mask(&mut self, kind: TemplateKind, mask: Range<usize>) {
        let prefix = self.line[..mask.start].to_string();
        let suffix = format!("{}{}", &self.line[mask.end..], self.terminator);
        self.push(kind, prefix, suffix, mask);
    }
}

fn call_parts<'t>(language: Language, node: Node<'t>) -> Option<(Node<'t>, Node<'t>)> {
    let (name, args) = match (language, node.kind()) {
        (Language::Java, "method_invocation") => (
            node.child_by_field_name("name")?,
            node.child_by_field_name("arguments")?,
        ),
        (Language::Python, "call") | (Language::C, "call_expression") => {
            let function = node.child_by_field_name("function")?;
            let name = match function.kind() {
                "attribute" => function.child_by_field_name("attribute")?,
                "field_expression" => function.child_by_field_name("field")?,
                _ => function,
            };
            (name, node.child_by_field_name("arguments")?)
        }
        _ => return None,
    };
    Some((name, args))
}

fn is_operator_node(language: Language, kind: &str) -> bool {
    match language {
        Language::Java | Language::C => kind == "binary_expression",
        Language::Python => matches!(kind, "comparison_operator" | "boolean_operator"),
    }
}

/// Whether `node` is the condition of an `if`/`while` header. The statement
/// itself usually extends past the line, so the check goes through the parent.
fn is_condition(language: Language, node: Node<'_>) -> bool {
    let kinds: &[&str] = match language {
        Language::Java | Language::C => &["if_statement", "while_statement"],
        Language::Python => &["if_statement", "elif_clause", "while_statement"],
    };
    node.parent().is_some_and(|p| {
        kinds.contains(&p.kind()) && p.child_by_field_name("condition") == Some(node)
    })
}

fn is_plain_statement(language: Language, content: &str) -> bool {
    let trimmed = content.trim_end();
    match language {
        Language::Java | Language::C => trimmed.ends_with(';') && !trimmed.starts_with("for"),
        Language::Python => {
            !trimmed.ends_with(':')
                && !["else", "elif ", "except", "finally", "def ", "class ", "@"]
                    .iter()
                    .any(|k| trimmed.starts_with(k))
        }
    }
}

/// Templates for one buggy line, identity first. A line that does not parse
/// yields no templates at all (callers fall back to plain infill).
pub fn generate_templates(buggy_line: &str, language: Language) -> Vec<TemplateInstance> {
    let terminator = line_terminator(buggy_line);
    let line = &buggy_line[..buggy_line.len() - terminator.len()];
    let indent_len = line.len() - line.trim_start_matches([' ', '\t']).len();
    let mut b = Builder {
        line,
        indent: &line[..indent_len],
        terminator,
        seen: HashSet::new(),
        out: Vec::new(),
    };
    let Some(parsed) = LineSyntax::parse(language, line) else {
        tracing::warn!(line, "buggy line does not parse; no templates generated");
        return Vec::new();
    };
    b.push(TemplateKind::Identity, String::new(), String::new(), 0..0);
    let tokens = parsed.tokens();
    let n = tokens.len();

    for i in 1..n {
        let prefix = line[..tokens[i].start].to_string();
        let origin = tokens[i].start..line.len();
        b.push(TemplateKind::KeepPrefixFragment, prefix, terminator.to_string(), origin);
    }
    for i in 0..n.saturating_sub(1) {
        let suffix = format!("{}{terminator}", &line[tokens[i].end..]);
        let origin = indent_len..tokens[i].end;
        b.push(TemplateKind::KeepSuffixFragment, b.indent.to_string(), suffix, origin);
    }

    let mut calls = Vec::new();
    let mut operators = Vec::new();
    let mut conditions = Vec::new();
    parsed.visit(|node| {
        if let Some((name, args)) = call_parts(language, node) {
            calls.push((parsed.range(name), parsed.range(args)));
        }
        if is_operator_node(language, node.kind()) {
            let right = node.child_by_field_name("right").map(|r| parsed.range(r));
            let mut cursor = node.walk();
            for child in node.children(&mut cursor) {
                let text = parsed.text(child).split_whitespace().collect::<Vec<_>>().join(" ");
                if !child.is_named() && CONDITION_OPERATORS.contains(&text.as_str()) {
                    operators.push((parsed.range(child), right.clone()));
                }
            }
        }
        if is_condition(language, node) {
            conditions.push(parsed.range(node));
        }
    });

    for (name, _) in &calls {
        b.mask(TemplateKind::ReplaceCall, name.clone());
    }
    for (_, args) in &calls {
        if args.len() >= 2 {
            b.mask(TemplateKind::ReplaceArguments, args.start + 1..args.end - 1);
        }
    }
    for (op, right) in &operators {
        b.mask(TemplateKind::MutateOperator, op.clone());
        if let Some(right) = right {
            if right.start >= op.end {
                b.mask(TemplateKind::MutateOperator, op.start..right.end);
            }
        }
    }

    let (and, or) = match language {
        Language::Python => ("and", "or"),
        Language::Java | Language::C => ("&&", "||"),
    };
    for cond in &conditions {
        // Python conditions are bare; Java and C keep the closing parenthesis
        let end = match language {
            Language::Python => cond.end,
            Language::Java | Language::C => cond.end - 1,
        };
        for joiner in [and, or] {
            let prefix = format!("{} {joiner} ", line[..end].trim_end());
            let suffix = format!("{}{terminator}", &line[end..]);
            b.push(TemplateKind::AddCondition, prefix, suffix, end..end);
        }
    }
    let content = &line[indent_len..];
    if is_plain_statement(language, content) {
        let body_indent = format!("{}    ", b.indent);
        let (prefix, suffix) = match language {
            Language::Python => (
                format!("{}if ", b.indent),
                format!(":{terminator}{body_indent}{content}{terminator}"),
            ),
            Language::Java | Language::C => (
                format!("{}if (", b.indent),
                format!(
                    ") {{{terminator}{body_indent}{content}{terminator}{}}}{terminator}",
                    b.indent
                ),
            ),
        };
        b.push(TemplateKind::AddCondition, prefix, suffix, indent_len..line.len());
    }
    b.out
}

/// Infill prompt for `slices` with the template's extensions placed around the
/// hole.
pub fn apply_template(
    slices: &ContextSlices,
    instance: &TemplateInstance,
    language: Language,
    style: InfillStyle,
) -> PromptSpec {
    let extended = ContextSlices {
        prefix: format!("{}{}", slices.prefix, instance.rendered_prefix_extension),
        buggy_hunk: String::new(),
        suffix: format!("{}{}", instance.rendered_suffix_extension, slices.suffix),
        full_function: slices.full_function.clone(),
    };
    let mut spec = build_infill_prompt(&extended, language, style);
    if slices.hunk_line_count() == 1 {
        spec.setting = RepairSetting::SingleLineInfill;
    }
    spec
}

/// Samples per template when `total` samples are dealt round-robin over
/// `templates` templates, the first template first.
pub fn allocate_samples(total: usize, templates: usize) -> Vec<usize> {
    if templates == 0 {
        return Vec::new();
    }
    (0..templates)
        .map(|j| total / templates + usize::from(j < total % templates))
        .collect()
}

/// Global sample index of the `r`-th sample of template `j` out of `k`.
pub fn sample_index(j: usize, r: usize, k: usize) -> usize {
    j + r * k
}
