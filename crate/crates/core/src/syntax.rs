//! Tree-sitter backed parsing shared by the syntax filter, the correctness
//! check and template generation.

use std::ops::Range;

use tree_sitter::{Node, Parser, Tree};

use crate::Language;

const JAVA_SHELL_OPEN: &str = "class AprShell__ {\n";
const JAVA_SHELL_CLOSE: &str = "\n}\n";

fn parse(language: Language, source: &str) -> Tree {
    let mut parser = Parser::new();
    parser
        .set_language(&language.grammar())
        .expect("bundled grammar is ABI compatible");
    parser
        .parse(source, None)
        .expect("parser has a language and no cancellation flag")
}

/// Removes the common leading indentation of all non-blank lines.
pub(crate) fn dedent(text: &str) -> String {
    let indent = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start_matches([' ', '\t']).len())
        .min()
        .unwrap_or(0);
    if indent == 0 {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        let ws = line.len() - line.trim_start_matches([' ', '\t']).len();
        out.push_str(&line[ws.min(indent)..]);
    }
    out
}

/// A candidate function placed in the minimal compilable context for its
/// language: a class body for Java, a module for Python (dedented), and a
/// translation unit for C.
struct FunctionUnit {
    source: String,
    tree: Tree,
}

impl FunctionUnit {
    fn new(language: Language, text: &str) -> Self {
        let source = match language {
            Language::Java => format!("{JAVA_SHELL_OPEN}{text}{JAVA_SHELL_CLOSE}"),
            Language::Python => dedent(text),
            Language::C => text.to_string(),
        };
        let tree = parse(language, &source);
        FunctionUnit { source, tree }
    }

    fn members(&self, language: Language) -> Vec<Node<'_>> {
        let root = self.tree.root_node();
        let container = match language {
            Language::Java => {
                let class = named_children(root)
                    .into_iter()
                    .find(|n| n.kind() == "class_declaration");
                match class.and_then(|c| c.child_by_field_name("body")) {
                    Some(body) => body,
                    None => return Vec::new(),
                }
            }
            Language::Python | Language::C => root,
        };
        named_children(container)
    }
}

fn named_children(node: Node<'_>) -> Vec<Node<'_>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

fn is_comment(kind: &str) -> bool {
    matches!(kind, "comment" | "line_comment" | "block_comment")
}

fn is_literal_atom(kind: &str) -> bool {
    matches!(
        kind,
        "string" | "string_literal" | "char_literal" | "character_literal" | "text_block"
    )
}

fn is_function_node(language: Language, kind: &str) -> bool {
    match language {
        Language::Java => matches!(kind, "method_declaration" | "constructor_declaration"),
        Language::Python => matches!(kind, "function_definition" | "decorated_definition"),
        Language::C => kind == "function_definition",
    }
}

/// Why a text was rejected as a function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyntaxProblem {
    /// The grammar reported ERROR or MISSING nodes.
    ParseError { line: usize },
    /// Parsed, but the text is not one or more function definitions.
    NotAFunction { found: String },
}

impl std::fmt::Display for SyntaxProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SyntaxProblem::ParseError { line } => write!(f, "parse error near line {line}"),
            SyntaxProblem::NotAFunction { found } => {
                write!(f, "expected a function definition, found `{found}`")
            }
        }
    }
}

fn first_error(node: Node<'_>) -> Option<Node<'_>> {
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    if !node.has_error() {
        return None;
    }
    let mut cursor = node.walk();
    let children: Vec<_> = node.children(&mut cursor).collect();
    children.into_iter().find_map(first_error)
}

/// Python blocks must hold at least one statement; the grammar tolerates
/// empty ones.
fn empty_python_block(node: Node<'_>) -> Option<Node<'_>> {
    if node.kind() == "block" && named_children(node).iter().all(|c| is_comment(c.kind())) {
        return Some(node);
    }
    named_children(node).into_iter().find_map(empty_python_block)
}

/// Checks that `text` parses as a function definition under `language`.
pub fn check_function(language: Language, text: &str) -> Result<(), SyntaxProblem> {
    let unit = FunctionUnit::new(language, text);
    let root = unit.tree.root_node();
    let err = first_error(root).or_else(|| match language {
        Language::Python => empty_python_block(root),
        _ => None,
    });
    if let Some(err) = err {
        let mut line = err.start_position().row + 1;
        if language == Language::Java {
            line = line.saturating_sub(1).max(1);
        }
        return Err(SyntaxProblem::ParseError { line });
    }
    let members = unit.members(language);
    let mut functions = 0;
    for member in &members {
        if is_function_node(language, member.kind()) {
            functions += 1;
        } else if !is_comment(member.kind()) {
            return Err(SyntaxProblem::NotAFunction {
                found: member.kind().to_string(),
            });
        }
    }
    if functions == 0 {
        return Err(SyntaxProblem::NotAFunction {
            found: "nothing".to_string(),
        });
    }
    Ok(())
}

pub fn is_valid_function(language: Language, text: &str) -> bool {
    check_function(language, text).is_ok()
}

fn collect_leaves<'a>(node: Node<'a>, source: &'a str, out: &mut Vec<&'a str>) {
    if is_comment(node.kind()) {
        return;
    }
    if node.child_count() == 0 {
        let text = &source[node.byte_range()];
        if !text.trim().is_empty() {
            out.push(text);
        }
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_leaves(child, source, out);
    }
}

/// Leaf tokens of the function with comments dropped, so that two functions
/// differing only in layout or comments produce the same sequence.
pub fn normalized_tokens(language: Language, text: &str) -> Vec<String> {
    let unit = FunctionUnit::new(language, text);
    let mut leaves = Vec::new();
    collect_leaves(unit.tree.root_node(), &unit.source, &mut leaves);
    leaves.into_iter().map(str::to_string).collect()
}

/// A single source line parsed inside a statement context.
///
/// Offsets handed out by this type are byte offsets into the line content
/// (indentation included, line terminator excluded).
pub struct LineSyntax {
    tree: Tree,
    source: String,
    /// Where the parsed copy of the line starts in `source`.
    base: usize,
    /// Leading bytes of the line that were stripped before parsing.
    stripped: usize,
    len: usize,
}

fn statement_contexts(language: Language) -> &'static [(&'static str, &'static str)] {
    const JAVA: &[(&str, &str)] = &[
        ("class AprShell__ { void apr__() {\n", "\n}}\n"),
        ("class AprShell__ { void apr__() {\n", ";\n}}\n"),
        ("class AprShell__ { void apr__() {\n", "\n}\n}}\n"),
        ("class AprShell__ { void apr__() {\n", " {}\n}}\n"),
        ("class AprShell__ { void apr__() {\nif (true) {\n", "\n}\n}}\n"),
        ("class AprShell__ { void apr__() {\n{\n", "\n}}\n"),
        ("class AprShell__ {\n", "\n}\n"),
    ];
    const C: &[(&str, &str)] = &[
        ("void apr__(void) {\n", "\n}\n"),
        ("void apr__(void) {\n", ";\n}\n"),
        ("void apr__(void) {\n", "\n}\n}\n"),
        ("void apr__(void) {\n", " {}\n}\n"),
        ("void apr__(void) {\nif (1) {\n", "\n}\n}\n"),
        ("void apr__(void) {\n{\n", "\n}\n"),
        ("", "\n"),
    ];
    const PYTHON: &[(&str, &str)] = &[
        ("", "\n"),
        ("", "\n    pass\n"),
        ("if True:\n    pass\n", "\n    pass\n"),
        ("try:\n    pass\n", "\n    pass\n"),
    ];
    match language {
        Language::Java => JAVA,
        Language::C => C,
        Language::Python => PYTHON,
    }
}

impl LineSyntax {
    /// Parses `line` (without its terminator), trying a fixed list of
    /// enclosing contexts until one yields an error-free tree. Returns `None`
    /// when no context accepts the line.
    pub fn parse(language: Language, line: &str) -> Option<LineSyntax> {
        if line.trim().is_empty() {
            return None;
        }
        let stripped = if language == Language::Python {
            line.len() - line.trim_start_matches([' ', '\t']).len()
        } else {
            0
        };
        let content = &line[stripped..];
        statement_contexts(language).iter().find_map(|(open, close)| {
            let source = format!("{open}{content}{close}");
            let tree = parse(language, &source);
            if tree.root_node().has_error() {
                return None;
            }
            Some(LineSyntax {
                tree,
                source,
                base: open.len(),
                stripped,
                len: content.len(),
            })
        })
    }

    fn to_line(&self, pos: usize) -> usize {
        pos - self.base + self.stripped
    }

    fn within(&self, node: Node<'_>) -> bool {
        node.start_byte() >= self.base && node.end_byte() <= self.base + self.len
    }

    /// Byte range of `node` in line coordinates.
    pub fn range(&self, node: Node<'_>) -> Range<usize> {
        self.to_line(node.start_byte())..self.to_line(node.end_byte())
    }

    pub fn text(&self, node: Node<'_>) -> &str {
        &self.source[node.byte_range()]
    }

    /// Leaf token ranges of the line, comments excluded. String and character
    /// literals count as one token.
    pub fn tokens(&self) -> Vec<Range<usize>> {
        let mut atoms: Vec<Range<usize>> = Vec::new();
        let mut out = Vec::new();
        self.visit(|node| {
            let r = self.range(node);
            if atoms.iter().any(|a| a.start <= r.start && r.end <= a.end) {
                return;
            }
            if is_literal_atom(node.kind()) {
                atoms.push(r.clone());
                out.push(r);
            } else if node.child_count() == 0 && !is_comment(node.kind()) && !r.is_empty() {
                out.push(r);
            }
        });
        out.sort_by_key(|r| r.start);
        out.dedup();
        out
    }

    /// Visits, in document order, every node lying entirely inside the line.
    pub fn visit<'t>(&'t self, mut f: impl FnMut(Node<'t>)) {
        fn go<'t>(node: Node<'t>, this: &LineSyntax, f: &mut dyn FnMut(Node<'t>)) {
            if node.end_byte() <= this.base || node.start_byte() >= this.base + this.len {
                return;
            }
            if this.within(node) {
                f(node);
            }
            let mut cursor = node.walk();
            let children: Vec<_> = node.children(&mut cursor).collect();
            for child in children {
                go(child, this, f);
            }
        }
        go(self.tree.root_node(), self, &mut f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn java_method_in_shell_parses() {
        let f = "    public int add(int a, int b) {\n        return a + b;\n    }\n";
        assert_eq!(check_function(Language::Java, f), Ok(()));
    }

    #[test]
    fn java_unbalanced_brace_is_rejected() {
        let f = "public int add(int a, int b) {\n    if (a > b) {\n        return a;\n    return b;\n}\n";
        assert!(matches!(
            check_function(Language::Java, f),
            Err(SyntaxProblem::ParseError { .. })
        ));
    }

    #[test]
    fn python_indented_method_is_dedented() {
        let f = "    def add(self, a, b):\n        return a + b\n";
        assert_eq!(check_function(Language::Python, f), Ok(()));
    }

    #[test]
    fn python_if_without_body_is_rejected() {
        let f = "def f(x):\n    if x > 0:\n    return x\n";
        assert!(check_function(Language::Python, f).is_err());
    }

    #[test]
    fn c_function_parses_as_translation_unit() {
        let f = "int gcd(int a, int b)\n{\n    return b == 0 ? a : gcd(b, a % b);\n}\n";
        assert_eq!(check_function(Language::C, f), Ok(()));
    }

    #[test]
    fn bare_statement_is_not_a_function() {
        assert!(matches!(
            check_function(Language::Python, "x = 1\n"),
            Err(SyntaxProblem::NotAFunction { .. })
        ));
        assert!(check_function(Language::Python, "").is_err());
    }

    #[test]
    fn tokens_ignore_layout_and_comments() {
        let a = "int f(int x) {\n    // doubled\n    return x*2;\n}\n";
        let b = "int f(int x) { return x * 2; }";
        assert_eq!(
            normalized_tokens(Language::Java, a),
            normalized_tokens(Language::Java, b)
        );
    }

    #[test]
    fn line_parse_finds_statement_context() {
        let line = LineSyntax::parse(Language::Java, "        if (a < b) {").unwrap();
        let toks: Vec<_> = line.tokens();
        assert_eq!(toks.first().unwrap().start, 8);
        assert!(LineSyntax::parse(Language::Python, "    elif x:").is_some());
        assert!(LineSyntax::parse(Language::Java, "if ((( x").is_none());
    }

    #[test]
    fn dedent_removes_common_indent() {
        assert_eq!(dedent("    a\n\n      b\n"), "a\n\n  b\n");
    }
}
