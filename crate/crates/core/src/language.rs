use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Source language of a benchmark bug.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Java,
    Python,
    C,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::Java, Language::Python, Language::C];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Java => "java",
            Language::Python => "python",
            Language::C => "c",
        }
    }

    /// Line-comment prefix used when rendering prompt headers.
    pub fn comment_prefix(self) -> &'static str {
        match self {
            Language::Python => "#",
            Language::Java | Language::C => "//",
        }
    }

    pub fn file_extension(self) -> &'static str {
        match self {
            Language::Java => "java",
            Language::Python => "py",
            Language::C => "c",
        }
    }

    pub(crate) fn grammar(self) -> tree_sitter::Language {
        match self {
            Language::Java => tree_sitter_java::LANGUAGE.into(),
            Language::Python => tree_sitter_python::LANGUAGE.into(),
            Language::C => tree_sitter_c::LANGUAGE.into(),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unsupported language `{0}` (expected java, python or c)")]
pub struct UnsupportedLanguage(pub String);

impl FromStr for Language {
    type Err = UnsupportedLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "java" => Ok(Language::Java),
            "python" | "py" => Ok(Language::Python),
            "c" => Ok(Language::C),
            other => Err(UnsupportedLanguage(other.to_string())),
        }
    }
}
