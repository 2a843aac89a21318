//! Completion backends returning sampled text with per-token log-probabilities.

mod generate;
mod http;
mod mock;

use serde::{Deserialize, Serialize};

use crate::assemble;
use crate::prompt::{PromptSpec, RepairSetting, StopRule};
use crate::Language;

pub use generate::{generate, CallTiming, GenerateOptions, Generation};
pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use mock::{MockBackend, MockError, MockOptions, MockResponse, MockRule, PromptMatcher, Unmatched};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub top_p: f64,
    pub temperature: f64,
    pub num_samples: usize,
    pub max_new_tokens: u32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            top_p: 0.95,
            temperature: 0.8,
            num_samples: 200,
            max_new_tokens: RepairSetting::CompleteFunction.default_max_new_tokens(),
        }
    }
}

impl SamplingConfig {
    pub fn for_setting(setting: RepairSetting) -> Self {
        SamplingConfig {
            max_new_tokens: setting.default_max_new_tokens(),
            ..SamplingConfig::default()
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            out.push(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            out.push(format!("temperature must be non-negative, got {}", self.temperature));
        }
        if self.num_samples == 0 {
            out.push("num_samples must be positive".into());
        }
        if self.max_new_tokens == 0 {
            out.push("max_new_tokens must be positive".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Natural-log probability, never positive.
    pub logprob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    /// A stop string or stop rule ended the sample.
    Stop,
    /// `max_new_tokens` reached.
    Length,
    /// The model ended the sample on its own.
    BackendStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub tokens: Vec<Token>,
    pub text: String,
    pub finish_reason: FinishReason,
}

impl GenerationResult {
    pub fn from_tokens(tokens: Vec<Token>, finish_reason: FinishReason) -> Self {
        let text = tokens.iter().map(|t| t.text.as_str()).collect();
        GenerationResult {
            tokens,
            text,
            finish_reason,
        }
    }

    pub fn empty() -> Self {
        GenerationResult::from_tokens(Vec::new(), FinishReason::BackendStop)
    }

    pub fn logprobs(&self) -> impl Iterator<Item = f64> + '_ {
        self.tokens.iter().map(|t| t.logprob)
    }

    pub fn is_well_formed(&self) -> bool {
        let joined: String = self.tokens.iter().map(|t| t.text.as_str()).collect();
        joined == self.text
            && self.tokens.iter().all(|t| t.logprob <= 0.0 && !t.logprob.is_nan())
            && (!self.tokens.is_empty()
                || (self.finish_reason == FinishReason::BackendStop && self.text.is_empty()))
    }

    /// Keeps the text before byte offset `at`. The token straddling the cut is
    /// shortened and keeps its log-probability; later tokens are dropped.
    pub fn truncate(&mut self, at: usize) {
        if at >= self.text.len() {
            return;
        }
        let mut kept = Vec::new();
        let mut offset = 0;
        for mut token in self.tokens.drain(..) {
            if offset >= at {
                break;
            }
            let end = offset + token.text.len();
            if end > at {
                token.text.truncate(at - offset);
            }
            offset = end;
            kept.push(token);
        }
        self.tokens = kept;
        self.text.truncate(at);
        self.finish_reason = if self.tokens.is_empty() {
            FinishReason::BackendStop
        } else {
            FinishReason::Stop
        };
    }
}

/// Applies literal and structural stop rules to a backend result.
pub fn apply_stop_rules(result: &mut GenerationResult, rules: &[StopRule], language: Language) {
    let mut cut: Option<usize> = None;
    let mut earliest = |at: usize| cut = Some(cut.map_or(at, |c: usize| c.min(at)));
    for rule in rules {
        match rule {
            StopRule::Literal(s) if !s.is_empty() => {
                if let Some(at) = result.text.find(s.as_str()) {
                    earliest(at);
                }
            }
            StopRule::Literal(_) => {}
            StopRule::FirstLine => {
                if let Some(at) = result.text.find('\n') {
                    earliest(at);
                }
            }
            StopRule::EndOfFunction => {
                let lead = result.text.len() - result.text.trim_start_matches(['\n', '\r']).len();
                if let Some(end) = assemble::function_end(&result.text[lead..], language) {
                    earliest(lead + end);
                }
            }
        }
    }
    if let Some(at) = cut {
        result.truncate(at);
    }
}

/// Body of a completion request, in the common completions-API shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: Option<String>,
    pub prompt: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suffix: Option<String>,
    pub n: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub stop: Vec<String>,
    pub logprobs: u32,
    /// Sample index of the first result; not sent over the wire.
    #[serde(skip)]
    pub first_sample: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
    #[error("backend returned no token log-probabilities")]
    NoLogprobs,
    #[error("prompt of {prompt_chars} characters exceeds the backend context window of {limit}")]
    ContextWindow { prompt_chars: usize, limit: usize },
    #[error("backend unreachable after {attempts} attempts: {last}")]
    Unreachable { attempts: usize, last: String },
    #[error("backend returned {got} samples, expected {expected}")]
    WrongCount { got: usize, expected: usize },
}

/// A completion backend. Implementations must be callable from several
/// threads at once.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<GenerationResult>, BackendError>;

    /// Largest `n` accepted in one request.
    fn max_batch(&self) -> usize {
        1
    }

    /// Prompt length limit in characters (prompt plus suffix).
    fn context_window(&self) -> Option<usize> {
        None
    }
}

/// Prompt text and suffix as sent to a backend.
pub fn request_for(
    prompt: &PromptSpec,
    config: &SamplingConfig,
    model: Option<&str>,
) -> CompletionRequest {
    CompletionRequest {
        model: model.map(str::to_string),
        prompt: prompt.text.clone(),
        suffix: prompt.suffix_text.clone(),
        n: config.num_samples,
        temperature: config.temperature,
        top_p: config.top_p,
        max_tokens: config.max_new_tokens,
        stop: prompt.literal_stops(),
        logprobs: 1,
        first_sample: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(parts: &[(&str, f64)]) -> GenerationResult {
        GenerationResult::from_tokens(
            parts
                .iter()
                .map(|(t, l)| Token {
                    text: t.to_string(),
                    logprob: *l,
                })
                .collect(),
            FinishReason::Length,
        )
    }

    #[test]
    fn defaults() {
        let c = SamplingConfig::default();
        assert_eq!((c.top_p, c.temperature, c.num_samples), (0.95, 0.8, 200));
        assert_eq!(SamplingConfig::for_setting(RepairSetting::Infill).max_new_tokens, 128);
        assert_eq!(
            SamplingConfig::for_setting(RepairSetting::SingleLineGenerative).max_new_tokens,
            64
        );
        assert!(c.problems().is_empty());
    }

    #[test]
    fn invalid_config_lists_every_problem() {
        let c = SamplingConfig {
            top_p: 0.0,
            temperature: -1.0,
            num_samples: 0,
            max_new_tokens: 0,
        };
        assert_eq!(c.problems().len(), 4);
    }

    #[test]
    fn truncate_cuts_the_straddling_token() {
        let mut g = toks(&[("ret", -0.1), ("urn x;\nfoo", -0.2), (" bar", -0.3)]);
        g.truncate(9);
        assert_eq!(g.text, "return x;");
        assert_eq!(g.tokens.len(), 2);
        assert_eq!(g.tokens[1].text, "urn x;");
        assert_eq!(g.finish_reason, FinishReason::Stop);
        assert!(g.is_well_formed());
    }

    #[test]
    fn stop_rules_pick_the_earliest_cut() {
        let mut g = toks(&[("int f() {\n", -0.1), ("}\n", -0.1), ("\n// Buggy Function\n", -0.5)]);
        apply_stop_rules(
            &mut g,
            &[
                StopRule::Literal("// Buggy Function".into()),
                StopRule::EndOfFunction,
            ],
            Language::C,
        );
        assert_eq!(g.text, "int f() {\n}\n");

        let mut g = toks(&[("x = 1", -0.1), ("\ny = 2", -0.1)]);
        apply_stop_rules(&mut g, &[StopRule::FirstLine], Language::Python);
        assert_eq!(g.text, "x = 1");
        assert_eq!(g.tokens.len(), 1);
    }

    #[test]
    fn request_omits_internal_fields() {
        let prompt = PromptSpec {
            setting: RepairSetting::Infill,
            language: Language::C,
            text: "a".into(),
            infill_marker: Some(1),
            suffix_text: Some("b".into()),
            stop_criteria: vec![StopRule::Literal("\n".into()), StopRule::FirstLine],
        };
        let req = request_for(&prompt, &SamplingConfig::default(), Some("m"));
        let json = serde_json::to_value(&req).unwrap();
        assert_eq!(json["suffix"], "b");
        assert_eq!(json["stop"], serde_json::json!(["\n"]));
        assert_eq!(json["logprobs"], 1);
        assert!(json.get("first_sample").is_none());
    }
}
