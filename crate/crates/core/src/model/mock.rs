//! Scripted backend for tests and offline runs.

use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest, FinishReason, GenerationResult, Token};

/// Selects the requests a scripted rule answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMatcher {
    Any,
    Exact(String),
    Contains(String),
    SuffixContains(String),
    All(Vec<PromptMatcher>),
    Not(Box<PromptMatcher>),
}

impl PromptMatcher {
    pub fn matches(&self, prompt: &str, suffix: Option<&str>) -> bool {
        match self {
            PromptMatcher::Any => true,
            PromptMatcher::Exact(t) => prompt == t,
            PromptMatcher::Contains(t) => prompt.contains(t.as_str()),
            PromptMatcher::SuffixContains(t) => suffix.is_some_and(|s| s.contains(t.as_str())),
            PromptMatcher::All(ms) => ms.iter().all(|m| m.matches(prompt, suffix)),
            PromptMatcher::Not(m) => !m.matches(prompt, suffix),
        }
    }
}

/// A scripted completion. `logprobs` has one entry per token of the mock's
/// segmentation of `text` (see [`segment`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockResponse {
    pub text: String,
    pub logprobs: Vec<f64>,
}

impl MockResponse {
    /// Every token gets the same log-probability.
    pub fn uniform(text: &str, logprob: f64) -> Self {
        MockResponse {
            text: text.to_string(),
            logprobs: vec![logprob; segment(text).len()],
        }
    }
}

/// Splits text into tokens of leading whitespace plus one non-whitespace run.
/// Trailing whitespace joins the last token; whitespace-only text is a single
/// token and empty text has none.
pub fn segment(text: &str) -> Vec<&str> {
    let mut tokens: Vec<&str> = Vec::new();
    let mut start = 0;
    let mut seen_word = false;
    let mut ws_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if seen_word && ws_start.is_none() {
                ws_start = Some(i);
            }
        } else {
            if let Some(ws) = ws_start.take() {
                tokens.push(&text[start..ws]);
                start = ws;
            }
            seen_word = true;
        }
    }
    if start < text.len() {
        tokens.push(&text[start..]);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub matcher: PromptMatcher,
    pub responses: Vec<MockResponse>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unmatched {
    #[default]
    Error,
    Respond(MockResponse),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockOptions {
    pub unmatched: Unmatched,
    /// Sleep per request.
    pub call_delay: Duration,
    pub max_batch: usize,
    /// The first this-many requests fail with a transient error.
    pub fail_first: usize,
    pub context_window: Option<usize>,
}

impl Default for MockOptions {
    fn default() -> Self {
        MockOptions {
            unmatched: Unmatched::Error,
            call_delay: Duration::ZERO,
            max_batch: 16,
            fail_first: 0,
            context_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MockError {
    #[error("matcher {0:?} overlaps an existing rule")]
    Overlap(PromptMatcher),
    #[error("rule for {0:?} has no responses")]
    NoResponses(PromptMatcher),
    #[error("response `{text}` has {tokens} tokens but {logprobs} log-probabilities")]
    Misaligned {
        text: String,
        tokens: usize,
        logprobs: usize,
    },
    #[error("log-probability {0} is positive or NaN")]
    BadLogprob(f64),
    #[error("mock script line {line}: {message}")]
    Script { line: usize, message: String },
}

/// Deterministic backend answering from scripted rules.
///
/// Sample `k` of a matching request receives response `k % len` of its rule,
/// so results do not depend on batching or thread interleaving. At temperature
/// 0 every sample receives the first response.
#[derive(Debug, Default)]
pub struct MockBackend {
    rules: RwLock<Vec<MockRule>>,
    options: MockOptions,
    calls: AtomicUsize,
}

fn check_response(r: &MockResponse) -> Result<(), MockError> {
    let tokens = segment(&r.text).len();
    if tokens != r.logprobs.len() {
        return Err(MockError::Misaligned {
            text: r.text.clone(),
            tokens,
            logprobs: r.logprobs.len(),
        });
    }
    if let Some(&bad) = r.logprobs.iter().find(|l| !(**l <= 0.0)) {
        return Err(MockError::BadLogprob(bad));
    }
    Ok(())
}

impl MockBackend {
    pub fn new(options: MockOptions) -> Self {
        if let Unmatched::Respond(r) = &options.unmatched {
            check_response(r).expect("default mock response must be well formed");
        }
        MockBackend {
            rules: RwLock::new(Vec::new()),
            options,
            calls: AtomicUsize::new(0),
        }
    }

    /// Adds a rule. Requests it matches cycle through `responses`.
    pub fn mock_script(
        &self,
        matcher: PromptMatcher,
        responses: Vec<MockResponse>,
    ) -> Result<(), MockError> {
        if responses.is_empty() {
            return Err(MockError::NoResponses(matcher));
        }
        for r in &responses {
            check_response(r)?;
        }
        let mut rules = self.rules.write().expect("lock");
        let clash = rules.iter().any(|r| {
            r.matcher == matcher
                || r.matcher == PromptMatcher::Any
                || matcher == PromptMatcher::Any
        });
        if clash {
            return Err(MockError::Overlap(matcher));
        }
        rules.push(MockRule { matcher, responses });
        Ok(())
    }

    /// Loads rules from a JSON-lines script, one [`MockRule`] per line.
    pub fn load_script(&self, path: &Path) -> Result<usize, MockError> {
        let file = std::fs::File::open(path).map_err(|e| MockError::Script {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        let mut count = 0;
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| MockError::Script {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rule: MockRule = serde_json::from_str(&line).map_err(|e| MockError::Script {
                line: i + 1,
                message: e.to_string(),
            })?;
            self.mock_script(rule.matcher, rule.responses)?;
            count += 1;
        }
        Ok(count)
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn respond(response: &MockResponse, request: &CompletionRequest) -> GenerationResult {
        let mut tokens: Vec<Token> = segment(&response.text)
            .into_iter()
            .zip(&response.logprobs)
            .map(|(text, &logprob)| Token {
                text: text.to_string(),
                logprob,
            })
            .collect();
        let mut finish = FinishReason::BackendStop;
        if tokens.len() > request.max_tokens as usize {
            tokens.truncate(request.max_tokens as usize);
            finish = FinishReason::Length;
        }
        let mut result = GenerationResult::from_tokens(tokens, finish);
        let cut = request
            .stop
            .iter()
            .filter(|s| !s.is_empty())
            .filter_map(|s| result.text.find(s.as_str()))
            .min();
        if let Some(at) = cut {
            result.truncate(at);
        }
        result
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<GenerationResult>, BackendError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.options.call_delay.is_zero() {
            std::thread::sleep(self.options.call_delay);
        }
        if call < self.options.fail_first {
            return Err(BackendError::Transient(format!("scripted failure {}", call + 1)));
        }
        let rules = self.rules.read().expect("lock");
        let matching: Vec<&MockRule> = rules
            .iter()
            .filter(|r| r.matcher.matches(&request.prompt, request.suffix.as_deref()))
            .collect();
        let responses: &[MockResponse] = match (matching.as_slice(), &self.options.unmatched) {
            ([rule], _) => &rule.responses,
            ([], Unmatched::Respond(r)) => std::slice::from_ref(r),
            ([], Unmatched::Error) => {
                return Err(BackendError::Fatal("mock: no rule matches the prompt".into()))
            }
            (many, _) => {
                return Err(BackendError::Fatal(format!(
                    "mock: {} rules match the prompt",
                    many.len()
                )))
            }
        };
        Ok((0..request.n)
            .map(|k| {
                let index = if request.temperature == 0.0 {
                    0
                } else {
                    (request.first_sample + k) % responses.len()
                };
                Self::respond(&responses[index], request)
            })
            .collect())
    }

    fn max_batch(&self) -> usize {
        self.options.max_batch.max(1)
    }

    fn context_window(&self) -> Option<usize> {
        self.options.context_window
    }
}
