//! Completions-over-HTTP backend.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest, FinishReason, GenerationResult, Token};

pub const API_KEY_ENV: &str = "APR_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: Option<String>,
    /// Samples per request.
    pub max_batch: usize,
    pub context_window: Option<usize>,
    pub request_timeout: Duration,
}

pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct WireLogprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct WireChoice {
    #[serde(default)]
    index: usize,
    text: String,
    logprobs: Option<WireLogprobs>,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

fn convert_choice(choice: WireChoice) -> Result<GenerationResult, BackendError> {
    let lp = choice.logprobs.ok_or(BackendError::NoLogprobs)?;
    if lp.tokens.len() != lp.token_logprobs.len() {
        return Err(BackendError::NoLogprobs);
    }
    let tokens = lp
        .tokens
        .into_iter()
        .zip(lp.token_logprobs)
        .map(|(text, logprob)| {
            logprob
                .map(|l| Token {
                    text,
                    logprob: l.min(0.0),
                })
                .ok_or(BackendError::NoLogprobs)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let finish = match choice.finish_reason.as_deref() {
        Some("length") => FinishReason::Length,
        Some("stop") if !tokens.is_empty() => FinishReason::Stop,
        _ => FinishReason::BackendStop,
    };
    let result = GenerationResult::from_tokens(tokens, finish);
    if result.text != choice.text {
        return Err(BackendError::Fatal(
            "choice text does not match its token list".into(),
        ));
    }
    Ok(result)
}

impl HttpBackend {
    /// Reads the API key from [`API_KEY_ENV`] when set.
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.request_timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        HttpBackend {
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            config,
            agent,
        }
    }

    fn parse(body: &str) -> Result<Vec<GenerationResult>, BackendError> {
        let mut response: WireResponse = serde_json::from_str(body)
            .map_err(|e| BackendError::Fatal(format!("unreadable response: {e}")))?;
        response.choices.sort_by_key(|c| c.index);
        response.choices.into_iter().map(convert_choice).collect()
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<GenerationResult>, BackendError> {
        let mut call = self
            .agent
            .post(&self.config.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call
            .send_json(request)
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transient(e.to_string()))?;
        match status {
            200..=299 => Self::parse(&body),
            429 | 500..=599 => Err(BackendError::Transient(format!("HTTP {status}: {body}"))),
            _ => Err(BackendError::Fatal(format!("HTTP {status}: {body}"))),
        }
    }

    fn max_batch(&self) -> usize {
        self.config.max_batch.max(1)
    }

    fn context_window(&self) -> Option<usize> {
        self.config.context_window
    }
}
