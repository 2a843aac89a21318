use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{apply_stop_rules, request_for, Backend, BackendError, GenerationResult, SamplingConfig};
use crate::prompt::PromptSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateOptions {
    /// Requests in flight at once.
    pub parallelism: usize,
    /// Extra attempts allowed per request after transient failures.
    pub retry_budget: usize,
    pub model: Option<String>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            parallelism: 1,
            retry_budget: 3,
            model: None,
        }
    }
}

/// Wall-clock time of one backend request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallTiming {
    pub first_sample: usize,
    pub samples: usize,
    pub attempts: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Exactly `num_samples` results, in sample-index order.
    pub results: Vec<GenerationResult>,
    pub calls: Vec<CallTiming>,
    /// Elapsed time of the whole `generate` call.
    pub wall_seconds: f64,
}

fn check_results(results: &[GenerationResult], expected: usize) -> Result<(), BackendError> {
    if results.len() != expected {
        return Err(BackendError::WrongCount {
            got: results.len(),
            expected,
        });
    }
    if let Some(i) = results.iter().position(|r| !r.is_well_formed()) {
        return Err(BackendError::Fatal(format!(
            "result {i} has positive log-probabilities or text that does not match its tokens"
        )));
    }
    Ok(())
}

/// Samples `config.num_samples` generations for `prompt`.
///
/// Samples are requested in batches of the backend's `max_batch`, with at most
/// `options.parallelism` requests in flight. A request failing transiently is
/// retried in place, so each sample slot is filled exactly once. Structural
/// stop rules are applied to every result before it is returned.
pub fn generate(
    prompt: &PromptSpec,
    config: &SamplingConfig,
    backend: &dyn Backend,
    options: &GenerateOptions,
) -> Result<Generation, BackendError> {
    let started = Instant::now();
    let base = request_for(prompt, config, options.model.as_deref());
    if let Some(limit) = backend.context_window() {
        let prompt_chars =
            base.prompt.chars().count() + base.suffix.as_ref().map_or(0, |s| s.chars().count());
        if prompt_chars > limit {
            return Err(BackendError::ContextWindow {
                prompt_chars,
                limit,
            });
        }
    }

    let batch = backend.max_batch().max(1);
    let chunks: Vec<(usize, usize)> = (0..config.num_samples)
        .step_by(batch)
        .map(|start| (start, batch.min(config.num_samples - start)))
        .collect();
    let slots: Mutex<Vec<Option<GenerationResult>>> = Mutex::new(vec![None; config.num_samples]);
    let calls: Mutex<Vec<CallTiming>> = Mutex::new(Vec::new());
    let failure: Mutex<Option<BackendError>> = Mutex::new(None);
    let next = AtomicUsize::new(0);

    let worker = || loop {
        if failure.lock().expect("lock").is_some() {
            return;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(first, count)) = chunks.get(i) else {
            return;
        };
        let request = super::CompletionRequest {
            n: count,
            first_sample: first,
            ..base.clone()
        };
        let call_start = Instant::now();
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            match backend
                .complete(&request)
                .and_then(|r| check_results(&r, count).map(|_| r))
            {
                Ok(results) => break Ok(results),
                Err(BackendError::Transient(msg)) => {
                    tracing::warn!(attempt = attempts, "{msg}");
                    if attempts > options.retry_budget {
                        break Err(BackendError::Unreachable {
                            attempts,
                            last: msg,
                        });
                    }
                }
                Err(e) => break Err(e),
            }
        };
        match outcome {
            Ok(results) => {
                let mut slots = slots.lock().expect("lock");
                for (offset, mut result) in results.into_iter().enumerate() {
                    apply_stop_rules(&mut result, &prompt.stop_criteria, prompt.language);
                    slots[first + offset] = Some(result);
                }
                calls.lock().expect("lock").push(CallTiming {
                    first_sample: first,
                    samples: count,
                    attempts,
                    seconds: call_start.elapsed().as_secs_f64(),
                });
            }
            Err(e) => {
                failure.lock().expect("lock").get_or_insert(e);
                return;
            }
        }
    };

    let threads = options.parallelism.clamp(1, chunks.len().max(1));
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(worker);
            }
        });
    }

    if let Some(e) = failure.into_inner().expect("lock") {
        return Err(e);
    }
    let results = slots
        .into_inner()
        .expect("lock")
        .into_iter()
        .map(|s| s.expect("every chunk filled its slots"))
        .collect();
    let mut calls = calls.into_inner().expect("lock");
    calls.sort_by_key(|c| c.first_sample);
    Ok(Generation {
        results,
        calls,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}
