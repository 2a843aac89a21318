//! Effective run configuration: command-line flags over a TOML file over
//! built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use apr_core::pipeline::{BackendConfig, RunConfig};
use apr_core::prompt::{InfillStyle, RepairSetting};
use apr_core::rank::StrategyKind;
use clap::{Args, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InfillStyleArg {
    Marker,
    SuffixParameter,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with any `RunConfig` fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Benchmark manifest (JSON lines).
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Completion endpoint URL for the http backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to the http backend.
    #[arg(long)]
    pub model: Option<String>,
    /// Response script for the mock backend; defaults to `mock.jsonl` beside
    /// the manifest.
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    /// Artificial latency per mock call.
    #[arg(long)]
    pub mock_delay_ms: Option<u64>,
    /// Comma-separated repair settings.
    #[arg(long, value_delimiter = ',')]
    pub settings: Option<Vec<RepairSetting>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
    #[arg(long)]
    pub strategy: Option<StrategyKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample template variants at every changed location (infill setting).
    #[arg(long)]
    pub templates: bool,
    /// Validations per bug and setting.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Stop validating a bug at its first plausible patch.
    #[arg(long)]
    pub early_exit: bool,
    #[arg(long)]
    pub parallel_gen: Option<usize>,
    #[arg(long)]
    pub parallel_validate: Option<usize>,
    #[arg(long, value_enum)]
    pub infill_style: Option<InfillStyleArg>,
    /// Character limit for complete-function prompts.
    #[arg(long)]
    pub prompt_char_budget: Option<usize>,
}

fn read_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
}

/// Stored paths outlive the working directory they were given in.
fn absolute(path: &Path) -> PathBuf {
    path.canonicalize().unwrap_or_else(|_| path.to_path_buf())
}

fn default_script(benchmark: &Path) -> PathBuf {
    benchmark
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("mock.jsonl")
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => read_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.benchmark {
            c.benchmark = v.clone();
        }
        self.apply_backend(&mut c)?;
        c.benchmark = absolute(&c.benchmark);
        if let BackendConfig::Mock { script, .. } = &mut c.backend {
            *script = absolute(script);
        }
        if let Some(v) = &self.settings {
            c.settings = v.clone();
        }
        if let Some(v) = self.samples {
            c.num_samples = v;
        }
        if let Some(v) = self.temperature {
            c.temperature = v;
        }
        if let Some(v) = self.top_p {
            c.top_p = v;
        }
        if let Some(v) = self.max_new_tokens {
            c.max_new_tokens = Some(v);
        }
        if let Some(v) = self.strategy {
            c.strategy = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.templates |= self.templates;
        if let Some(v) = self.budget {
            c.budget = Some(v);
        }
        c.early_exit |= self.early_exit;
        if let Some(v) = self.parallel_gen {
            c.parallel_gen = v;
        }
        if let Some(v) = self.parallel_validate {
            c.parallel_validate = v;
        }
        if let Some(v) = self.infill_style {
            c.infill_style = match v {
                InfillStyleArg::Marker => InfillStyle::Marker,
                InfillStyleArg::SuffixParameter => InfillStyle::SuffixParameter,
            };
        }
        if let Some(v) = self.prompt_char_budget {
            c.prompt_char_budget = Some(v);
        }
        Ok(c)
    }

    fn apply_backend(&self, c: &mut RunConfig) -> Result<()> {
        match self.backend {
            Some(BackendKind::Mock) if !matches!(c.backend, BackendConfig::Mock { .. }) => {
                c.backend = BackendConfig::Mock {
                    script: PathBuf::new(),
                    call_delay_ms: 0,
                    max_batch: 16,
                };
            }
            Some(BackendKind::Http) if !matches!(c.backend, BackendConfig::Http { .. }) => {
                c.backend = RunConfig::default().backend;
            }
            _ => {}
        }
        match &mut c.backend {
            BackendConfig::Mock {
                script,
                call_delay_ms,
                ..
            } => {
                if self.endpoint.is_some() || self.model.is_some() {
                    bail!("--endpoint and --model apply to the http backend only");
                }
                if let Some(v) = &self.mock_script {
                    *script = v.clone();
                }
                if script.as_os_str().is_empty() && !c.benchmark.as_os_str().is_empty() {
                    *script = default_script(&c.benchmark);
                }
                if let Some(v) = self.mock_delay_ms {
                    *call_delay_ms = v;
                }
            }
            BackendConfig::Http {
                endpoint, model, ..
            } => {
                if self.mock_script.is_some() || self.mock_delay_ms.is_some() {
                    bail!("--mock-script and --mock-delay-ms apply to the mock backend only");
                }
                if let Some(v) = &self.endpoint {
                    *endpoint = v.clone();
                }
                if let Some(v) = &self.model {
                    *model = Some(v.clone());
                }
            }
        }
        Ok(())
    }
}
