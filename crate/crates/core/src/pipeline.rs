//! End-to-end runs: prompt, sample, assemble, filter, rank and validate every
//! bug under every enabled setting, persisting each stage in a run directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use similar::TextDiff;

use crate::artifacts::{
    read_json, read_jsonl, write_atomic, write_json, write_jsonl, ArtifactError, FilterRecord,
    GenerationLog,
    Plan, PromptRecord, RankingRecord, RunLayout, SampleRecord, SkippedUnit, UnitId,
    ValidationEntry,
};
use crate::assemble::{
    assemble_function, assemble_infill, assemble_single_line, assemble_template, dedupe,
    PatchCandidate, SampleKey,
};
use crate::corpus::{enumerate_locations, load_benchmark, reference_diff, Bug, CorpusError, LineSpan};
use crate::filter::{filter_candidates, SemanticCheck};
use crate::model::{
    generate, Backend, BackendError, GenerateOptions, HttpBackend, HttpConfig, MockBackend,
    MockOptions, SamplingConfig,
};
use crate::prompt::{
    build_function_prompt_within, build_infill_prompt, build_single_line_prompt, examples_for,
    InfillStyle, PromptSpec, RepairSetting, SingleLineMode,
};
use crate::rank::{score_entropies, validation_order, RankingStrategy, StrategyKind};
use crate::report::{self, RunReport};
use crate::templates::{allocate_samples, apply_template, generate_templates, sample_index, TemplateInstance};
use crate::validate::{
    sanity_gates, validate_candidate, Outcome, SanityFailure, ValidateError, ValidationLog,
    WorkspacePool,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Mock {
        script: PathBuf,
        #[serde(default)]
        call_delay_ms: u64,
        #[serde(default = "default_mock_batch")]
        max_batch: usize,
    },
    Http {
        endpoint: String,
        #[serde(default)]
        model: Option<String>,
        #[serde(default = "default_http_batch")]
        max_batch: usize,
        #[serde(default)]
        context_window: Option<usize>,
        #[serde(default = "default_request_timeout")]
        request_timeout_seconds: u64,
    },
}

fn default_mock_batch() -> usize {
    16
}

fn default_http_batch() -> usize {
    10
}

fn default_request_timeout() -> u64 {
    120
}

impl BackendConfig {
    pub fn name(&self) -> &'static str {
        match self {
            BackendConfig::Mock { .. } => "mock",
            BackendConfig::Http { .. } => "http",
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            BackendConfig::Mock { script, max_batch, .. } => {
                if script.as_os_str().is_empty() {
                    out.push("mock backend needs a script".into());
                }
                if *max_batch == 0 {
                    out.push("max_batch must be positive".into());
                }
            }
            BackendConfig::Http {
                endpoint,
                max_batch,
                request_timeout_seconds,
                ..
            } => {
                if endpoint.is_empty() {
                    out.push("http backend needs an endpoint".into());
                }
                if *max_batch == 0 {
                    out.push("max_batch must be positive".into());
                }
                if *request_timeout_seconds == 0 {
                    out.push("request_timeout_seconds must be positive".into());
                }
            }
        }
        out
    }

    pub fn build(&self) -> Result<Arc<dyn Backend>, PipelineError> {
        match self {
            BackendConfig::Mock {
                script,
                call_delay_ms,
                max_batch,
            } => {
                let mock = MockBackend::new(MockOptions {
                    call_delay: Duration::from_millis(*call_delay_ms),
                    max_batch: *max_batch,
                    ..MockOptions::default()
                });
                mock.load_script(script)
                    .map_err(|e| PipelineError::Config(vec![e.to_string()]))?;
                Ok(Arc::new(mock))
            }
            BackendConfig::Http {
                endpoint,
                model,
                max_batch,
                context_window,
                request_timeout_seconds,
            } => Ok(Arc::new(HttpBackend::new(HttpConfig {
                endpoint: endpoint.clone(),
                model: model.clone(),
                max_batch: *max_batch,
                context_window: *context_window,
                request_timeout: Duration::from_secs(*request_timeout_seconds),
            }))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: PathBuf,
    pub backend: BackendConfig,
    pub settings: Vec<RepairSetting>,
    pub num_samples: usize,
    pub temperature: f64,
    pub top_p: f64,
    /// Per-setting default when unset.
    pub max_new_tokens: Option<u32>,
    pub strategy: StrategyKind,
    pub seed: u64,
    /// Enumerate fix locations and sample template variants in the infill
    /// setting.
    pub templates: bool,
    /// Validations per bug and setting; unlimited when unset.
    pub budget: Option<usize>,
    /// Stop validating a unit at its first plausible patch.
    pub early_exit: bool,
    pub parallel_gen: usize,
    pub parallel_validate: usize,
    pub retry_budget: usize,
    pub infill_style: InfillStyle,
    /// Character limit for complete-function prompts.
    pub prompt_char_budget: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sampling = SamplingConfig::default();
        RunConfig {
            benchmark: PathBuf::new(),
            backend: BackendConfig::Http {
                endpoint: String::new(),
                model: None,
                max_batch: default_http_batch(),
                context_window: None,
                request_timeout_seconds: default_request_timeout(),
            },
            settings: RepairSetting::ALL.to_vec(),
            num_samples: sampling.num_samples,
            temperature: sampling.temperature,
            top_p: sampling.top_p,
            max_new_tokens: None,
            strategy: StrategyKind::SumEntropy,
            seed: 0,
            templates: false,
            budget: None,
            early_exit: false,
            parallel_gen: 1,
            parallel_validate: 1,
            retry_budget: GenerateOptions::default().retry_budget,
            infill_style: InfillStyle::default(),
            prompt_char_budget: None,
        }
    }
}

impl RunConfig {
    pub fn sampling_for(&self, setting: RepairSetting) -> SamplingConfig {
        SamplingConfig {
            top_p: self.top_p,
            temperature: self.temperature,
            num_samples: self.num_samples,
            max_new_tokens: self
                .max_new_tokens
                .unwrap_or_else(|| setting.default_max_new_tokens()),
        }
    }

    /// Every problem with the configuration, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.benchmark.as_os_str().is_empty() {
            out.push("no benchmark manifest given".into());
        }
        out.extend(self.backend.problems());
        if self.settings.is_empty() {
            out.push("no repair settings enabled".into());
        }
        for (i, s) in self.settings.iter().enumerate() {
            if self.settings[..i].contains(s) {
                out.push(format!("setting {s} listed twice"));
            }
        }
        out.extend(self.sampling_for(RepairSetting::CompleteFunction).problems());
        if self.budget == Some(0) {
            out.push("budget must be positive".into());
        }
        if self.parallel_gen == 0 {
            out.push("parallel_gen must be positive".into());
        }
        if self.parallel_validate == 0 {
            out.push("parallel_validate must be positive".into());
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("sanity gates failed:\n  {}", .0.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("\n  "))]
    Sanity(Vec<SanityFailure>),
    #[error("{bug_id} ({setting}): {source}")]
    Backend {
        bug_id: String,
        setting: RepairSetting,
        source: BackendError,
    },
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("{0}")]
    StageOrder(String),
}

impl PipelineError {
    /// 1 configuration, 2 sanity gates, 3 backend.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Sanity(_) => 2,
            PipelineError::Backend { .. } => 3,
            _ => 1,
        }
    }
}

/// A run directory bound to its configuration and loaded benchmark.
pub struct Run {
    layout: RunLayout,
    config: RunConfig,
    bugs: Vec<Bug>,
    index: HashMap<String, usize>,
}

impl Run {
    /// Starts or continues a run in `dir`. An existing directory must hold
    /// the same configuration.
    pub fn create(dir: &Path, config: RunConfig) -> Result<Run, PipelineError> {
        let problems = config.problems();
        if !problems.is_empty() {
            return Err(PipelineError::Config(problems));
        }
        let layout = RunLayout::new(dir);
        if layout.config().exists() {
            let existing: RunConfig = read_json(&layout.config())?;
            if existing != config {
                return Err(PipelineError::Config(vec![format!(
                    "{} already holds a run with a different configuration",
                    dir.display()
                )]));
            }
        }
        let run = Run::load(layout, config)?;
        write_json(&run.layout.config(), &run.config)?;
        Ok(run)
    }

    /// Reopens a run using the configuration stored in it.
    pub fn open(dir: &Path) -> Result<Run, PipelineError> {
        let layout = RunLayout::new(dir);
        if !layout.config().exists() {
            return Err(PipelineError::StageOrder(format!(
                "{} is not a run directory (no config.json)",
                dir.display()
            )));
        }
        let config: RunConfig = read_json(&layout.config())?;
        Run::load(layout, config)
    }

    fn load(layout: RunLayout, config: RunConfig) -> Result<Run, PipelineError> {
        let bugs = load_benchmark(&config.benchmark)?;
        let index = bugs
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id().to_string(), i))
            .collect();
        Ok(Run {
            layout,
            config,
            bugs,
            index,
        })
    }

    pub fn layout(&self) -> &RunLayout {
        &self.layout
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn bugs(&self) -> &[Bug] {
        &self.bugs
    }

    fn bug(&self, id: &str) -> &Bug {
        &self.bugs[self.index[id]]
    }

    /// Every bug x setting pair, skipping single-line settings for
    /// multi-line hunks.
    pub fn plan(&self) -> Result<Plan, PipelineError> {
        let mut plan = Plan::default();
        for bug in &self.bugs {
            for &setting in &self.config.settings {
                let lines = bug.record.hunk_span.len();
                if setting.is_single_line() && lines != 1 {
                    plan.skipped.push(SkippedUnit {
                        bug_id: bug.id().to_string(),
                        setting,
                        reason: format!("hunk spans {lines} lines"),
                    });
                } else {
                    plan.units.push(UnitId {
                        bug_id: bug.id().to_string(),
                        setting,
                    });
                }
            }
        }
        write_json(&self.layout.plan(), &plan)?;
        Ok(plan)
    }

    /// Runs both sanity gates unless a previous run recorded a pass.
    pub fn sanity(&self) -> Result<(), PipelineError> {
        let path = self.layout.sanity();
        if path.exists() {
            let failures: Vec<SanityFailure> = read_json(&path)?;
            if failures.is_empty() {
                return Ok(());
            }
        }
        let failures = sanity_gates(&self.bugs, self.config.parallel_validate)?;
        write_json(&path, &failures)?;
        if failures.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Sanity(failures))
        }
    }

    fn prompts_for(&self, bug: &Bug, setting: RepairSetting) -> Result<Vec<PromptRecord>, PipelineError> {
        let n = self.config.num_samples;
        let lang = bug.language();
        let style = self.config.infill_style;
        let slices = bug.slices()?;
        let whole = |spec: PromptSpec| PromptRecord {
            prompt_id: 0,
            location: None,
            template: None,
            sample_indices: (0..n).collect(),
            spec,
        };
        let not_single = |e| PipelineError::StageOrder(format!("{}: {e}", bug.id()));
        Ok(match setting {
            RepairSetting::CompleteFunction => {
                let spec = build_function_prompt_within(
                    &slices,
                    &examples_for(bug),
                    lang,
                    self.config.prompt_char_budget,
                )
                .map_err(not_single)?;
                vec![whole(spec)]
            }
            RepairSetting::Infill if self.config.templates => self.template_prompts(bug)?,
            RepairSetting::Infill => vec![whole(build_infill_prompt(&slices, lang, style))],
            RepairSetting::SingleLineInfill => vec![whole(
                build_single_line_prompt(&slices, SingleLineMode::Infill, lang, style)
                    .map_err(not_single)?,
            )],
            RepairSetting::SingleLineGenerative => vec![whole(
                build_single_line_prompt(&slices, SingleLineMode::Generative, lang, style)
                    .map_err(not_single)?,
            )],
        })
    }

    /// One prompt per template per changed location. Every location gets the
    /// full sample count, dealt round-robin over its templates.
    fn template_prompts(&self, bug: &Bug) -> Result<Vec<PromptRecord>, PipelineError> {
        let n = self.config.num_samples;
        let lang = bug.language();
        let locations = enumerate_locations(bug, &reference_diff(bug))?;
        let mut out = Vec::new();
        for (li, &location) in locations.iter().enumerate() {
            let slices = bug.slices_at(location)?;
            let mut instances = if location.len() == 1 {
                generate_templates(&slices.buggy_hunk, lang)
            } else {
                Vec::new()
            };
            if instances.is_empty() {
                instances.push(TemplateInstance::identity());
            }
            let k = instances.len();
            for (j, (instance, count)) in instances
                .into_iter()
                .zip(allocate_samples(n, k))
                .enumerate()
            {
                if count == 0 {
                    continue;
                }
                let spec = apply_template(&slices, &instance, lang, self.config.infill_style);
                out.push(PromptRecord {
                    prompt_id: out.len(),
                    location: Some(location),
                    template: Some(instance),
                    sample_indices: (0..count).map(|r| li * n + sample_index(j, r, k)).collect(),
                    spec,
                });
            }
        }
        Ok(out)
    }

    fn has_generations(&self, unit: &UnitId) -> bool {
        self.layout.generations(unit).exists()
    }

    /// Samples every prompt of a unit unless its generations are on disk.
    pub fn generate_unit(&self, unit: &UnitId, backend: &dyn Backend) -> Result<(), PipelineError> {
        if self.has_generations(unit) {
            return Ok(());
        }
        let bug = self.bug(&unit.bug_id);
        let prompts = self.prompts_for(bug, unit.setting)?;
        let options = GenerateOptions {
            parallelism: self.config.parallel_gen,
            retry_budget: self.config.retry_budget,
            model: match &self.config.backend {
                BackendConfig::Http { model, .. } => model.clone(),
                BackendConfig::Mock { .. } => None,
            },
        };
        let mut samples = Vec::new();
        let mut log = GenerationLog {
            bug_id: unit.bug_id.clone(),
            setting: unit.setting,
            samples: 0,
            wall_seconds: 0.0,
            calls: Vec::new(),
        };
        for prompt in &prompts {
            let sampling = SamplingConfig {
                num_samples: prompt.sample_indices.len(),
                ..self.config.sampling_for(unit.setting)
            };
            let generation =
                generate(&prompt.spec, &sampling, backend, &options).map_err(|source| {
                    PipelineError::Backend {
                        bug_id: unit.bug_id.clone(),
                        setting: unit.setting,
                        source,
                    }
                })?;
            log.samples += generation.results.len();
            log.wall_seconds += generation.wall_seconds;
            log.calls.extend(generation.calls);
            for (&sample_index, result) in prompt.sample_indices.iter().zip(generation.results) {
                samples.push(SampleRecord {
                    sample_index,
                    prompt_id: prompt.prompt_id,
                    result,
                });
            }
        }
        samples.sort_by_key(|s| s.sample_index);
        tracing::info!(bug = %unit.bug_id, setting = %unit.setting, samples = samples.len(), "generated");
        write_jsonl(&self.layout.prompts(unit), &prompts)?;
        write_json(&self.layout.generation_log(unit), &log)?;
        write_jsonl(&self.layout.generations(unit), &samples)?;
        Ok(())
    }

    fn assemble_unit(&self, unit: &UnitId) -> Result<Vec<PatchCandidate>, PipelineError> {
        let bug = self.bug(&unit.bug_id);
        let prompts: Vec<PromptRecord> = read_jsonl(&self.layout.prompts(unit))?;
        let samples: Vec<SampleRecord> = read_jsonl(&self.layout.generations(unit))?;
        let by_id: HashMap<usize, &PromptRecord> = prompts.iter().map(|p| (p.prompt_id, p)).collect();
        let mut slices_cache: HashMap<Option<LineSpan>, _> = HashMap::new();
        let mut candidates = Vec::with_capacity(samples.len());
        for s in samples {
            let prompt = by_id.get(&s.prompt_id).ok_or_else(|| {
                PipelineError::StageOrder(format!(
                    "{}: sample {} refers to unknown prompt {}",
                    unit.bug_id, s.sample_index, s.prompt_id
                ))
            })?;
            if !slices_cache.contains_key(&prompt.location) {
                let slices = match prompt.location {
                    Some(l) => bug.slices_at(l)?,
                    None => bug.slices()?,
                };
                slices_cache.insert(prompt.location, slices);
            }
            let slices = &slices_cache[&prompt.location];
            let key = SampleKey {
                bug_id: unit.bug_id.clone(),
                setting: unit.setting,
                sample_index: s.sample_index,
            };
            let mut c = match (unit.setting, &prompt.template) {
                (RepairSetting::CompleteFunction, _) => {
                    assemble_function(key, slices, bug.language(), s.result)
                }
                (RepairSetting::Infill, Some(t)) => assemble_template(key, slices, t, s.result),
                (RepairSetting::Infill, None) => assemble_infill(key, slices, s.result),
                _ => assemble_single_line(key, slices, s.result),
            };
            c.location = prompt.location;
            score_entropies(&mut c);
            candidates.push(c);
        }
        Ok(dedupe(candidates))
    }

    fn filter_unit(&self, unit: &UnitId) -> Result<Vec<PatchCandidate>, PipelineError> {
        let path = self.layout.filtered(unit);
        if path.exists() {
            return Ok(read_jsonl(&path)?);
        }
        let bug = self.bug(&unit.bug_id);
        let mut candidates = self.assemble_unit(unit)?;
        let checks = filter_candidates(&mut candidates, bug, self.config.parallel_validate)?;
        for (c, check) in candidates.iter().zip(&checks) {
            if let Some(check @ (SemanticCheck::Pass { .. } | SemanticCheck::Failed { .. })) = check {
                write_json(&self.layout.build_log(unit, c.sample_index), check)?;
            }
        }
        let record = FilterRecord {
            semantic_checked: bug.record.build_command.is_some(),
        };
        write_json(&self.layout.filter_record(unit), &record)?;
        write_jsonl(&path, &candidates)?;
        Ok(candidates)
    }

    fn strategy_for(&self, unit: &UnitId) -> RankingStrategy {
        RankingStrategy::new(self.config.strategy, self.config.seed)
            .keyed(&format!("{}/{}", unit.bug_id, unit.setting))
    }

    fn rank_unit(&self, unit: &UnitId, filtered: &[PatchCandidate]) -> Result<RankingRecord, PipelineError> {
        let path = self.layout.ranking(unit);
        if path.exists() {
            return Ok(read_json(&path)?);
        }
        let survivors: Vec<PatchCandidate> = filtered
            .iter()
            .filter(|c| !c.status.is_filtered_out())
            .cloned()
            .collect();
        let strategy = self.strategy_for(unit);
        let record = RankingRecord {
            strategy,
            order: validation_order(&survivors, strategy),
        };
        write_json(&path, &record)?;
        Ok(record)
    }

    fn validate_unit(
        &self,
        unit: &UnitId,
        filtered: &[PatchCandidate],
        ranking: &RankingRecord,
    ) -> Result<(), PipelineError> {
        let path = self.layout.validation(unit);
        if path.exists() {
            return Ok(());
        }
        let bug = self.bug(&unit.bug_id);
        let by_index: HashMap<usize, &PatchCandidate> =
            filtered.iter().map(|c| (c.sample_index, c)).collect();
        let limit = self
            .config
            .budget
            .map_or(ranking.order.len(), |b| b.min(ranking.order.len()));
        let todo: Vec<PatchCandidate> = ranking.order[..limit]
            .iter()
            .map(|i| (*by_index[i]).clone())
            .collect();
        let pool = WorkspacePool::new(&bug.project_root, self.config.parallel_validate);
        let run_one = |ws: &mut _, c: &PatchCandidate| validate_candidate(ws, bug, c);
        let mut logs: Vec<ValidationLog> = Vec::new();
        if self.config.early_exit {
            for chunk in todo.chunks(self.config.parallel_validate) {
                let part = pool.map(chunk, run_one)?;
                let hit = part.iter().position(|l| l.result.outcome == Outcome::Plausible);
                match hit {
                    Some(p) => {
                        logs.extend(part.into_iter().take(p + 1));
                        break;
                    }
                    None => logs.extend(part),
                }
            }
        } else {
            logs = pool.map(&todo, run_one)?;
        }

        let original = bug.original_function();
        let file = bug.relative_source_path().display().to_string();
        let mut entries = Vec::with_capacity(logs.len());
        for (rank, (log, candidate)) in logs.iter().zip(&todo).enumerate() {
            let diff = TextDiff::from_lines(&original, &candidate.patched_function)
                .unified_diff()
                .context_radius(3)
                .header(&format!("a/{file}"), &format!("b/{file}"))
                .to_string();
            write_atomic(&self.layout.patch(unit, candidate.sample_index), diff.as_bytes())?;
            write_json(&self.layout.validation_log(unit, candidate.sample_index), log)?;
            entries.push(ValidationEntry {
                rank: rank + 1,
                sample_index: log.result.sample_index,
                outcome: log.result.outcome,
                correctness: log.result.correctness,
                failing_tests: log.result.failing_tests.clone(),
            });
        }
        tracing::info!(
            bug = %unit.bug_id,
            setting = %unit.setting,
            validated = entries.len(),
            plausible = entries.iter().filter(|e| e.outcome == Outcome::Plausible).count(),
            "validated"
        );
        write_jsonl(&path, &entries)?;
        Ok(())
    }

    /// Filter, rank and validate one generated unit.
    pub fn process_unit(&self, unit: &UnitId) -> Result<(), PipelineError> {
        if !self.has_generations(unit) {
            return Err(PipelineError::StageOrder(format!(
                "{} ({}) has not been generated yet",
                unit.bug_id, unit.setting
            )));
        }
        let filtered = self.filter_unit(unit)?;
        let ranking = self.rank_unit(unit, &filtered)?;
        self.validate_unit(unit, &filtered, &ranking)
    }

    fn backend_if_needed(&self, plan: &Plan) -> Result<Option<Arc<dyn Backend>>, PipelineError> {
        if plan.units.iter().all(|u| self.has_generations(u)) {
            Ok(None)
        } else {
            self.config.backend.build().map(Some)
        }
    }

    /// Sanity gates, then generation for every planned unit.
    pub fn generate_all(&self) -> Result<Plan, PipelineError> {
        self.sanity()?;
        let plan = self.plan()?;
        if let Some(backend) = self.backend_if_needed(&plan)? {
            for unit in &plan.units {
                self.generate_unit(unit, backend.as_ref())?;
            }
        }
        Ok(plan)
    }

    /// Filter, rank and validate every planned unit; all must be generated.
    pub fn validate_all(&self) -> Result<Plan, PipelineError> {
        let plan = self.plan()?;
        let missing: Vec<String> = plan
            .units
            .iter()
            .filter(|u| !self.has_generations(u))
            .map(|u| format!("{} ({})", u.bug_id, u.setting))
            .collect();
        if !missing.is_empty() {
            return Err(PipelineError::StageOrder(format!(
                "generate must run first; missing generations for {}",
                missing.join(", ")
            )));
        }
        for unit in &plan.units {
            self.process_unit(unit)?;
        }
        Ok(plan)
    }

    pub fn report(&self) -> Result<RunReport, PipelineError> {
        Ok(report::write_run_report(&self.layout)?)
    }

    /// The whole pipeline. Generation runs one unit ahead of validation.
    pub fn run(&self) -> Result<RunReport, PipelineError> {
        self.sanity()?;
        let plan = self.plan()?;
        let backend = self.backend_if_needed(&plan)?;
        std::thread::scope(|scope| -> Result<(), PipelineError> {
            let (tx, rx) = mpsc::sync_channel::<Result<usize, PipelineError>>(1);
            let units = &plan.units;
            let backend = backend.clone();
            scope.spawn(move || {
                for (i, unit) in units.iter().enumerate() {
                    let result = match &backend {
                        Some(b) => self.generate_unit(unit, b.as_ref()),
                        None => Ok(()),
                    };
                    let failed = result.is_err();
                    if tx.send(result.map(|_| i)).is_err() || failed {
                        break;
                    }
                }
            });
            for message in rx {
                let i = message?;
                self.process_unit(&plan.units[i])?;
            }
            Ok(())
        })?;
        self.report()
    }
}

/// Default run directory name: a hash of the configuration, so identical
/// configurations share a directory.
pub fn default_run_id(config: &RunConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("run-{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problems_are_collected() {
        let config = RunConfig {
            settings: vec![RepairSetting::Infill, RepairSetting::Infill],
            num_samples: 0,
            top_p: 2.0,
            budget: Some(0),
            ..RunConfig::default()
        };
        let problems = config.problems();
        assert_eq!(problems.len(), 6, "{problems:?}");
    }

    #[test]
    fn defaults_match_sampling_defaults() {
        let c = RunConfig::default();
        assert_eq!((c.num_samples, c.temperature, c.top_p), (200, 0.8, 0.95));
        assert_eq!(c.sampling_for(RepairSetting::Infill).max_new_tokens, 128);
        assert_eq!(default_run_id(&c), default_run_id(&c.clone()));
    }

    #[test]
    fn config_round_trips() {
        let c = RunConfig {
            backend: BackendConfig::Mock {
                script: "m.jsonl".into(),
                call_delay_ms: 0,
                max_batch: 4,
            },
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }
}
