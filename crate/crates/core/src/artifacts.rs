//! Run directory layout and the records persisted in it.
//!
//! ```text
//! <run>/config.json            effective configuration
//! <run>/plan.json              bug x setting units, plus skipped ones
//! <run>/sanity.json            sanity gate failures (empty when passed)
//! <run>/bugs/<bug>/<setting>/  prompts.jsonl, generations.jsonl,
//!                              filtered.jsonl, filter.json, ranking.json,
//!                              validation.jsonl, patches/<sample>.diff
//! <run>/logs/                  everything holding wall-clock times
//! <run>/report.{txt,csv,jsonl}, curves.csv, candidates.csv
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::LineSpan;
use crate::model::{CallTiming, GenerationResult};
use crate::prompt::{PromptSpec, RepairSetting};
use crate::rank::RankingStrategy;
use crate::templates::TemplateInstance;
use crate::validate::{Correctness, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl ArtifactError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
        move |source| ArtifactError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One bug under one repair setting.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitId {
    pub bug_id: String,
    pub setting: RepairSetting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedUnit {
    pub bug_id: String,
    pub setting: RepairSetting,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub units: Vec<UnitId>,
    pub skipped: Vec<SkippedUnit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub prompt_id: usize,
    /// Hunk repaired by this prompt when locations are enumerated.
    pub location: Option<LineSpan>,
    pub template: Option<TemplateInstance>,
    /// Unit-level sample indices produced by this prompt, in request order.
    pub sample_indices: Vec<usize>,
    pub spec: PromptSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_index: usize,
    pub prompt_id: usize,
    pub result: GenerationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub bug_id: String,
    pub setting: RepairSetting,
    pub samples: usize,
    /// Sum of the wall time of every `generate` call for this unit.
    pub wall_seconds: f64,
    pub calls: Vec<CallTiming>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRecord {
    /// False when the record has no build command.
    pub semantic_checked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub strategy: RankingStrategy,
    /// Sample indices of every candidate that passed filtering, in order.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    /// 1-based position in the validation order.
    pub rank: usize,
    pub sample_index: usize,
    pub outcome: Outcome,
    pub correctness: Correctness,
    pub failing_tests: Vec<String>,
}

/// Bug ids as directory names.
pub fn path_component(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLayout {
    root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn plan(&self) -> PathBuf {
        self.root.join("plan.json")
    }

    pub fn sanity(&self) -> PathBuf {
        self.root.join("sanity.json")
    }

    pub fn unit_dir(&self, unit: &UnitId) -> PathBuf {
        self.root
            .join("bugs")
            .join(path_component(&unit.bug_id))
            .join(unit.setting.as_str())
    }

    pub fn prompts(&self, unit: &UnitId) -> PathBuf {
        self.unit_dir(unit).join("prompts.jsonl")
    }

    pub fn generations(&self, unit: &UnitId) -> PathBuf {
        self.unit_dir(unit).join("generations.jsonl")
    }

    pub fn filtered(&self, unit: &UnitId) -> PathBuf {
        self.unit_dir(unit).join("filtered.jsonl")
    }

    pub fn filter_record(&self, unit: &UnitId) -> PathBuf {
        self.unit_dir(unit).join("filter.json")
    }

    pub fn ranking(&self, unit: &UnitId) -> PathBuf {
        self.unit_dir(unit).join("ranking.json")
    }

    pub fn validation(&self, unit: &UnitId) -> PathBuf {
        self.unit_dir(unit).join("validation.jsonl")
    }

    pub fn patch(&self, unit: &UnitId, sample_index: usize) -> PathBuf {
        self.unit_dir(unit)
            .join("patches")
            .join(format!("{sample_index}.diff"))
    }

    pub fn logs(&self) -> PathBuf {
        self.root.join("logs")
    }

    fn unit_log_dir(&self, kind: &str, unit: &UnitId) -> PathBuf {
        self.logs()
            .join(kind)
            .join(path_component(&unit.bug_id))
            .join(unit.setting.as_str())
    }

    pub fn generation_log(&self, unit: &UnitId) -> PathBuf {
        self.unit_log_dir("generation", unit).with_extension("json")
    }

    pub fn build_log(&self, unit: &UnitId, sample_index: usize) -> PathBuf {
        self.unit_log_dir("build", unit)
            .join(format!("{sample_index}.json"))
    }

    pub fn validation_log(&self, unit: &UnitId, sample_index: usize) -> PathBuf {
        self.unit_log_dir("validation", unit)
            .join(format!("{sample_index}.json"))
    }

    pub fn throughput(&self) -> PathBuf {
        self.logs().join("throughput.json")
    }
}

/// Writes through a temporary file so readers never see half a file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(ArtifactError::io(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(ArtifactError::io(&tmp))?;
    f.write_all(bytes).map_err(ArtifactError::io(&tmp))?;
    f.sync_all().map_err(ArtifactError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(ArtifactError::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact types serialize");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ArtifactError> {
    let mut bytes = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut bytes, row).expect("artifact types serialize");
        bytes.push(b'\n');
    }
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(ArtifactError::io(path))?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ArtifactError> {
    let text = fs::read_to_string(path).map_err(ArtifactError::io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ArtifactError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
