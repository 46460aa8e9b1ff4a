//! On-disk job store. A job is a directory holding its inputs, one JSON
//! file per stage artifact, and `job.json` with the state machine.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, TryLockError};

use aibat_core::{DrawingNote, IbatTemplate, MetricsReport, ParsedNote, ReviewLabel, ReviewRecord, TemplateSubstep};
use aibat_fixtures::{GroundTruthManifest, MockSidecar};
use aibat_llm::{split_template_step, GeneratedRecord};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::stages::{self, *};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Created,
    Extracted,
    Parsed,
    Generated,
    Reviewed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Extract,
    Parse,
    Generate,
    Evaluate,
}

impl Stage {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "extract" => Some(Self::Extract),
            "parse" => Some(Self::Parse),
            "generate" => Some(Self::Generate),
            "evaluate" => Some(Self::Evaluate),
            _ => None,
        }
    }

    /// Least state the job must be in.
    fn requires(self) -> JobState {
        match self {
            Self::Extract => JobState::Created,
            Self::Parse | Self::Evaluate => JobState::Extracted,
            Self::Generate => JobState::Parsed,
        }
    }

    fn reaches(self) -> Option<JobState> {
        match self {
            Self::Extract => Some(JobState::Extracted),
            Self::Parse => Some(JobState::Parsed),
            Self::Generate => Some(JobState::Generated),
            Self::Evaluate => None,
        }
    }

    fn artifact(self) -> &'static str {
        match self {
            Self::Extract => NOTES_FILE,
            Self::Parse => PARSED_FILE,
            Self::Generate => GENERATED_FILE,
            Self::Evaluate => METRICS_FILE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub drawing_id: String,
    pub state: JobState,
    pub pages: usize,
    pub has_template: bool,
    pub has_mock: bool,
    pub has_truth: bool,
    pub artifacts: Vec<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum JobError {
    #[error("job {0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl From<StageError> for JobError {
    fn from(e: StageError) -> Self {
        match e {
            StageError::NotReady(_) => JobError::Conflict(e.to_string()),
            StageError::Io(m) => JobError::Internal(m),
            other => JobError::Unprocessable(other.to_string()),
        }
    }
}

/// Everything supplied when a job is created.
#[derive(Debug, Default)]
pub struct NewJob {
    pub drawing_id: String,
    /// PNG bytes in page order.
    pub pages: Vec<Vec<u8>>,
    pub template: Option<IbatTemplate>,
    pub mock: Option<MockSidecar>,
    pub truth: Option<GroundTruthManifest>,
    pub config: Option<ServiceConfig>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReviewInput {
    pub labels: Vec<ReviewLabel>,
    #[serde(default)]
    pub edited_text: Option<String>,
    #[serde(default)]
    pub reviewer: Option<String>,
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
}

/// A generated substep with what a reviewer needs beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepView {
    pub output_id: String,
    pub step_name: String,
    pub substep_id: String,
    pub note_number: u32,
    pub record: GeneratedRecord,
    pub template: Option<TemplateSubstep>,
    pub source_note: Option<DrawingNote>,
    pub parsed_note: Option<ParsedNote>,
    pub review: Option<ReviewRecord>,
}

const INPUTS: &str = "inputs";
const JOB_FILE: &str = "job.json";

pub struct JobStore {
    root: PathBuf,
    default_config: ServiceConfig,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    counter: AtomicU64,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

impl JobStore {
    pub fn open(root: impl Into<PathBuf>, default_config: ServiceConfig) -> Result<Self, JobError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| JobError::Internal(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root,
            default_config,
            locks: Mutex::new(HashMap::new()),
            counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf, JobError> {
        let dir = self.root.join(id);
        if !valid_id(id) || !dir.join(JOB_FILE).exists() {
            return Err(JobError::NotFound(id.to_string()));
        }
        Ok(dir)
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    /// Runs `f` holding the job's writer lock; a second writer gets 409.
    fn exclusive<T>(&self, id: &str, f: impl FnOnce(&Path) -> Result<T, JobError>) -> Result<T, JobError> {
        let dir = self.dir(id)?;
        let lock = self.lock_for(id);
        let _guard = match lock.try_lock() {
            Ok(g) => g,
            Err(TryLockError::WouldBlock) => {
                return Err(JobError::Conflict(format!("job {id} is busy with another request")))
            }
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        f(&dir)
    }

    pub fn create(&self, new: NewJob) -> Result<Job, JobError> {
        if new.pages.is_empty() {
            return Err(JobError::Unprocessable("a job needs at least one page".into()));
        }
        if !valid_id(&new.drawing_id) {
            return Err(JobError::Unprocessable(format!(
                "drawing id {:?} must be non-empty letters, digits and '-'",
                new.drawing_id
            )));
        }
        let now = Utc::now();
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let job_id = format!("job-{}-{n}", now.format("%Y%m%d%H%M%S%f"));
        let dir = self.root.join(&job_id);
        let internal = |e: StageError| JobError::Internal(e.to_string());
        let page_dir = dir.join(INPUTS).join(&new.drawing_id);
        for (i, png) in new.pages.iter().enumerate() {
            write_atomic(&page_dir.join(format!("page-{i}.png")), png).map_err(internal)?;
        }
        // Reject undecodable pages now rather than at extraction.
        if let Err(e) = aibat_extraction::io::load_page_dir(&page_dir, &new.drawing_id) {
            let _ = std::fs::remove_dir_all(&dir);
            return Err(JobError::Unprocessable(e.to_string()));
        }
        let inputs = dir.join(INPUTS);
        if let Some(t) = &new.template {
            write_json(&inputs.join("template.json"), t).map_err(internal)?;
        }
        if let Some(m) = &new.mock {
            write_json(&inputs.join("mock.json"), m).map_err(internal)?;
        }
        if let Some(t) = &new.truth {
            write_json(&inputs.join("truth.json"), t).map_err(internal)?;
        }
        if let Some(c) = &new.config {
            c.validate().map_err(|e| JobError::Unprocessable(e.to_string()))?;
            write_json(&inputs.join("config.json"), c).map_err(internal)?;
        }
        let job = Job {
            job_id,
            drawing_id: new.drawing_id,
            state: JobState::Created,
            pages: new.pages.len(),
            has_template: new.template.is_some(),
            has_mock: new.mock.is_some(),
            has_truth: new.truth.is_some(),
            artifacts: Vec::new(),
            created_at: now,
            updated_at: now,
        };
        write_json(&dir.join(JOB_FILE), &job).map_err(internal)?;
        Ok(job)
    }

    pub fn get(&self, id: &str) -> Result<Job, JobError> {
        let dir = self.dir(id)?;
        Ok(read_json(&dir.join(JOB_FILE))?)
    }

    fn config(&self, dir: &Path) -> Result<ServiceConfig, JobError> {
        Ok(read_optional(&dir.join(INPUTS).join("config.json"))?.unwrap_or_else(|| self.default_config.clone()))
    }

    fn save(&self, dir: &Path, job: &mut Job) -> Result<(), JobError> {
        job.updated_at = Utc::now();
        Ok(write_json(&dir.join(JOB_FILE), job)?)
    }

    pub fn run(&self, id: &str, stage: Stage) -> Result<Job, JobError> {
        self.exclusive(id, |dir| {
            let mut job: Job = read_json(&dir.join(JOB_FILE))?;
            if job.state < stage.requires() {
                return Err(JobError::Conflict(format!(
                    "cannot run {stage:?} while the job is {:?}",
                    job.state
                )));
            }
            let cfg = self.config(dir)?;
            let inputs = dir.join(INPUTS);
            let mock: Option<MockSidecar> = read_optional(&inputs.join("mock.json"))?;
            match stage {
                Stage::Extract => {
                    let pages = stages::load_pages(&inputs.join(&job.drawing_id), &job.drawing_id, &cfg, dir)?;
                    let engine = ocr_engine(&cfg, mock.as_ref())?;
                    let notes = run_extract(&job.drawing_id, &pages, &cfg, engine.as_ref())?;
                    write_json(&dir.join(NOTES_FILE), &notes)?;
                }
                Stage::Parse => {
                    let notes: NotesArtifact = read_required(&dir.join(NOTES_FILE))?;
                    let endpoint = llm_endpoint(&cfg, mock.as_ref())?;
                    let parsed = run_parse(&notes, &cfg, endpoint.as_ref())?;
                    write_json(&dir.join(PARSED_FILE), &parsed)?;
                }
                Stage::Generate => {
                    let parsed: ParsedArtifact = read_required(&dir.join(PARSED_FILE))?;
                    let template: IbatTemplate = read_optional(&inputs.join("template.json"))?
                        .ok_or_else(|| JobError::Unprocessable("job has no template".into()))?;
                    let endpoint = llm_endpoint(&cfg, mock.as_ref())?;
                    let generated = run_generate(&parsed, &template, &cfg, endpoint.as_ref())?;
                    write_json(&dir.join(GENERATED_FILE), &generated)?;
                }
                Stage::Evaluate => {
                    let report = self.metrics_in(dir, &cfg)?;
                    write_json(&dir.join(METRICS_FILE), &report)?;
                }
            }
            if let Some(next) = stage.reaches() {
                job.state = job.state.max(next);
            }
            if !job.artifacts.iter().any(|a| a == stage.artifact()) {
                job.artifacts.push(stage.artifact().to_string());
            }
            self.save(dir, &mut job)?;
            Ok(job)
        })
    }

    fn reviews_in(dir: &Path) -> Result<Vec<ReviewRecord>, JobError> {
        Ok(read_optional(&dir.join(REVIEWS_FILE))?.unwrap_or_default())
    }

    pub fn steps(&self, id: &str) -> Result<Vec<StepView>, JobError> {
        let dir = self.dir(id)?;
        let generated: GeneratedArtifact = read_required(&dir.join(GENERATED_FILE))?;
        let notes: Option<NotesArtifact> = read_optional(&dir.join(NOTES_FILE))?;
        let parsed: Option<ParsedArtifact> = read_optional(&dir.join(PARSED_FILE))?;
        let template: Option<IbatTemplate> = read_optional(&dir.join(INPUTS).join("template.json"))?;
        let substeps: Vec<TemplateSubstep> = template
            .iter()
            .flat_map(|t| t.steps.iter())
            .filter_map(|s| split_template_step(s).ok())
            .flatten()
            .collect();
        let reviews = Self::reviews_in(&dir)?;
        Ok(generated
            .generated
            .iter()
            .map(|rec| {
                let substep_id = rec
                    .output_id
                    .rsplit_once('@')
                    .map_or(rec.output_id.as_str(), |(s, _)| s)
                    .to_string();
                StepView {
                    output_id: rec.output_id.clone(),
                    step_name: rec.step_name.clone(),
                    note_number: rec.note_number,
                    template: substeps.iter().find(|s| s.substep_id == substep_id).cloned(),
                    source_note: notes
                        .as_ref()
                        .and_then(|n| n.notes.iter().find(|d| d.note_number == rec.note_number).cloned()),
                    parsed_note: parsed.as_ref().and_then(|p| {
                        p.parsed
                            .iter()
                            .find(|r| r.note_number == rec.note_number)
                            .map(|r| r.parsed.clone())
                    }),
                    review: reviews.iter().find(|r| r.output_id == rec.output_id).cloned(),
                    substep_id,
                    record: rec.clone(),
                }
            })
            .collect())
    }

    /// Stores a review of a generated substep or a parsed note, replacing
    /// any earlier review of the same output.
    pub fn review(&self, id: &str, output_id: &str, input: ReviewInput) -> Result<ReviewRecord, JobError> {
        self.exclusive(id, |dir| {
            let mut job: Job = read_json(&dir.join(JOB_FILE))?;
            if job.state < JobState::Generated {
                return Err(JobError::Conflict(format!("cannot review while the job is {:?}", job.state)));
            }
            let parsed: Option<ParsedArtifact> = read_optional(&dir.join(PARSED_FILE))?;
            let generated: Option<GeneratedArtifact> = read_optional(&dir.join(GENERATED_FILE))?;
            if !output_ids(parsed.as_ref(), generated.as_ref()).iter().any(|o| o == output_id) {
                return Err(JobError::NotFound(format!("{id}/{output_id}")));
            }
            let record = ReviewRecord::new(
                output_id,
                input.labels,
                input.edited_text,
                input.reviewer.unwrap_or_else(|| "reviewer".into()),
                input.timestamp.unwrap_or_else(Utc::now),
            )
            .map_err(|e| JobError::Unprocessable(e.to_string()))?;
            let mut reviews = Self::reviews_in(dir)?;
            reviews.retain(|r| r.output_id != output_id);
            reviews.push(record.clone());
            reviews.sort_by(|a, b| a.output_id.cmp(&b.output_id));
            write_json(&dir.join(REVIEWS_FILE), &reviews)?;
            job.state = job.state.max(JobState::Reviewed);
            if !job.artifacts.iter().any(|a| a == REVIEWS_FILE) {
                job.artifacts.push(REVIEWS_FILE.to_string());
            }
            self.save(dir, &mut job)?;
            Ok(record)
        })
    }

    fn metrics_in(&self, dir: &Path, cfg: &ServiceConfig) -> Result<MetricsReport, JobError> {
        let notes: Option<NotesArtifact> = read_optional(&dir.join(NOTES_FILE))?;
        let parsed: Option<ParsedArtifact> = read_optional(&dir.join(PARSED_FILE))?;
        let generated: Option<GeneratedArtifact> = read_optional(&dir.join(GENERATED_FILE))?;
        let truth: Option<GroundTruthManifest> = read_optional(&dir.join(INPUTS).join("truth.json"))?;
        let reviews = Self::reviews_in(dir)?;
        Ok(compute_metrics(
            notes.as_ref(),
            parsed.as_ref(),
            generated.as_ref(),
            &reviews,
            truth.as_ref(),
            cfg,
        )?)
    }

    /// Current metrics from stored artifacts and reviews; nothing is written.
    pub fn metrics(&self, id: &str) -> Result<MetricsReport, JobError> {
        let dir = self.dir(id)?;
        let cfg = self.config(&dir)?;
        self.metrics_in(&dir, &cfg)
    }

    /// Raw bytes of a stage artifact.
    pub fn artifact(&self, id: &str, name: &str) -> Result<Vec<u8>, JobError> {
        let dir = self.dir(id)?;
        let allowed = [NOTES_FILE, PARSED_FILE, GENERATED_FILE, REVIEWS_FILE, METRICS_FILE];
        if !allowed.contains(&name) {
            return Err(JobError::NotFound(format!("{id}/{name}")));
        }
        std::fs::read(dir.join(name)).map_err(|_| JobError::NotFound(format!("{id}/{name}")))
    }
}
