//! The four pipeline stages as plain functions over artifacts. The CLI and
//! the job store both go through these.

use std::path::Path;

use aibat_core::eval::{cer, flagged_accuracy, mean_std, r_counts, pr01, summarize};
use aibat_core::{
    cost::estimate_cost, CostEstimate, DrawingNote, IbatTemplate, MetricsReport, NoteType, PageImage, ReviewRecord,
};
use aibat_core::cost::TokenUsage;
use aibat_extraction::{extract_notes, CommandOcr, ExtractError, ExtractionWarning, MockOcr, OcrEngine};
use aibat_fixtures::roundtrip::MATCH_IOU;
use aibat_fixtures::{GroundTruthManifest, MockSidecar};
use aibat_llm::{
    Endpoint, GenerateStage, GenerationFailure, GeneratedRecord, HttpEndpoint, LlmError, MockEndpoint, Orchestrator,
    ParseStage, ParsedRecord, UnparsedNote,
};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;

pub const NOTES_FILE: &str = "notes.json";
pub const PARSED_FILE: &str = "parsed.json";
pub const GENERATED_FILE: &str = "generated.json";
pub const REVIEWS_FILE: &str = "reviews.json";
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("stage not ready: {0}")]
    NotReady(String),
    #[error("bad input: {0}")]
    Input(String),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{stage} failed for every item:\n{}", .failures.join("\n"))]
    AllFailed { stage: &'static str, failures: Vec<String> },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotesArtifact {
    pub drawing_id: String,
    pub notes: Vec<DrawingNote>,
    pub warnings: Vec<ExtractionWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedArtifact {
    pub drawing_id: String,
    pub parsed: Vec<ParsedRecord>,
    pub unparsed: Vec<UnparsedNote>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedArtifact {
    pub drawing_id: String,
    pub template_id: String,
    pub generated: Vec<GeneratedRecord>,
    pub unmatched_steps: Vec<String>,
    pub failures: Vec<GenerationFailure>,
    pub usage: TokenUsage,
    /// Parse plus generation.
    pub cost: CostEstimate,
}

/// OCR engine for a run: the sidecar's canned text when given, otherwise
/// the configured command.
pub fn ocr_engine(cfg: &ServiceConfig, mock: Option<&MockSidecar>) -> Result<Box<dyn OcrEngine>, StageError> {
    match (mock, &cfg.ocr_command) {
        (Some(m), _) => Ok(Box::new(MockOcr::new(m.ocr.clone()))),
        (None, Some(cmd)) => Ok(Box::new(CommandOcr::new(cmd.clone()))),
        (None, None) => Err(StageError::Input(
            "no OCR engine: set ocr_command, AIBAT_OCR_CMD or pass a mock sidecar".into(),
        )),
    }
}

pub fn llm_endpoint(cfg: &ServiceConfig, mock: Option<&MockSidecar>) -> Result<Box<dyn Endpoint>, StageError> {
    match mock {
        Some(m) => Ok(Box::new(MockEndpoint::from_entries(&m.llm))),
        None => HttpEndpoint::new(&cfg.llm)
            .map(|e| Box::new(e) as Box<dyn Endpoint>)
            .map_err(|e| StageError::Input(e.to_string())),
    }
}

/// Loads pages from a directory of `page-<n>.png` files or rasterizes a
/// PDF into `scratch`.
pub fn load_pages(input: &Path, drawing_id: &str, cfg: &ServiceConfig, scratch: &Path) -> Result<Vec<PageImage>, StageError> {
    let io = |e: aibat_extraction::io::IoError| StageError::Input(e.to_string());
    if input.is_dir() {
        return aibat_extraction::io::load_page_dir(input, drawing_id).map_err(io);
    }
    let is_pdf = input
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pdf"));
    if !is_pdf {
        return Err(StageError::Input(format!(
            "{}: expected a directory of page-<n>.png files or a PDF",
            input.display()
        )));
    }
    let cmd = cfg
        .rasterizer_command
        .as_deref()
        .ok_or_else(|| StageError::Input("PDF input needs rasterizer_command".into()))?;
    aibat_extraction::io::rasterize_pdf(input, cmd, cfg.dpi, scratch, drawing_id).map_err(io)
}

pub fn run_extract(
    drawing_id: &str,
    pages: &[PageImage],
    cfg: &ServiceConfig,
    engine: &dyn OcrEngine,
) -> Result<NotesArtifact, StageError> {
    let ex = extract_notes(pages, &cfg.extraction, engine)?;
    if ex.notes.is_empty() {
        return Err(StageError::AllFailed {
            stage: "extraction",
            failures: ex.warnings.iter().map(|w| w.message.clone()).collect(),
        });
    }
    Ok(NotesArtifact {
        drawing_id: drawing_id.to_string(),
        notes: ex.notes,
        warnings: ex.warnings,
    })
}

pub fn run_parse(notes: &NotesArtifact, cfg: &ServiceConfig, endpoint: &dyn Endpoint) -> Result<ParsedArtifact, StageError> {
    if notes.notes.is_empty() {
        return Err(StageError::NotReady("no notes to parse".into()));
    }
    let orch = Orchestrator::new(endpoint, &cfg.llm, &cfg.legend, &cfg.examples);
    let ParseStage {
        parsed,
        unparsed,
        usage,
    } = orch.parse_notes(&notes.notes);
    if parsed.is_empty() {
        return Err(StageError::AllFailed {
            stage: "parsing",
            failures: unparsed
                .iter()
                .map(|u| format!("note {}: {}", u.note_number, u.error))
                .collect(),
        });
    }
    Ok(ParsedArtifact {
        drawing_id: notes.drawing_id.clone(),
        parsed,
        unparsed,
        usage,
    })
}

pub fn run_generate(
    parsed: &ParsedArtifact,
    template: &IbatTemplate,
    cfg: &ServiceConfig,
    endpoint: &dyn Endpoint,
) -> Result<GeneratedArtifact, StageError> {
    if template.steps.is_empty() {
        return Err(StageError::Input("template has no steps".into()));
    }
    let orch = Orchestrator::new(endpoint, &cfg.llm, &cfg.legend, &cfg.examples);
    let GenerateStage {
        generated,
        unmatched_steps,
        failures,
        usage,
    } = orch.generate_steps(&parsed.drawing_id, &parsed.parsed, template)?;
    if generated.is_empty() && !failures.is_empty() {
        return Err(StageError::AllFailed {
            stage: "generation",
            failures: failures
                .iter()
                .map(|f| format!("{} for note {}: {}", f.substep_id, f.note_number, f.error))
                .collect(),
        });
    }
    let total = parsed.usage + usage;
    Ok(GeneratedArtifact {
        drawing_id: parsed.drawing_id.clone(),
        template_id: template.template_id.clone(),
        generated,
        unmatched_steps,
        failures,
        usage,
        cost: estimate_cost(total.prompt_tokens, total.completion_tokens, &cfg.pricing),
    })
}

/// Every id a review may refer to.
pub fn output_ids(parsed: Option<&ParsedArtifact>, generated: Option<&GeneratedArtifact>) -> Vec<String> {
    let mut ids: Vec<String> = parsed
        .into_iter()
        .flat_map(|p| p.parsed.iter().map(|r| r.output_id.clone()))
        .collect();
    ids.extend(
        generated
            .into_iter()
            .flat_map(|g| g.generated.iter().map(|r| r.output_id.clone())),
    );
    ids
}

fn is_parse_review(r: &ReviewRecord) -> bool {
    r.output_id.starts_with("note-")
}

/// Extraction accuracy against ground truth. Each truth note is paired with
/// the best-overlapping extracted note on its page; a truth note without a
/// partner scores CER 1 and a wrong flag.
fn truth_figures(
    notes: &NotesArtifact,
    truth: &GroundTruthManifest,
    cfg: &ServiceConfig,
) -> Result<(Option<f64>, Option<f64>, Option<f64>), StageError> {
    if truth.notes.is_empty() {
        return Ok((None, None, None));
    }
    let mut cers = Vec::with_capacity(truth.notes.len());
    let mut want = Vec::with_capacity(truth.notes.len());
    let mut got = Vec::with_capacity(truth.notes.len());
    for t in &truth.notes {
        let t_type = if t.flagged { NoteType::Flagged } else { NoteType::Plain };
        let hit = notes
            .notes
            .iter()
            .filter(|n| n.crop_ref.page_index == t.page_index)
            .map(|n| (n, n.crop_ref.bbox.iou(&t.bbox)))
            .filter(|(_, iou)| *iou >= MATCH_IOU)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(n, _)| n);
        want.push(t_type);
        match hit {
            Some(n) => {
                cers.push(cer::<f64>(&t.text, &n.text).map_err(|e| StageError::Input(e.to_string()))?);
                got.push(n.note_type);
            }
            None => {
                cers.push(1.0);
                got.push(match t_type {
                    NoteType::Flagged => NoteType::Plain,
                    NoteType::Plain => NoteType::Flagged,
                });
            }
        }
    }
    let mean = cers.iter().sum::<f64>() / cers.len() as f64;
    let std = mean_std(&cers, cfg.cer_std).ok().map(|(_, s)| s);
    let acc = flagged_accuracy::<f64>(&want, &got).ok();
    Ok((Some(mean), std, acc))
}

/// Metrics from whatever artifacts exist. Pure: same inputs, same report.
pub fn compute_metrics(
    notes: Option<&NotesArtifact>,
    parsed: Option<&ParsedArtifact>,
    generated: Option<&GeneratedArtifact>,
    reviews: &[ReviewRecord],
    truth: Option<&GroundTruthManifest>,
    cfg: &ServiceConfig,
) -> Result<MetricsReport, StageError> {
    let (cer_mean, cer_std, flag_acc) = match (notes, truth) {
        (Some(n), Some(t)) => truth_figures(n, t, cfg)?,
        _ => (None, None, None),
    };
    let cost = match (generated, parsed) {
        (Some(g), _) => g.cost,
        (None, Some(p)) => estimate_cost(p.usage.prompt_tokens, p.usage.completion_tokens, &cfg.pricing),
        (None, None) => estimate_cost(0, 0, &cfg.pricing),
    };
    let (parse_reviews, gen_reviews): (Vec<ReviewRecord>, Vec<ReviewRecord>) =
        reviews.iter().cloned().partition(is_parse_review);
    Ok(MetricsReport {
        cer_mean,
        cer_std,
        flagged_accuracy: flag_acc,
        r_counts: r_counts(reviews),
        pr01: pr01::<f64>(reviews).ok(),
        cost,
        parsing: (!parse_reviews.is_empty()).then(|| summarize(&parse_reviews)),
        generation: (!gen_reviews.is_empty()).then(|| summarize(&gen_reviews)),
    })
}

/// Pretty JSON with a trailing newline; every artifact is written this way.
pub fn to_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifact serializes");
    out.push(b'\n');
    out
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StageError> {
    use std::io::Write;
    let io = |e: std::io::Error| StageError::Io(format!("{}: {e}", path.display()));
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StageError> {
    write_atomic(path, &to_bytes(value))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StageError> {
    let text = std::fs::read_to_string(path).map_err(|e| StageError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| StageError::Input(format!("{}: {e}", path.display())))
}

/// Reads an artifact a stage depends on; a missing file means the earlier
/// stage has not run.
pub fn read_required<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StageError> {
    if !path.exists() {
        return Err(StageError::NotReady(format!("{} not found", path.display())));
    }
    read_json(path)
}

pub fn read_optional<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>, StageError> {
    if path.exists() {
        read_json(path).map(Some)
    } else {
        Ok(None)
    }
}
