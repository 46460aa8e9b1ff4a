//! OCR adapters: an external command and a fixture-backed mock.

use std::process::Command;

use aibat_core::BBox;
use serde::{Deserialize, Serialize};

use crate::io::save_png;
use crate::raster::BinaryImage;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OcrError {
    #[error("OCR engine unavailable: {0}")]
    EngineUnavailable(String),
    #[error("OCR returned no text")]
    EmptyResult,
}

/// One crop handed to an engine, with enough provenance for engines that
/// look text up rather than read it.
#[derive(Debug, Clone, Copy)]
pub struct OcrRequest<'a> {
    pub source_id: &'a str,
    pub page_index: u32,
    /// Crop position on its page.
    pub bbox: BBox,
    pub image: &'a BinaryImage,
}

pub trait OcrEngine: Send + Sync {
    fn recognize(&self, req: &OcrRequest<'_>) -> Result<String, OcrError>;

    /// Largest number of concurrent `recognize` calls the engine tolerates;
    /// `None` means no limit.
    fn max_concurrency(&self) -> Option<usize> {
        None
    }
}

/// Unix line endings, no trailing whitespace on any line, no leading or
/// trailing blank lines.
pub fn normalize_text(raw: &str) -> String {
    let unix = raw.replace("\r\n", "\n").replace('\r', "\n");
    let lines: Vec<&str> = unix.lines().map(str::trim_end).collect();
    let first = lines.iter().position(|l| !l.is_empty());
    let last = lines.iter().rposition(|l| !l.is_empty());
    match (first, last) {
        (Some(a), Some(b)) => lines[a..=b].join("\n"),
        _ => String::new(),
    }
}

/// Runs `engine` on a crop and normalizes its output. Blank crops and
/// whitespace-only output are [`OcrError::EmptyResult`].
pub fn ocr(req: &OcrRequest<'_>, engine: &dyn OcrEngine) -> Result<String, OcrError> {
    if !req.image.has_ink() {
        return Err(OcrError::EmptyResult);
    }
    let text = normalize_text(&engine.recognize(req)?);
    if text.is_empty() {
        Err(OcrError::EmptyResult)
    } else {
        Ok(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockOcrEntry {
    /// When set, only crops from this source match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    pub page_index: u32,
    pub bbox: BBox,
    pub text: String,
}

/// Returns known text for crops whose box overlaps a registered box with
/// IoU at or above `min_iou`; anything else is an empty result.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockOcr {
    pub entries: Vec<MockOcrEntry>,
    #[serde(default = "default_min_iou")]
    pub min_iou: f64,
    /// Applied in order to every returned text, e.g. `("FOR U21", "FORU21")`.
    #[serde(default)]
    pub substitutions: Vec<(String, String)>,
}

fn default_min_iou() -> f64 {
    0.8
}

impl MockOcr {
    pub fn new(entries: Vec<MockOcrEntry>) -> Self {
        Self {
            entries,
            min_iou: default_min_iou(),
            substitutions: Vec::new(),
        }
    }

    pub fn with_substitution(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.substitutions.push((from.into(), to.into()));
        self
    }

    fn lookup(&self, req: &OcrRequest<'_>) -> Option<&MockOcrEntry> {
        self.entries
            .iter()
            .filter(|e| e.page_index == req.page_index)
            .filter(|e| e.source_id.as_deref().is_none_or(|s| s == req.source_id))
            .map(|e| (e, e.bbox.iou(&req.bbox)))
            .filter(|(_, iou)| *iou >= self.min_iou)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(e, _)| e)
    }
}

impl OcrEngine for MockOcr {
    fn recognize(&self, req: &OcrRequest<'_>) -> Result<String, OcrError> {
        let entry = self.lookup(req).ok_or(OcrError::EmptyResult)?;
        let mut text = entry.text.clone();
        for (from, to) in &self.substitutions {
            text = text.replace(from.as_str(), to);
        }
        Ok(text)
    }
}

/// Shells out to an OCR program. The crop is written to a temporary PNG
/// and `{input}` in the template is replaced by its quoted path; standard
/// output is the recognized text.
#[derive(Debug, Clone)]
pub struct CommandOcr {
    pub template: String,
}

impl CommandOcr {
    pub fn new(template: impl Into<String>) -> Self {
        Self {
            template: template.into(),
        }
    }
}

pub(crate) fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

impl OcrEngine for CommandOcr {
    fn recognize(&self, req: &OcrRequest<'_>) -> Result<String, OcrError> {
        let dir = tempfile::tempdir().map_err(|e| OcrError::EngineUnavailable(e.to_string()))?;
        let path = dir.path().join("crop.png");
        save_png(&path, req.image.width, req.image.height, &req.image.to_gray())
            .map_err(|e| OcrError::EngineUnavailable(e.to_string()))?;
        let cmd = self
            .template
            .replace("{input}", &shell_quote(&path.to_string_lossy()));
        let out = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .output()
            .map_err(|e| OcrError::EngineUnavailable(format!("{cmd}: {e}")))?;
        if !out.status.success() {
            return Err(OcrError::EngineUnavailable(format!(
                "{cmd}: {}; {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }
}
