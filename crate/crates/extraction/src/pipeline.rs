use aibat_core::{BBox, CropRef, DrawingNote, NoteCrop, NoteType, PageImage};
use serde::{Deserialize, Serialize};

use crate::binarize::binarize;
use crate::config::ExtractionConfig;
use crate::ocr::{ocr, OcrEngine, OcrError, OcrRequest};
use crate::raster::BinaryImage;
use crate::segment::{detect_notes_region, split_columns, split_notes, Region};
use crate::triangle::{detect_triangle_contour, detect_triangle_morph, remove_flag};
use crate::ExtractError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionWarning {
    pub page_index: u32,
    pub column_index: u32,
    pub row_order: u32,
    pub bbox: BBox,
    pub message: String,
}

/// Which detectors fired on a crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlagEvidence {
    pub contour: bool,
    pub morph: bool,
}

impl FlagEvidence {
    pub fn flagged(&self) -> bool {
        self.contour || self.morph
    }
}

/// A note crop after flag handling, as it was sent to OCR.
#[derive(Debug, Clone)]
pub struct ProcessedCrop {
    pub crop: NoteCrop,
    pub evidence: FlagEvidence,
    pub cleaned: BinaryImage,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub notes: Vec<DrawingNote>,
    pub warnings: Vec<ExtractionWarning>,
    pub crops: Vec<ProcessedCrop>,
}

/// Splits a leading note number off OCR text. The number token may carry a
/// trailing `.`, `)` or `:`. Returns the number and the remaining text.
pub fn split_note_number(text: &str) -> Option<(u32, String)> {
    let (first, rest) = match text.split_once('\n') {
        Some((a, b)) => (a, Some(b)),
        None => (text, None),
    };
    let first = first.trim_start();
    let end = first.find(char::is_whitespace).unwrap_or(first.len());
    let digits = first[..end].trim_end_matches(['.', ')', ':']);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: u32 = digits.parse().ok().filter(|&n| n >= 1)?;
    let head = first[end..].trim_start();
    let body = match rest {
        Some(r) if head.is_empty() => r.to_string(),
        Some(r) => format!("{head}\n{r}"),
        None => head.to_string(),
    };
    Some((n, body))
}

/// Segments one page and handles flags, without OCR.
pub fn process_page(page: &PageImage, cfg: &ExtractionConfig) -> Result<Vec<ProcessedCrop>, ExtractError> {
    let bin = binarize(page, cfg);
    let region_box = detect_notes_region(&bin, cfg)?;
    let region = Region::of(page.page_index, &bin, region_box);
    let mut out = Vec::new();
    for column in split_columns(&region, cfg) {
        for crop in split_notes(&column, cfg) {
            let local = BBox::new(
                crop.bbox.x - column.bbox.x,
                crop.bbox.y - column.bbox.y,
                crop.bbox.w,
                crop.bbox.h,
            );
            let image = column.image.crop(local);
            let triangle = detect_triangle_contour(&image, cfg);
            let evidence = FlagEvidence {
                contour: triangle.is_some(),
                morph: detect_triangle_morph(&image, cfg),
            };
            let cleaned = match &triangle {
                Some(t) => remove_flag(&image, t),
                None => image,
            };
            out.push(ProcessedCrop {
                crop: NoteCrop {
                    pixels: cleaned.to_gray(),
                    ..crop
                },
                evidence,
                cleaned,
            });
        }
    }
    Ok(out)
}

/// Full chain from page images to numbered notes, ordered by page, column
/// and row.
///
/// Crops whose OCR comes back empty are skipped with a warning. A crop whose
/// text does not start with a number gets the previous note's number plus
/// one, also with a warning.
pub fn extract_notes(
    pages: &[PageImage],
    cfg: &ExtractionConfig,
    engine: &dyn OcrEngine,
) -> Result<Extraction, ExtractError> {
    cfg.validate()?;
    if pages.is_empty() {
        return Err(ExtractError::NoPages);
    }
    // Segmentation is pure, so pages run in parallel; OCR stays sequential
    // below, which satisfies any engine concurrency limit.
    let per_page: Vec<Result<Vec<ProcessedCrop>, ExtractError>> = std::thread::scope(|s| {
        let handles: Vec<_> = pages
            .iter()
            .map(|p| s.spawn(move || process_page(p, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("page worker panicked"))
            .collect()
    });

    let mut result = Extraction::default();
    let mut previous = 0u32;
    for (page, crops) in pages.iter().zip(per_page) {
        for processed in crops? {
            let c = &processed.crop;
            let warn = |message: String| ExtractionWarning {
                page_index: c.page_index,
                column_index: c.column_index,
                row_order: c.row_order,
                bbox: c.bbox,
                message,
            };
            let req = OcrRequest {
                source_id: &page.source_id,
                page_index: page.page_index,
                bbox: c.bbox,
                image: &processed.cleaned,
            };
            let text = match ocr(&req, engine) {
                Ok(t) => t,
                Err(OcrError::EmptyResult) => {
                    result.warnings.push(warn(format!("empty OCR result for crop {}", c.bbox)));
                    result.crops.push(processed);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let (number, body) = match split_note_number(&text) {
                Some((n, body)) if !body.trim().is_empty() => (n, body),
                Some((n, _)) => {
                    result.warnings.push(warn(format!("note {n} has no text after its number")));
                    (n, text.clone())
                }
                None => {
                    let n = previous + 1;
                    let token = text.split_whitespace().next().unwrap_or("");
                    result
                        .warnings
                        .push(warn(format!("no leading note number (found {token:?}); using {n}")));
                    (n, text.clone())
                }
            };
            previous = number;
            result.notes.push(DrawingNote {
                note_number: number,
                note_type: if processed.evidence.flagged() {
                    NoteType::Flagged
                } else {
                    NoteType::Plain
                },
                text: body,
                crop_ref: CropRef {
                    source_id: page.source_id.clone(),
                    page_index: c.page_index,
                    bbox: c.bbox,
                    column_index: c.column_index,
                    row_order: c.row_order,
                },
            });
            result.crops.push(processed);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_tokens() {
        assert_eq!(split_note_number("5 REMOVE REF DES"), Some((5, "REMOVE REF DES".into())));
        assert_eq!(split_note_number("22. SEE\nTABLE 4"), Some((22, "SEE\nTABLE 4".into())));
        assert_eq!(split_note_number("3)\nBODY"), Some((3, "BODY".into())));
        assert_eq!(split_note_number("NOTE 5"), None);
        assert_eq!(split_note_number("0 ZERO"), None);
        assert_eq!(split_note_number("5A TEXT"), None);
    }

    #[test]
    fn blank_pages_propagate_no_ink() {
        let pages = vec![PageImage::filled(0, 50, 50, 255, "d")];
        let engine = crate::ocr::MockOcr::default();
        assert!(matches!(
            extract_notes(&pages, &ExtractionConfig::default(), &engine),
            Err(ExtractError::NoInkFound)
        ));
        assert!(matches!(
            extract_notes(&[], &ExtractionConfig::default(), &engine),
            Err(ExtractError::NoPages)
        ));
    }
}
