//! Note extraction from rasterized drawing pages: binarization, notes
//! region and column/note segmentation, flag triangle detection and
//! removal, and OCR.

pub mod binarize;
pub mod components;
pub mod config;
pub mod io;
pub mod ocr;
pub mod pipeline;
pub mod raster;
pub mod segment;
pub mod triangle;

use aibat_core::BBox;

pub use binarize::binarize;
pub use config::{ConfigError, ExtractionConfig, Threshold};
pub use ocr::{ocr, CommandOcr, MockOcr, MockOcrEntry, OcrEngine, OcrError, OcrRequest};
pub use pipeline::{extract_notes, Extraction, ExtractionWarning, FlagEvidence, ProcessedCrop};
pub use raster::BinaryImage;
pub use segment::{detect_notes_region, split_columns, split_notes, ColumnCrop, Region};
pub use triangle::{detect_triangle_contour, detect_triangle_morph, remove_flag};

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("no ink found on page")]
    NoInkFound,
    #[error("region override {0} lies outside the page")]
    RegionOutOfBounds(BBox),
    #[error("no pages to extract")]
    NoPages,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ocr(#[from] OcrError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}
