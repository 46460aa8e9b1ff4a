//! Scoring an extraction run against the manifest it was rendered from.

use aibat_core::eval::cer;
use aibat_core::{DrawingNote, NoteType};
use serde::{Deserialize, Serialize};

use crate::corpus::GroundTruthManifest;

/// Minimum crop overlap for an extracted note to count as a manifest note.
pub const MATCH_IOU: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RoundTripReport {
    pub expected: usize,
    pub extracted: usize,
    /// Manifest notes with an overlapping extracted note.
    pub matched: usize,
    pub number_correct: usize,
    pub flag_correct: usize,
    pub exact_text: usize,
    pub max_cer: f64,
    pub mismatches: Vec<String>,
}

impl RoundTripReport {
    pub fn recall(&self) -> f64 {
        ratio(self.matched, self.expected)
    }

    pub fn number_accuracy(&self) -> f64 {
        ratio(self.number_correct, self.expected)
    }

    pub fn flag_accuracy(&self) -> f64 {
        ratio(self.flag_correct, self.expected)
    }

    pub fn is_perfect(&self) -> bool {
        self.expected == self.extracted
            && [self.matched, self.number_correct, self.flag_correct, self.exact_text]
                .iter()
                .all(|&n| n == self.expected)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

pub fn score(manifest: &GroundTruthManifest, notes: &[DrawingNote]) -> RoundTripReport {
    let mut r = RoundTripReport {
        expected: manifest.notes.len(),
        extracted: notes.len(),
        ..Default::default()
    };
    for truth in &manifest.notes {
        let hit = notes
            .iter()
            .filter(|n| n.crop_ref.page_index == truth.page_index)
            .map(|n| (n, n.crop_ref.bbox.iou(&truth.bbox)))
            .filter(|(_, iou)| *iou >= MATCH_IOU)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((note, _)) = hit else {
            r.mismatches.push(format!("page {} note {}: not found", truth.page_index, truth.number));
            continue;
        };
        r.matched += 1;
        if note.note_number == truth.number {
            r.number_correct += 1;
        } else {
            r.mismatches.push(format!(
                "page {} note {}: read as number {}",
                truth.page_index, truth.number, note.note_number
            ));
        }
        let want = if truth.flagged { NoteType::Flagged } else { NoteType::Plain };
        if note.note_type == want {
            r.flag_correct += 1;
        } else {
            r.mismatches.push(format!(
                "page {} note {}: classified {}",
                truth.page_index,
                truth.number,
                note.note_type.as_str()
            ));
        }
        let e: f64 = cer(&truth.text, &note.text).unwrap_or(1.0);
        r.max_cer = r.max_cer.max(e);
        if e == 0.0 {
            r.exact_text += 1;
        } else {
            r.mismatches.push(format!("page {} note {}: CER {e:.4}", truth.page_index, truth.number));
        }
    }
    r
}
