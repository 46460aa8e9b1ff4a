//! Controlled, deterministic page degradations.

use aibat_core::{BBox, PageImage};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{redraw_note, FixtureError, GroundTruthManifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DegradeOp {
    /// Removes one space from a note's text and redraws the note, as when
    /// two words run together. `near` picks the first space inside that
    /// phrase; without it the note's first space goes.
    DropSpaceInNote { note: u32, near: Option<String> },
    /// Inverts `round(p * pixels)` distinct pixels.
    Speckle { p: f64 },
    /// Shortens every horizontal ink run of 3 or more pixels by one.
    ThinStrokes,
}

/// Ground-truth change caused by a degradation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextDelta {
    pub page_index: u32,
    pub number: u32,
    pub before: String,
    pub after: String,
    pub bbox: BBox,
}

fn drop_space(text: &str, near: Option<&str>) -> Option<String> {
    let at = match near {
        Some(phrase) => {
            let start = text.find(phrase)?;
            start + phrase.find(' ')?
        }
        None => text.find(' ')?,
    };
    let mut out = text.to_string();
    out.remove(at);
    Some(out)
}

fn thin_strokes(page: &mut PageImage) {
    for y in 0..page.height {
        let mut x = 0;
        while x < page.width {
            if page.get(x, y) >= 128 {
                x += 1;
                continue;
            }
            let start = x;
            while x < page.width && page.get(x, y) < 128 {
                x += 1;
            }
            if x - start >= 3 {
                page.set(x - 1, y, 255);
            }
        }
    }
}

/// Applies `ops` in order to one page. Text deltas describe how the
/// expected OCR text of affected notes changes; [`apply_deltas`] folds them
/// into the manifest.
pub fn degrade(
    page: &PageImage,
    manifest: &GroundTruthManifest,
    ops: &[DegradeOp],
    seed: u64,
) -> Result<(PageImage, Vec<TextDelta>), FixtureError> {
    let mut out = page.clone();
    let mut deltas: Vec<TextDelta> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(page.page_index).rotate_left(17));
    for op in ops {
        match op {
            DegradeOp::DropSpaceInNote { note, near } => {
                let entry = manifest.note(page.page_index, *note).ok_or(FixtureError::UnknownNote {
                    page_index: page.page_index,
                    number: *note,
                })?;
                let current = deltas
                    .iter()
                    .rev()
                    .find(|d| d.number == *note)
                    .map_or(entry.text.clone(), |d| d.after.clone());
                let after = drop_space(&current, near.as_deref())
                    .ok_or_else(|| FixtureError::InvalidOp(format!("note {note} has no matching space")))?;
                let mut drawn = entry.clone();
                if let Some(prev) = deltas.iter().rev().find(|d| d.number == *note) {
                    drawn.bbox = prev.bbox;
                }
                let bbox = redraw_note(&mut out, manifest, &drawn, &after);
                deltas.push(TextDelta {
                    page_index: page.page_index,
                    number: *note,
                    before: current,
                    after,
                    bbox,
                });
            }
            DegradeOp::Speckle { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(FixtureError::InvalidOp(format!("speckle probability {p} outside [0, 1]")));
                }
                let total = out.pixels.len();
                let n = (p * total as f64).round() as usize;
                for i in index::sample(&mut rng, total, n) {
                    out.pixels[i] = 255 - out.pixels[i];
                }
            }
            DegradeOp::ThinStrokes => thin_strokes(&mut out),
        }
    }
    Ok((out, deltas))
}

/// Updates note text and bounding boxes after [`degrade`].
pub fn apply_deltas(manifest: &mut GroundTruthManifest, deltas: &[TextDelta]) {
    for d in deltas {
        if let Some(n) = manifest
            .notes
            .iter_mut()
            .find(|n| n.page_index == d.page_index && n.number == d.number)
        {
            n.text = d.after.clone();
            n.bbox = d.bbox;
        }
    }
}
