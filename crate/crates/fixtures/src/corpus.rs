//! Synthetic drawing pages with exact ground truth.

use std::collections::BTreeSet;

use aibat_core::{BBox, PageImage};
use aibat_extraction::MockOcrEntry;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::font::{self, Metrics, FONT_ID};

/// Gap between the number and the inner edge of its flag, for strokes up
/// to 2 px.
pub const FLAG_CLEARANCE: f64 = 4.0;
/// Flag edges are placed for this half-stroke so that the layout does not
/// depend on the stroke.
const FLAG_HALF_STROKE: f64 = 1.0;
/// Half-width gained per pixel of flag height.
const FLAG_SLOPE: f64 = 1.0;
const FLAG_PAD: u32 = 2;
const MAX_FLAG_STROKE: u32 = 4;
const FRAME_INSET: u32 = 30;
const FRAME_STROKE: u32 = 3;
const TITLE_W: u32 = 600;
const TITLE_H: u32 = 110;
const TITLE_GAP: u32 = 150;
const MARK_W: u32 = 9;
const MARK_H: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FixtureError {
    #[error("unsupported glyph {ch:?} in note {note}")]
    UnsupportedGlyph { ch: char, note: u32 },
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("no note {number} on page {page_index}")]
    UnknownNote { page_index: u32, number: u32 },
    #[error("invalid degradation: {0}")]
    InvalidOp(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteSpec {
    pub number: u32,
    /// Body text without the number. Explicit `\n` breaks are kept; longer
    /// lines are word-wrapped.
    pub text: String,
    pub flagged: bool,
    /// Overrides the corpus flag stroke for this note.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag_stroke: Option<u32>,
    /// Draw a small filled triangle in place of a space on the second line.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inline_mark: bool,
}

impl NoteSpec {
    pub fn new(number: u32, text: impl Into<String>, flagged: bool) -> Self {
        Self {
            number,
            text: text.into(),
            flagged,
            flag_stroke: None,
            inline_mark: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ColumnSpec {
    pub notes: Vec<NoteSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PageSpec {
    pub columns: Vec<ColumnSpec>,
}

/// Corpus description. Glyph cells are `5*scale` by `7*scale` pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub drawing_id: String,
    pub pages: Vec<PageSpec>,
    pub font: String,
    pub scale: u32,
    pub line_gap: u32,
    pub note_gap: u32,
    pub flag_stroke: u32,
    pub wrap_chars: usize,
    pub page_width: u32,
    /// Fixed page height; derived from the content when absent.
    pub page_height: Option<u32>,
    pub margin: u32,
    pub column_gap: u32,
    pub frame: bool,
    pub title_block: bool,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            drawing_id: "FIXTURE".into(),
            pages: Vec::new(),
            font: FONT_ID.into(),
            scale: 3,
            line_gap: 12,
            note_gap: 30,
            flag_stroke: 2,
            wrap_chars: 40,
            page_width: 2100,
            page_height: None,
            margin: 130,
            column_gap: 160,
            frame: true,
            title_block: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestNote {
    pub page_index: u32,
    pub column_index: u32,
    pub row_order: u32,
    pub number: u32,
    /// Body text as drawn, lines joined with `\n`.
    pub text: String,
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag_stroke: Option<u32>,
    /// Ink extent of the note, flag included.
    pub bbox: BBox,
    /// Top-left of the note's layout cell.
    pub origin: [u32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline_mark: Option<BBox>,
}

impl ManifestNote {
    /// What a perfect OCR engine reads from the note's crop.
    pub fn ocr_text(&self) -> String {
        format!("{} {}", self.number, self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPage {
    pub page_index: u32,
    pub width: u32,
    pub height: u32,
    pub region: BBox,
    pub columns: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub drawing_id: String,
    pub font: String,
    pub scale: u32,
    pub line_gap: u32,
    pub pages: Vec<ManifestPage>,
    /// In reading order: page, then column, then top to bottom.
    pub notes: Vec<ManifestNote>,
}

impl GroundTruthManifest {
    pub fn note(&self, page_index: u32, number: u32) -> Option<&ManifestNote> {
        self.notes
            .iter()
            .find(|n| n.page_index == page_index && n.number == number)
    }

    pub fn mock_ocr_entries(&self) -> Vec<MockOcrEntry> {
        self.notes
            .iter()
            .map(|n| MockOcrEntry {
                source_id: Some(self.drawing_id.clone()),
                page_index: n.page_index,
                bbox: n.bbox,
                text: n.ocr_text(),
            })
            .collect()
    }

    pub fn flagged_count(&self) -> usize {
        self.notes.iter().filter(|n| n.flagged).count()
    }
}

struct Canvas {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Canvas {
    fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![255; width as usize * height as usize],
        }
    }

    fn put(&mut self, x: i64, y: i64) {
        if x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height {
            self.pixels[y as usize * self.width as usize + x as usize] = 0;
        }
    }

    fn rect_outline(&mut self, b: BBox, stroke: u32) {
        for y in b.y..b.bottom() {
            for x in b.x..b.right() {
                let inner = x >= b.x + stroke && x + stroke < b.right() && y >= b.y + stroke && y + stroke < b.bottom();
                if !inner {
                    self.put(x as i64, y as i64);
                }
            }
        }
    }
}

/// Flag triangle relative to the number's top-left corner.
#[derive(Debug, Clone, Copy)]
struct FlagGeometry {
    headroom: f64,
    half_base: f64,
    base_dy: f64,
}

fn flag_geometry(m: Metrics, digits: usize) -> FlagGeometry {
    let nw = m.text_width(digits) as f64;
    let c = FLAG_CLEARANCE + FLAG_HALF_STROKE;
    let half_top = nw / 2.0 + c;
    let headroom = c + half_top / FLAG_SLOPE;
    let base_dy = m.glyph_h() as f64 + c;
    FlagGeometry {
        headroom,
        half_base: FLAG_SLOPE * (headroom + base_dy),
        base_dy,
    }
}

/// Placement of one note. Identical whether or not the note is flagged, so
/// flagged and plain renderings differ only by the flag's ink.
#[derive(Debug, Clone, Copy)]
struct NoteLayout {
    number_x: i64,
    text_top: i64,
    body_x: i64,
    flag: FlagGeometry,
    center_x: f64,
}

fn layout(m: Metrics, origin: (i64, i64), number: u32) -> NoteLayout {
    let digits = number.to_string().len();
    let g = flag_geometry(m, digits);
    let nw = m.text_width(digits) as f64;
    let number_x = origin.0 + FLAG_PAD as i64 + (g.half_base - nw / 2.0).ceil() as i64;
    NoteLayout {
        number_x,
        text_top: origin.1 + FLAG_PAD as i64 + g.headroom.ceil() as i64,
        body_x: origin.0 + 2 * FLAG_PAD as i64 + (2.0 * g.half_base).ceil() as i64 + m.advance() as i64,
        flag: g,
        center_x: number_x as f64 + nw / 2.0,
    }
}

fn line_top(l: &NoteLayout, m: Metrics, line_gap: u32, i: usize) -> i64 {
    l.text_top + i as i64 * (m.glyph_h() + line_gap) as i64
}

fn line_x(l: &NoteLayout, origin_x: i64, i: usize) -> i64 {
    if i == 0 {
        l.body_x
    } else {
        origin_x
    }
}

/// Vertical space a note takes from its origin, flag base included.
fn note_height(l: &NoteLayout, origin_y: i64, m: Metrics, line_gap: u32, lines: usize) -> u32 {
    let text_bottom = line_top(l, m, line_gap, lines - 1) + m.glyph_h() as i64;
    let flag_bottom = l.text_top + l.flag.base_dy.ceil() as i64 + MAX_FLAG_STROKE as i64;
    (text_bottom.max(flag_bottom) - origin_y) as u32
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Outline triangle of the given stroke: every pixel whose centre lies
/// closer than half the stroke to an edge.
fn draw_flag(l: &NoteLayout, stroke: u32, put: &mut impl FnMut(i64, i64)) {
    // Odd strokes centre on pixel rows, even ones on pixel boundaries.
    let shift = if stroke % 2 == 1 { 0.5 } else { 0.0 };
    let top = l.text_top as f64 - l.flag.headroom + shift;
    let base = l.text_top as f64 + l.flag.base_dy + shift;
    let v = [
        (l.center_x, top),
        (l.center_x - l.flag.half_base, base),
        (l.center_x + l.flag.half_base, base),
    ];
    let half = stroke as f64 / 2.0;
    let pad = stroke as f64 + 1.0;
    let (x0, x1) = ((v[1].0 - pad).floor() as i64, (v[2].0 + pad).ceil() as i64);
    let (y0, y1) = ((top - pad).floor() as i64, (base + pad).ceil() as i64);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            let d = (0..3)
                .map(|i| segment_distance(p, v[i], v[(i + 1) % 3]))
                .fold(f64::INFINITY, f64::min);
            if d < half {
                put(x, y);
            }
        }
    }
}

/// Small filled apex-up triangle with its bounding box at `b`.
fn draw_mark(b: BBox, put: &mut impl FnMut(i64, i64)) {
    let cx = b.x as f64 + b.w as f64 / 2.0;
    for r in 0..b.h {
        let half = (r as f64 + 1.0) * (b.w as f64 / 2.0) / b.h as f64;
        for x in b.x..b.right() {
            if (x as f64 + 0.5 - cx).abs() <= half {
                put(x as i64, (b.y + r) as i64);
            }
        }
    }
}

fn mark_box(l: &NoteLayout, origin_x: i64, m: Metrics, line_gap: u32, char_index: usize) -> BBox {
    let cell_x = line_x(l, origin_x, 1) + (char_index as u32 * m.advance()) as i64;
    let x = cell_x + ((m.glyph_w() - MARK_W) / 2) as i64;
    let y = line_top(l, m, line_gap, 1) + ((m.glyph_h() - MARK_H) / 2) as i64;
    BBox::new(x as u32, y as u32, MARK_W, MARK_H)
}

struct NoteInk {
    pixels: Vec<(i64, i64)>,
}

impl NoteInk {
    fn bbox(&self) -> Option<BBox> {
        let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for &(x, y) in &self.pixels {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        (x0 <= x1).then(|| BBox::from_corners(x0 as u32, y0 as u32, x1 as u32, y1 as u32))
    }
}

fn render_note(
    m: Metrics,
    line_gap: u32,
    origin: (i64, i64),
    number: u32,
    lines: &[&str],
    flag_stroke: Option<u32>,
    mark: Option<BBox>,
) -> NoteInk {
    let l = layout(m, origin, number);
    let mut pixels = Vec::new();
    let mut put = |x, y| pixels.push((x, y));
    font::draw_text(&number.to_string(), l.number_x, l.text_top, m, &mut put);
    for (i, line) in lines.iter().enumerate() {
        font::draw_text(line, line_x(&l, origin.0, i), line_top(&l, m, line_gap, i), m, &mut put);
    }
    if let Some(stroke) = flag_stroke {
        draw_flag(&l, stroke, &mut put);
    }
    if let Some(b) = mark {
        draw_mark(b, &mut put);
    }
    NoteInk { pixels }
}

/// Greedy word wrap. The first line holds at most `first` characters, the
/// others at most `width`.
fn wrap(text: &str, first: usize, width: usize, note: u32) -> Result<Vec<String>, FixtureError> {
    let mut lines: Vec<String> = Vec::new();
    for para in text.split('\n') {
        let mut cur = String::new();
        for word in para.split(' ').filter(|w| !w.is_empty()) {
            let width = if lines.is_empty() { first } else { width };
            if word.chars().count() > width {
                return Err(FixtureError::InvalidSpec(format!(
                    "note {note}: word {word:?} is longer than {width} characters"
                )));
            }
            if !cur.is_empty() && cur.chars().count() + 1 + word.chars().count() > width {
                lines.push(std::mem::take(&mut cur));
            }
            if !cur.is_empty() {
                cur.push(' ');
            }
            cur.push_str(word);
        }
        if !cur.is_empty() {
            lines.push(cur);
        }
    }
    if lines.is_empty() {
        return Err(FixtureError::InvalidSpec(format!("note {note} has no text")));
    }
    Ok(lines)
}

impl CorpusSpec {
    pub fn metrics(&self) -> Metrics {
        Metrics { scale: self.scale }
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        let bad = |s: String| Err(FixtureError::InvalidSpec(s));
        if self.font != FONT_ID {
            return bad(format!("unknown font {:?}", self.font));
        }
        if self.scale == 0 || self.wrap_chars == 0 {
            return bad("scale and wrap_chars must be positive".into());
        }
        if self.note_gap <= self.line_gap {
            return bad("note_gap must exceed line_gap".into());
        }
        if !(1..=MAX_FLAG_STROKE).contains(&self.flag_stroke) {
            return bad(format!("flag_stroke must be within 1..={MAX_FLAG_STROKE}"));
        }
        if self.pages.is_empty() {
            return bad("no pages".into());
        }
        if let Some(ch) = self.drawing_id.chars().find(|&c| !font::is_supported(c)) {
            return Err(FixtureError::UnsupportedGlyph { ch, note: 0 });
        }
        for (p, page) in self.pages.iter().enumerate() {
            if page.columns.is_empty() || page.columns.iter().all(|c| c.notes.is_empty()) {
                return bad(format!("page {p} has no notes"));
            }
            let mut seen = BTreeSet::new();
            for n in page.columns.iter().flat_map(|c| &c.notes) {
                if n.number == 0 {
                    return bad(format!("page {p}: note numbers start at 1"));
                }
                if !seen.insert(n.number) {
                    return bad(format!("page {p}: note {} appears twice", n.number));
                }
                if let Some(ch) = n.text.chars().find(|&c| c != '\n' && !font::is_supported(c)) {
                    return Err(FixtureError::UnsupportedGlyph { ch, note: n.number });
                }
                if let Some(s) = n.flag_stroke {
                    if !(1..=MAX_FLAG_STROKE).contains(&s) {
                        return bad(format!("note {}: flag_stroke out of range", n.number));
                    }
                }
            }
        }
        Ok(())
    }

    fn column_width(&self, columns: u32) -> Result<u32, FixtureError> {
        let used = 2 * self.margin + (columns - 1) * self.column_gap;
        if used >= self.page_width {
            return Err(FixtureError::InvalidSpec("page too narrow for its columns".into()));
        }
        Ok((self.page_width - used) / columns)
    }
}

/// Everything rendered for one page before it is stamped.
struct PlacedNote {
    manifest: ManifestNote,
    ink: NoteInk,
}

fn place_page(spec: &CorpusSpec, page_index: u32, page: &PageSpec, rng: &mut ChaCha8Rng) -> Result<(Vec<PlacedNote>, u32), FixtureError> {
    let m = spec.metrics();
    let ncols = page.columns.len() as u32;
    let col_w = spec.column_width(ncols)?;
    let mut placed = Vec::new();
    let mut content_bottom = spec.margin;
    for (ci, col) in page.columns.iter().enumerate() {
        let ox = (spec.margin + ci as u32 * (col_w + spec.column_gap)) as i64;
        let mut oy = spec.margin as i64;
        for (ri, n) in col.notes.iter().enumerate() {
            let l = layout(m, (ox, oy), n.number);
            let fits = |from: i64| ((ox + col_w as i64 - from + m.scale as i64) / m.advance() as i64).max(0) as usize;
            let lines = wrap(
                &n.text,
                spec.wrap_chars.min(fits(l.body_x)),
                spec.wrap_chars.min(fits(ox)),
                n.number,
            )?;
            for (i, line) in lines.iter().enumerate() {
                let right = line_x(&l, ox, i) + m.text_width(line.chars().count()) as i64;
                if right > ox + col_w as i64 {
                    return Err(FixtureError::InvalidSpec(format!(
                        "note {} line {} is wider than its column",
                        n.number,
                        i + 1
                    )));
                }
            }
            let mark = if n.inline_mark && lines.len() > 1 {
                let spaces: Vec<usize> = lines[1].char_indices().filter(|(_, c)| *c == ' ').map(|(i, _)| i).collect();
                let near: Vec<usize> = spaces.iter().copied().filter(|&i| i <= 4).collect();
                let pool = if near.is_empty() { &spaces } else { &near };
                (!pool.is_empty()).then(|| mark_box(&l, ox, m, spec.line_gap, pool[rng.random_range(0..pool.len())]))
            } else {
                None
            };
            let stroke = n.flagged.then(|| n.flag_stroke.unwrap_or(spec.flag_stroke));
            let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
            let ink = render_note(m, spec.line_gap, (ox, oy), n.number, &refs, stroke, mark);
            let bbox = ink.bbox().expect("a note always has a number");
            let height = note_height(&l, oy, m, spec.line_gap, lines.len());
            placed.push(PlacedNote {
                manifest: ManifestNote {
                    page_index,
                    column_index: ci as u32,
                    row_order: ri as u32,
                    number: n.number,
                    text: lines.join("\n"),
                    flagged: n.flagged,
                    flag_stroke: stroke,
                    bbox,
                    origin: [ox as u32, oy as u32],
                    inline_mark: mark,
                },
                ink,
            });
            oy += (height + spec.note_gap) as i64;
        }
        content_bottom = content_bottom.max((oy - spec.note_gap as i64) as u32);
    }
    Ok((placed, content_bottom))
}

/// Renders every page and its ground truth. Deterministic for `(spec, seed)`.
pub fn render_corpus(spec: &CorpusSpec, seed: u64) -> Result<(Vec<PageImage>, GroundTruthManifest), FixtureError> {
    spec.validate()?;
    let m = spec.metrics();
    let mut pages = Vec::new();
    let mut manifest = GroundTruthManifest {
        drawing_id: spec.drawing_id.clone(),
        font: spec.font.clone(),
        scale: spec.scale,
        line_gap: spec.line_gap,
        pages: Vec::new(),
        notes: Vec::new(),
    };
    let total = spec.pages.len();
    for (pi, page) in spec.pages.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((pi as u64) << 32));
        let (placed, content_bottom) = place_page(spec, pi as u32, page, &mut rng)?;
        let title_space = if spec.title_block { TITLE_GAP + TITLE_H } else { 0 };
        let needed = content_bottom + title_space + spec.margin;
        let height = match spec.page_height {
            Some(h) if h < needed => {
                return Err(FixtureError::InvalidSpec(format!("page {pi} needs {needed} px of height")));
            }
            Some(h) => h,
            None => needed,
        };
        let mut canvas = Canvas::new(spec.page_width, height);
        if spec.frame {
            let inset = BBox::new(FRAME_INSET, FRAME_INSET, spec.page_width - 2 * FRAME_INSET, height - 2 * FRAME_INSET);
            canvas.rect_outline(inset, FRAME_STROKE);
        }
        if spec.title_block {
            let b = BBox::new(spec.page_width - spec.margin - TITLE_W, height - spec.margin - TITLE_H, TITLE_W, TITLE_H);
            canvas.rect_outline(b, FRAME_STROKE);
            let lines = [format!("DWG NO {}", spec.drawing_id), format!("SHEET {} OF {}", pi + 1, total)];
            for (i, line) in lines.iter().enumerate() {
                let y = b.y + 20 + i as u32 * (m.glyph_h() + spec.line_gap);
                font::draw_text(line, (b.x + 20) as i64, y as i64, m, |x, y| canvas.put(x, y));
            }
        }
        let mut columns: Vec<Option<BBox>> = vec![None; page.columns.len()];
        for p in &placed {
            for &(x, y) in &p.ink.pixels {
                canvas.put(x, y);
            }
            let c = &mut columns[p.manifest.column_index as usize];
            *c = Some(c.map_or(p.manifest.bbox, |b| b.union(&p.manifest.bbox)));
        }
        let columns: Vec<BBox> = columns.into_iter().flatten().collect();
        let region = columns.iter().skip(1).fold(columns[0], |a, b| a.union(b));
        manifest.pages.push(ManifestPage {
            page_index: pi as u32,
            width: spec.page_width,
            height,
            region,
            columns,
        });
        manifest.notes.extend(placed.into_iter().map(|p| p.manifest));
        pages.push(PageImage {
            page_index: pi as u32,
            width: spec.page_width,
            height,
            pixels: canvas.pixels,
            source_id: spec.drawing_id.clone(),
        });
    }
    Ok((pages, manifest))
}

/// The same corpus with every flag left off, for comparing against
/// flag removal.
pub fn without_flags(spec: &CorpusSpec) -> CorpusSpec {
    let mut s = spec.clone();
    for n in s.pages.iter_mut().flat_map(|p| &mut p.columns).flat_map(|c| &mut c.notes) {
        n.flagged = false;
    }
    s
}

/// Redraws one note in place from manifest data, after clearing its box.
pub(crate) fn redraw_note(page: &mut PageImage, manifest: &GroundTruthManifest, note: &ManifestNote, text: &str) -> BBox {
    let m = Metrics { scale: manifest.scale };
    for y in note.bbox.y..note.bbox.bottom() {
        for x in note.bbox.x..note.bbox.right() {
            page.set(x, y, 255);
        }
    }
    let lines: Vec<&str> = text.split('\n').collect();
    let origin = (note.origin[0] as i64, note.origin[1] as i64);
    let ink = render_note(m, manifest.line_gap, origin, note.number, &lines, note.flag_stroke, note.inline_mark);
    for &(x, y) in &ink.pixels {
        if x >= 0 && y >= 0 && (x as u32) < page.width && (y as u32) < page.height {
            page.set(x as u32, y as u32, 0);
        }
    }
    ink.bbox().expect("a note always has a number")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_note(text: &str, flagged: bool) -> CorpusSpec {
        CorpusSpec {
            pages: vec![PageSpec {
                columns: vec![ColumnSpec {
                    notes: vec![NoteSpec::new(1, text, flagged)],
                }],
            }],
            frame: false,
            title_block: false,
            ..CorpusSpec::default()
        }
    }

    fn ink_bbox(p: &PageImage) -> BBox {
        let mut b: Option<BBox> = None;
        for y in 0..p.height {
            for x in 0..p.width {
                if p.get(x, y) == 0 {
                    let px = BBox::new(x, y, 1, 1);
                    b = Some(b.map_or(px, |b| b.union(&px)));
                }
            }
        }
        b.unwrap()
    }

    #[test]
    fn single_plain_note_bbox_is_drawn_extent() {
        let (pages, man) = render_corpus(&one_note("TEST", false), 0).unwrap();
        assert_eq!(pages.len(), 1);
        assert_eq!(man.notes.len(), 1);
        assert_eq!(man.notes[0].text, "TEST");
        assert_eq!(man.notes[0].ocr_text(), "1 TEST");
        assert_eq!(man.notes[0].bbox, ink_bbox(&pages[0]));
        assert_eq!(man.notes[0].bbox.h, 21);
        assert_eq!(man.pages[0].region, man.notes[0].bbox);
    }

    #[test]
    fn flag_encloses_number_with_clearance() {
        let (plain, _) = render_corpus(&one_note("TEST", false), 0).unwrap();
        let (flagged, man) = render_corpus(&one_note("TEST", true), 0).unwrap();
        let digit = {
            let l = layout(Metrics { scale: 3 }, (130, 130), 1);
            BBox::new(l.number_x as u32, l.text_top as u32, 15, 21)
        };
        let mut added = 0;
        for y in 0..plain[0].height {
            for x in 0..plain[0].width {
                let (a, b) = (plain[0].get(x, y), flagged[0].get(x, y));
                assert!(!(a == 0 && b != 0), "flag rendering removed ink");
                if a != 0 && b == 0 {
                    added += 1;
                    let inside = x + 4 > digit.x && x < digit.right() + 4 && y + 4 > digit.y && y < digit.bottom() + 4;
                    assert!(!inside, "flag ink at ({x},{y}) within 4 px of the number");
                }
            }
        }
        assert!(added > 150);
        let b = man.notes[0].bbox;
        assert!(b.y < digit.y && b.x < digit.x && b.bottom() > digit.bottom());
    }

    #[test]
    fn unsupported_glyph() {
        let err = render_corpus(&one_note("TEST ¶ 3", false), 0).unwrap_err();
        assert_eq!(err, FixtureError::UnsupportedGlyph { ch: '¶', note: 1 });
    }

    #[test]
    fn wrapping_keeps_breaks_and_limits_width() {
        let lines = wrap("AAA BBB CCC\nDD", 7, 7, 1).unwrap();
        assert_eq!(lines, vec!["AAA BBB", "CCC", "DD"]);
        assert!(wrap("ABCDEFGH", 7, 7, 1).is_err());
        assert_eq!(wrap("AAA BBB CCC", 3, 7, 1).unwrap(), vec!["AAA", "BBB CCC"]);
    }

    #[test]
    fn spec_validation() {
        let mut s = one_note("A", false);
        s.note_gap = s.line_gap;
        assert!(s.validate().is_err());
        let mut s = one_note("A", false);
        s.pages[0].columns[0].notes.push(NoteSpec::new(1, "B", false));
        assert!(s.validate().is_err());
        let mut s = one_note("A", false);
        s.page_height = Some(100);
        assert!(render_corpus(&s, 0).is_err());
    }

    #[test]
    fn spec_json_defaults() {
        let s: CorpusSpec = serde_json::from_str(r#"{"pages":[{"columns":[{"notes":[{"number":1,"text":"A","flagged":true}]}]}]}"#).unwrap();
        assert_eq!(s.scale, 3);
        assert!(s.pages[0].columns[0].notes[0].flagged);
        s.validate().unwrap();
    }
}
