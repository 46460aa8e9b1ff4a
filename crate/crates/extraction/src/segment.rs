//! Region, column and note segmentation driven by white-pixel runs.

use aibat_core::{BBox, NoteCrop};

use crate::components::{label_components, Component};
use crate::config::ExtractionConfig;
use crate::raster::{runs, BinaryImage};
use crate::ExtractError;

/// Components this small are treated as specks and never stretch a box.
const SPECK_AREA: u32 = 2;

/// Text lines closer than this many median line heights form one cluster.
const CLUSTER_GAP_LINES: f64 = 3.0;

/// A binarized sub-image together with where it sits on its page.
#[derive(Debug, Clone)]
pub struct Region {
    pub page_index: u32,
    /// Position on the page.
    pub bbox: BBox,
    pub image: BinaryImage,
}

impl Region {
    /// Region covering a whole image at the page origin.
    pub fn whole(page_index: u32, image: BinaryImage) -> Self {
        Self {
            page_index,
            bbox: image.bbox(),
            image,
        }
    }

    pub fn of(page_index: u32, page: &BinaryImage, bbox: BBox) -> Self {
        Self {
            page_index,
            bbox,
            image: page.crop(bbox),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ColumnCrop {
    pub page_index: u32,
    pub column_index: u32,
    /// Position on the page.
    pub bbox: BBox,
    pub image: BinaryImage,
}

fn is_blank_row(ink: u32, width: u32, cfg: &ExtractionConfig) -> bool {
    let white = (width - ink) as f64 / width as f64;
    white >= cfg.row_blank_white_frac
}

/// Row bands that carry text: maximal runs of non-blank rows.
///
/// Bands shorter than half the median band height are not text lines (a
/// flag's base stroke, an underline) and are folded into the nearer
/// neighbouring band.
fn text_bands(img: &BinaryImage, cfg: &ExtractionConfig) -> Vec<(usize, usize)> {
    let profile = img.row_profile();
    let mut bands = runs(&profile, |&ink| !is_blank_row(ink, img.width, cfg));
    let mut heights: Vec<u32> = bands.iter().map(|(a, b)| (b - a) as u32).collect();
    let min_height = median(&mut heights) / 2.0;
    while bands.len() > 1 {
        let Some(i) = bands.iter().position(|(a, b)| ((b - a) as f64) < min_height) else {
            break;
        };
        let gap_above = (i > 0).then(|| bands[i].0 - bands[i - 1].1);
        let gap_below = bands.get(i + 1).map(|next| next.0 - bands[i].1);
        let into = match (gap_above, gap_below) {
            (Some(up), Some(down)) if down < up => i + 1,
            (Some(_), _) => i - 1,
            (None, _) => i + 1,
        };
        let (lo, hi) = (i.min(into), i.max(into));
        bands[lo] = (bands[lo].0, bands[hi].1);
        bands.remove(hi);
    }
    bands
}

fn median(values: &mut [u32]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
    }
}

/// Union of the boxes of non-speck components whose rows overlap
/// `[top, bottom)` and which stay within `slack` rows of that range.
fn components_extent(
    comps: &[Component],
    top: u32,
    bottom: u32,
    slack: u32,
) -> Option<BBox> {
    comps
        .iter()
        .filter(|c| c.area > SPECK_AREA)
        .filter(|c| c.bbox.y < bottom && c.bbox.bottom() > top)
        .filter(|c| c.bbox.y + slack >= top && c.bbox.bottom() <= bottom + slack)
        .map(|c| c.bbox)
        .reduce(|a, b| a.union(&b))
}

/// Finds the notes area: the largest cluster of text lines on the page.
///
/// Returns `cfg.region_override` untouched when it is set and fits the page.
pub fn detect_notes_region(page: &BinaryImage, cfg: &ExtractionConfig) -> Result<BBox, ExtractError> {
    if let Some(b) = cfg.region_override {
        if b.w == 0 || b.h == 0 || !page.bbox().contains(&b) {
            return Err(ExtractError::RegionOutOfBounds(b));
        }
        return Ok(b);
    }
    if !page.has_ink() {
        return Err(ExtractError::NoInkFound);
    }
    let profile = page.row_profile();
    let mut bands = runs(&profile, |&ink| !is_blank_row(ink, page.width, cfg));
    if bands.is_empty() {
        bands = runs(&profile, |&ink| ink > 0);
    }
    let mut heights: Vec<u32> = bands.iter().map(|(a, b)| (b - a) as u32).collect();
    let line_h = median(&mut heights).max(1.0);
    let max_gap = CLUSTER_GAP_LINES * line_h;

    let mut clusters: Vec<(usize, usize)> = Vec::new();
    for &(a, b) in &bands {
        match clusters.last_mut() {
            Some(last) if ((a - last.1) as f64) < max_gap => last.1 = b,
            _ => clusters.push((a, b)),
        }
    }
    let ink_in = |(a, b): (usize, usize)| profile[a..b].iter().map(|&v| v as u64).sum::<u64>();
    let (top, bottom) = clusters
        .iter()
        .copied()
        .fold(None, |best: Option<(usize, usize)>, c| match best {
            Some(b) if ink_in(b) >= ink_in(c) => Some(b),
            _ => Some(c),
        })
        .expect("at least one band");

    let labeling = label_components(page);
    let slack = max_gap.ceil() as u32;
    let extent = components_extent(&labeling.components, top as u32, bottom as u32, slack);
    Ok(extent.unwrap_or_else(|| {
        let rows = page.crop(BBox::new(0, top as u32, page.width, (bottom - top) as u32));
        rows.ink_bbox()
            .map(|b| b.offset(0, top as u32))
            .unwrap_or(BBox::new(0, top as u32, page.width, (bottom - top) as u32))
    }))
}

/// Splits a region into columns at wide, fully ink-free vertical gaps.
///
/// Column extents plus the qualifying gaps tile the region width; a region
/// without such a gap comes back as a single column.
pub fn split_columns(region: &Region, cfg: &ExtractionConfig) -> Vec<ColumnCrop> {
    let img = &region.image;
    let min_gap = cfg.column_gap_min_frac * img.width as f64;
    let profile = img.column_profile();
    let gaps: Vec<(usize, usize)> = runs(&profile, |&ink| ink == 0)
        .into_iter()
        .filter(|(a, b)| (b - a) as f64 >= min_gap)
        .collect();

    let mut spans = Vec::new();
    let mut cursor = 0usize;
    for (a, b) in gaps {
        if a > cursor {
            spans.push((cursor, a));
        }
        cursor = b;
    }
    if cursor < img.width as usize {
        spans.push((cursor, img.width as usize));
    }

    spans
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let local = BBox::new(a as u32, 0, (b - a) as u32, img.height);
            ColumnCrop {
                page_index: region.page_index,
                column_index: i as u32,
                bbox: local.offset(region.bbox.x, region.bbox.y),
                image: img.crop(local),
            }
        })
        .collect()
}

/// Typical gap between lines of the same note.
///
/// Gaps are sorted and cut at the largest ratio between neighbours; if that
/// ratio reaches `factor` the lower part holds line gaps and the upper part
/// note gaps. Otherwise all gaps are taken to be line gaps.
fn line_gap_reference(gaps: &[u32], factor: f64) -> f64 {
    let mut sorted = gaps.to_vec();
    sorted.sort_unstable();
    let mut cut = (1.0f64, sorted.len());
    for i in 1..sorted.len() {
        let r = sorted[i] as f64 / sorted[i - 1].max(1) as f64;
        if r > cut.0 {
            cut = (r, i);
        }
    }
    let lower = if cut.0 >= factor { &mut sorted[..cut.1] } else { &mut sorted[..] };
    median(lower)
}

/// Cuts a column into notes, top to bottom.
///
/// Non-blank row bands are merged while the blank gap between them stays
/// below `note_gap_factor` times the typical line gap. Each note box is then
/// widened to the full extent of the ink components touching its bands
/// (thin flag strokes can sit in rows that count as blank) without
/// overlapping its neighbours.
pub fn split_notes(column: &ColumnCrop, cfg: &ExtractionConfig) -> Vec<NoteCrop> {
    let img = &column.image;
    let bands = text_bands(img, cfg);
    if bands.is_empty() {
        return Vec::new();
    }
    let gaps: Vec<u32> = bands.windows(2).map(|w| (w[1].0 - w[0].1) as u32).collect();
    let reference = line_gap_reference(&gaps, cfg.note_gap_factor);

    let mut groups: Vec<(usize, usize)> = vec![bands[0]];
    for (band, gap) in bands[1..].iter().zip(&gaps) {
        if (*gap as f64) < cfg.note_gap_factor * reference {
            groups.last_mut().unwrap().1 = band.1;
        } else {
            groups.push(*band);
        }
    }

    let labeling = label_components(img);
    let mut out = Vec::with_capacity(groups.len());
    let mut floor = 0u32;
    for (i, &(a, b)) in groups.iter().enumerate() {
        let ceiling = groups.get(i + 1).map_or(img.height, |g| g.0 as u32);
        let (a, b) = (a as u32, b as u32);
        let extent = components_extent(&labeling.components, a, b, img.height)
            .map(|e| e.union(&BBox::new(e.x, a, e.w, b - a)))
            .unwrap_or_else(|| BBox::new(0, a, img.width, b - a));
        let top = extent.y.max(floor);
        let bottom = extent.bottom().min(ceiling);
        let window = BBox::new(extent.x, top, extent.w, bottom - top);
        let Some(tight) = img.crop(window).ink_bbox().map(|t| t.offset(window.x, window.y)) else {
            continue;
        };
        floor = tight.bottom();
        let pixels = img.crop(tight).to_gray();
        out.push(NoteCrop {
            page_index: column.page_index,
            bbox: tight.offset(column.bbox.x, column.bbox.y),
            pixels,
            column_index: column.column_index,
            row_order: out.len() as u32,
        });
    }
    out
}
