//! Flag triangle detection (contour and morphological) and removal.

use aibat_core::geometry::simplify_closed;
use aibat_core::{BBox, Point, Polygon};

use crate::components::{label_components, trace_outer_border};
use crate::config::ExtractionConfig;
use crate::raster::BinaryImage;

/// Components this small never qualify, whatever the size gate says.
const SPECK_AREA: u32 = 2;

/// Looks for a triangle outline in the leading flag zone of a note crop.
///
/// Each ink component whose box fits the zone and is at least
/// `min_triangle_px` on both sides has its outer border traced; the border
/// qualifies when simplification at `rdp_epsilon_frac` of its perimeter
/// leaves exactly three vertices. Components are tried in raster order of
/// their first pixel and the first hit wins.
pub fn detect_triangle_contour(crop: &BinaryImage, cfg: &ExtractionConfig) -> Option<Polygon> {
    let zone = cfg.flag_zone_width(crop.width);
    let labeling = label_components(crop);
    for comp in &labeling.components {
        let b = comp.bbox;
        if comp.area <= SPECK_AREA
            || b.w < cfg.min_triangle_px
            || b.h < cfg.min_triangle_px
            || b.right() > zone
        {
            continue;
        }
        // Trace on an isolated copy of the component so neighbours that touch
        // its box cannot leak into the border walk.
        let window = BBox::new(b.x, b.y, b.w, b.h);
        let mut isolated = BinaryImage::new(b.w, b.h);
        for y in 0..b.h {
            for x in 0..b.w {
                if labeling.label_at(window.x + x, window.y + y) == comp.label {
                    isolated.set(x, y, true);
                }
            }
        }
        let start = (comp.start.0 - b.x, comp.start.1 - b.y);
        let ring: Vec<Point> = trace_outer_border(&isolated, start)
            .into_iter()
            .map(|(x, y)| Point::new((x + b.x) as f64, (y + b.y) as f64))
            .collect();
        if ring.len() < 3 {
            continue;
        }
        let perimeter = Polygon::new(ring.clone()).perimeter();
        let simplified = simplify_closed(&ring, cfg.rdp_epsilon_frac * perimeter);
        if simplified.len() == 3 {
            return Some(Polygon::new(simplified));
        }
    }
    None
}

fn erode(img: &BinaryImage, k: u32) -> BinaryImage {
    let r = (k / 2) as i64;
    let mut out = BinaryImage::new(img.width, img.height);
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let keep = (-r..=r).all(|dy| (-r..=r).all(|dx| img.get_signed(x + dx, y + dy)));
            if keep {
                out.set(x as u32, y as u32, true);
            }
        }
    }
    out
}

fn dilate(img: &BinaryImage, k: u32) -> BinaryImage {
    let r = (k / 2) as i64;
    let mut out = BinaryImage::new(img.width, img.height);
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            if !img.get(x as u32, y as u32) {
                continue;
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < img.width as i64 && ny < img.height as i64 {
                        out.set(nx as u32, ny as u32, true);
                    }
                }
            }
        }
    }
    out
}

/// Morphological opening with a `k`×`k` square: strokes thinner than `k`
/// vanish, wider ones come back unchanged.
pub fn opening(img: &BinaryImage, k: u32) -> BinaryImage {
    dilate(&erode(img, k), k)
}

/// Fraction of flag-zone pixels changed by an opening. Only the zone is
/// looked at, so ink elsewhere in the crop has no influence.
///
/// The last `k - 1` columns of the zone are left out of the count: the zone
/// edge can slice a glyph into a sliver narrower than the kernel.
pub fn morph_change_fraction(crop: &BinaryImage, cfg: &ExtractionConfig) -> f64 {
    if crop.width == 0 || crop.height == 0 {
        return 0.0;
    }
    let zone_w = cfg.flag_zone_width(crop.width);
    let zone = crop.crop(BBox::new(0, 0, zone_w, crop.height));
    let opened = opening(&zone, cfg.morph_kernel);
    let counted_w = zone_w.saturating_sub(cfg.morph_kernel - 1).max(1);
    let mut changed = 0u64;
    for y in 0..zone.height {
        for x in 0..counted_w {
            if zone.get(x, y) != opened.get(x, y) {
                changed += 1;
            }
        }
    }
    changed as f64 / (counted_w as u64 * zone.height as u64) as f64
}

/// True when an opening noticeably changes the flag zone, which is what a
/// thin triangle outline does.
pub fn detect_triangle_morph(crop: &BinaryImage, cfg: &ExtractionConfig) -> bool {
    morph_change_fraction(crop, cfg) > cfg.morph_diff_frac
}

/// Mean ink run measured inward from points along each edge, at least 1.
pub fn stroke_thickness(crop: &BinaryImage, triangle: &Polygon) -> f64 {
    let c = triangle.centroid();
    let mut runs = Vec::new();
    for (a, b) in triangle.edges() {
        let len = a.distance(&b);
        if len < 1.0 {
            continue;
        }
        let (tx, ty) = ((b.x - a.x) / len, (b.y - a.y) / len);
        // Pick the normal that points toward the centroid.
        let (mut nx, mut ny) = (-ty, tx);
        let mid = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
        if (c.x - mid.x) * nx + (c.y - mid.y) * ny < 0.0 {
            nx = -nx;
            ny = -ny;
        }
        // Sample the middle of the edge; corners are blobby.
        let samples = (len * 0.6).floor() as usize;
        for i in 0..samples {
            let t = 0.2 * len + i as f64;
            let p = Point::new(a.x + tx * t, a.y + ty * t);
            let mut run = 0u32;
            let mut step = 0u32;
            loop {
                let qx = (p.x + nx * step as f64).round() as i64;
                let qy = (p.y + ny * step as f64).round() as i64;
                let ink = crop.get_signed(qx, qy);
                if ink {
                    run += 1;
                } else if run > 0 || step > 1 {
                    break;
                }
                step += 1;
                if step > 64 {
                    break;
                }
            }
            if run > 0 {
                runs.push(run as f64);
            }
        }
    }
    if runs.is_empty() {
        return 1.0;
    }
    (runs.iter().sum::<f64>() / runs.len() as f64).max(1.0)
}

/// Erases a flag outline: every pixel within the measured stroke width
/// (plus one pixel of slack for rasterization) of a triangle edge becomes
/// background. Ink is only ever removed.
pub fn remove_flag(crop: &BinaryImage, triangle: &Polygon) -> BinaryImage {
    let reach = stroke_thickness(crop, triangle) + 1.0;
    let mut out = crop.clone();
    let Some((x0, y0, x1, y1)) = triangle.bounds() else {
        return out;
    };
    let lo_x = (x0 - reach).floor().max(0.0) as u32;
    let lo_y = (y0 - reach).floor().max(0.0) as u32;
    let hi_x = ((x1 + reach).ceil() as u32).min(crop.width.saturating_sub(1));
    let hi_y = ((y1 + reach).ceil() as u32).min(crop.height.saturating_sub(1));
    if crop.width == 0 || crop.height == 0 {
        return out;
    }
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            if crop.get(x, y) && triangle.distance_to_boundary(&Point::new(x as f64, y as f64)) <= reach {
                out.set(x, y, false);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Draws a line of width `w` by stamping every point within `w/2` of the
    /// segment; a cheap reference rasterizer for tests.
    fn stroke(img: &mut BinaryImage, a: (f64, f64), b: (f64, f64), w: f64) {
        let (pa, pb) = (Point::new(a.0, a.1), Point::new(b.0, b.1));
        for y in 0..img.height {
            for x in 0..img.width {
                let p = Point::new(x as f64, y as f64);
                if p.distance_to_segment(&pa, &pb) <= w / 2.0 {
                    img.set(x, y, true);
                }
            }
        }
    }

    fn triangle(img: &mut BinaryImage, apex: (f64, f64), base: f64, height: f64, w: f64) {
        let l = (apex.0 - base / 2.0, apex.1 + height);
        let r = (apex.0 + base / 2.0, apex.1 + height);
        stroke(img, apex, l, w);
        stroke(img, l, r, w);
        stroke(img, r, apex, w);
    }

    fn block(img: &mut BinaryImage, b: BBox) {
        for y in b.y..b.bottom() {
            for x in b.x..b.right() {
                img.set(x, y, true);
            }
        }
    }

    /// A note-like crop: optional triangle at the left, a thick "digit" in
    /// it, and body text as thick blocks further right.
    fn note_crop(flag_width: Option<f64>) -> BinaryImage {
        let mut img = BinaryImage::new(600, 70);
        if let Some(w) = flag_width {
            triangle(&mut img, (30.0, 2.0), 56.0, 64.0, w);
        }
        block(&mut img, BBox::new(24, 36, 12, 21));
        for i in 0..20 {
            block(&mut img, BBox::new(80 + i * 25, 36, 15, 21));
        }
        img
    }

    #[test]
    fn contour_finds_thick_triangle() {
        let crop = note_crop(Some(2.0));
        let tri = detect_triangle_contour(&crop, &ExtractionConfig::default()).expect("triangle");
        assert_eq!(tri.len(), 3);
        let (x0, y0, x1, y1) = tri.bounds().unwrap();
        assert!(x0 < 5.0 && x1 > 55.0 && y0 < 5.0 && y1 > 62.0, "{tri:?}");
    }

    #[test]
    fn contour_ignores_plain_notes_and_small_triangles() {
        let cfg = ExtractionConfig::default();
        assert!(detect_triangle_contour(&note_crop(None), &cfg).is_none());

        // Glyph-sized solid triangle inside body text.
        let mut crop = note_crop(None);
        for y in 0..8u32 {
            for x in (4 - y / 2)..=(4 + y / 2) {
                crop.set(300 + x, 40 + y, true);
            }
        }
        assert!(detect_triangle_contour(&crop, &cfg).is_none());

        // Same small triangle inside the flag zone is still below the size gate.
        let mut crop = note_crop(None);
        for y in 0..8u32 {
            for x in (4 - y / 2)..=(4 + y / 2) {
                crop.set(5 + x, 5 + y, true);
            }
        }
        assert!(detect_triangle_contour(&crop, &cfg).is_none());
    }

    #[test]
    fn contour_rejects_triangles_outside_zone() {
        let mut crop = BinaryImage::new(600, 70);
        triangle(&mut crop, (300.0, 2.0), 56.0, 64.0, 2.0);
        assert!(detect_triangle_contour(&crop, &ExtractionConfig::default()).is_none());
    }

    #[test]
    fn morph_fires_on_thin_triangle_only() {
        let cfg = ExtractionConfig::default();
        assert!(detect_triangle_morph(&note_crop(Some(1.0)), &cfg));
        assert!(!detect_triangle_morph(&note_crop(None), &cfg));
        assert!(!detect_triangle_morph(&BinaryImage::new(100, 40), &cfg));
    }

    #[test]
    fn morph_counts_removed_pixels() {
        // A lone 1-px diagonal of 30 pixels in a 600x70 crop: zone 90 wide,
        // counted width 88. Every diagonal pixel disappears under the opening.
        let mut crop = BinaryImage::new(600, 70);
        for i in 0..30 {
            crop.set(10 + i, 10 + i, true);
        }
        let f = morph_change_fraction(&crop, &ExtractionConfig::default());
        assert!((f - 30.0 / (88.0 * 70.0)).abs() < 1e-12);
    }

    #[test]
    fn remove_flag_restores_plain_rendering() {
        for w in [1.0, 2.0] {
            let flagged = note_crop(Some(w));
            let plain = note_crop(None);
            let tri = if w >= 2.0 {
                detect_triangle_contour(&flagged, &ExtractionConfig::default()).unwrap()
            } else {
                Polygon::new(vec![
                    Point::new(30.0, 2.0),
                    Point::new(2.0, 66.0),
                    Point::new(58.0, 66.0),
                ])
            };
            let cleaned = remove_flag(&flagged, &tri);
            assert!(cleaned.is_subset_of(&flagged));
            let mismatch = cleaned.diff_count(&plain) as f64 / (600.0 * 70.0);
            assert!(mismatch <= 0.01, "stroke {w}: {mismatch}");
            // Digit untouched.
            for y in 36..57 {
                for x in 24..36 {
                    assert!(cleaned.get(x, y));
                }
            }
        }
    }

    #[test]
    fn remove_flag_without_ink_is_identity() {
        let crop = note_crop(None);
        let tri = Polygon::new(vec![Point::new(300.0, 1.0), Point::new(270.0, 30.0), Point::new(330.0, 30.0)]);
        let mut empty_area = crop.clone();
        for y in 0..35 {
            for x in 250..350 {
                empty_area.set(x, y, false);
            }
        }
        assert_eq!(remove_flag(&empty_area, &tri), empty_area);
    }

    #[test]
    fn nested_triangles_lose_only_the_outer() {
        let mut crop = BinaryImage::new(200, 120);
        triangle(&mut crop, (60.0, 2.0), 110.0, 110.0, 2.0);
        triangle(&mut crop, (60.0, 40.0), 50.0, 50.0, 2.0);
        let mut inner = BinaryImage::new(200, 120);
        triangle(&mut inner, (60.0, 40.0), 50.0, 50.0, 2.0);
        let cfg = ExtractionConfig {
            flag_zone_frac: 0.9,
            ..Default::default()
        };
        let outer = detect_triangle_contour(&crop, &cfg).unwrap();
        assert!(outer.bounds().unwrap().2 > 100.0);
        let cleaned = remove_flag(&crop, &outer);
        assert_eq!(cleaned, inner);
    }

    #[test]
    fn thickness_tracks_stroke_width() {
        for w in [1.0, 2.0, 4.0] {
            let mut crop = BinaryImage::new(120, 120);
            triangle(&mut crop, (60.0, 5.0), 100.0, 100.0, w);
            let tri = detect_triangle_contour(
                &crop,
                &ExtractionConfig {
                    flag_zone_frac: 0.99,
                    ..Default::default()
                },
            );
            if let Some(tri) = tri {
                let t = stroke_thickness(&crop, &tri);
                assert!(t >= 0.75 * w && t <= w + 2.0, "w {w}: {t}");
            }
        }
    }
}
