//! 8-connected component labelling and outer-border tracing.

use aibat_core::BBox;

use crate::raster::BinaryImage;

/// Neighbour offsets in clockwise order (image y grows downward),
/// starting at west.
const CLOCKWISE: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// 1-based label, in raster order of each component's first pixel.
    pub label: u32,
    pub bbox: BBox,
    pub area: u32,
    /// First pixel in raster order; always on the outer border.
    pub start: (u32, u32),
}

#[derive(Debug, Clone)]
pub struct Labeling {
    pub width: u32,
    pub height: u32,
    labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl Labeling {
    pub fn label_at(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Image containing only the pixels of component `label`.
    pub fn mask(&self, label: u32) -> BinaryImage {
        BinaryImage::from_bits(
            self.width,
            self.height,
            self.labels.iter().map(|&l| u8::from(l == label)).collect(),
        )
    }
}

pub fn label_components(img: &BinaryImage) -> Labeling {
    let (w, h) = (img.width as usize, img.height as usize);
    let mut labels = vec![0u32; w * h];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if labels[y * w + x] != 0 || !img.get(x as u32, y as u32) {
                continue;
            }
            let label = components.len() as u32 + 1;
            labels[y * w + x] = label;
            stack.push((x, y));
            let (mut x0, mut y0, mut x1, mut y1) = (x, y, x, y);
            let mut area = 0u32;
            while let Some((cx, cy)) = stack.pop() {
                area += 1;
                x0 = x0.min(cx);
                x1 = x1.max(cx);
                y0 = y0.min(cy);
                y1 = y1.max(cy);
                for (dx, dy) in CLOCKWISE {
                    let nx = cx as i64 + dx;
                    let ny = cy as i64 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let idx = ny as usize * w + nx as usize;
                    if labels[idx] == 0 && img.get(nx as u32, ny as u32) {
                        labels[idx] = label;
                        stack.push((nx as usize, ny as usize));
                    }
                }
            }
            components.push(Component {
                label,
                bbox: BBox::from_corners(x0 as u32, y0 as u32, x1 as u32, y1 as u32),
                area,
                start: (x as u32, y as u32),
            });
        }
    }
    Labeling {
        width: img.width,
        height: img.height,
        labels,
        components,
    }
}

/// Traces the outer border of the component containing `start` with Moore
/// neighbour following, stopping on Jacob's criterion (back at the start
/// pixel, about to repeat the first move).
///
/// `start` must be the component's first pixel in raster order so that its
/// west neighbour is background. Only ink of that component should be
/// present in `img` when components touch; pass [`Labeling::mask`] in that
/// case.
pub fn trace_outer_border(img: &BinaryImage, start: (u32, u32)) -> Vec<(u32, u32)> {
    let s = (start.0 as i64, start.1 as i64);
    let mut contour = vec![start];
    let mut p = s;
    let mut scan_from = 0usize;
    let mut first_dir: Option<usize> = None;
    let limit = 4 * (img.width as usize * img.height as usize) + 8;

    for _ in 0..limit {
        let next = (0..8).map(|k| (scan_from + k) % 8).find(|&d| {
            let (dx, dy) = CLOCKWISE[d];
            img.get_signed(p.0 + dx, p.1 + dy)
        });
        let Some(d) = next else {
            // Isolated pixel.
            return contour;
        };
        if p == s {
            match first_dir {
                None => first_dir = Some(d),
                Some(d0) if d0 == d => {
                    contour.pop();
                    return contour;
                }
                _ => {}
            }
        }
        let (dx, dy) = CLOCKWISE[d];
        p = (p.0 + dx, p.1 + dy);
        contour.push((p.0 as u32, p.1 as u32));
        // Resume scanning at the background pixel we passed just before
        // finding `p`, expressed relative to the new position.
        scan_from = if d % 2 == 0 { (d + 6) % 8 } else { (d + 5) % 8 };
    }
    contour
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_eight_connected_blobs() {
        let img = BinaryImage::from_ascii(&["#...#", ".#..#", "....#", "##..."]);
        let l = label_components(&img);
        assert_eq!(l.components.len(), 3);
        assert_eq!(l.components[0].area, 2);
        assert_eq!(l.components[1].bbox, BBox::new(4, 0, 1, 3));
        assert_eq!(l.components[2].start, (0, 3));
        assert_eq!(l.label_at(1, 1), 1);
    }

    #[test]
    fn traces_square_border_once() {
        let img = BinaryImage::from_ascii(&[".....", ".###.", ".###.", ".###.", "....."]);
        let c = trace_outer_border(&img, (1, 1));
        assert_eq!(c.len(), 8);
        assert_eq!(c[0], (1, 1));
        assert!(!c.contains(&(2, 2)));
        let unique: std::collections::HashSet<_> = c.iter().collect();
        assert_eq!(unique.len(), 8);
    }

    #[test]
    fn traces_single_pixel_and_line() {
        let img = BinaryImage::from_ascii(&["#"]);
        assert_eq!(trace_outer_border(&img, (0, 0)), vec![(0, 0)]);
        let line = BinaryImage::from_ascii(&["###"]);
        let c = trace_outer_border(&line, (0, 0));
        // Out along the line and back.
        assert_eq!(c, vec![(0, 0), (1, 0), (2, 0), (1, 0)]);
    }

    #[test]
    fn traces_thin_diagonal_loop() {
        let img = BinaryImage::from_ascii(&[
            "...#...", //
            "..#.#..", //
            ".#...#.", //
            "#######",
        ]);
        let c = trace_outer_border(&img, (3, 0));
        let unique: std::collections::HashSet<_> = c.iter().copied().collect();
        assert_eq!(unique.len(), img.ink_count());
    }
}
