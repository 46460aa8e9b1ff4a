use aibat_core::BBox;

/// Bilevel image, one byte per pixel: 1 = ink, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: u32,
    pub height: u32,
    bits: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width as usize * height as usize],
        }
    }

    /// Builds an image from row-major bits; any non-zero byte is ink.
    pub fn from_bits(width: u32, height: u32, bits: Vec<u8>) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize, "bit buffer size");
        let bits = bits.into_iter().map(|b| u8::from(b != 0)).collect();
        Self { width, height, bits }
    }

    /// Parses an ASCII picture where `#` is ink; handy in tests.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let h = rows.len() as u32;
        let w = rows.iter().map(|r| r.len()).max().unwrap_or(0) as u32;
        let mut img = Self::new(w, h);
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.bytes().enumerate() {
                if c == b'#' {
                    img.set(x as u32, y as u32, true);
                }
            }
        }
        img
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize] != 0
    }

    /// Like [`get`](Self::get) but out-of-bounds reads return background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 && self.get(x as u32, y as u32)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, ink: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = u8::from(ink);
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(0, 0, self.width, self.height)
    }

    pub fn ink_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn has_ink(&self) -> bool {
        self.bits.iter().any(|&b| b != 0)
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        &self.bits[y as usize * w..(y as usize + 1) * w]
    }

    /// Ink pixels per row.
    pub fn row_profile(&self) -> Vec<u32> {
        (0..self.height)
            .map(|y| self.row(y).iter().map(|&b| b as u32).sum())
            .collect()
    }

    /// Ink pixels per column.
    pub fn column_profile(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.width as usize];
        for y in 0..self.height {
            for (x, &b) in self.row(y).iter().enumerate() {
                out[x] += b as u32;
            }
        }
        out
    }

    /// Copies the pixels under `bbox`, which must lie inside the image.
    pub fn crop(&self, bbox: BBox) -> BinaryImage {
        assert!(self.bbox().contains(&bbox), "crop {bbox} outside {}", self.bbox());
        let mut bits = Vec::with_capacity(bbox.area() as usize);
        for y in bbox.y..bbox.bottom() {
            bits.extend_from_slice(&self.row(y)[bbox.x as usize..bbox.right() as usize]);
        }
        BinaryImage {
            width: bbox.w,
            height: bbox.h,
            bits,
        }
    }

    /// Tight box around all ink, if any.
    pub fn ink_bbox(&self) -> Option<BBox> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for y in 0..self.height {
            for (x, &b) in self.row(y).iter().enumerate() {
                if b != 0 {
                    let x = x as u32;
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != u32::MAX).then(|| BBox::from_corners(x0, y0, x1, y1))
    }

    /// Grayscale rendering: ink 0, background 255.
    pub fn to_gray(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b != 0 { 0 } else { 255 }).collect()
    }

    /// Number of pixels that differ between two same-sized images.
    pub fn diff_count(&self, other: &BinaryImage) -> usize {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// True when every ink pixel of `self` is also ink in `other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| a <= b)
    }
}

/// Maximal runs of consecutive indices where `pred` holds, as
/// half-open `(start, end)` pairs.
pub fn runs<T>(values: &[T], pred: impl Fn(&T) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, v) in values.iter().enumerate() {
        match (pred(v), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, values.len()));
    }
    out
}
