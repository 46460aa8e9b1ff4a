use aibat_core::PageImage;

use crate::config::{ExtractionConfig, Threshold};
use crate::raster::BinaryImage;

/// Threshold used when the histogram has no between-class variance at all
/// (blank or solid pages).
const FLAT_THRESHOLD: u8 = 127;

pub fn histogram(pixels: &[u8]) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &p in pixels {
        h[p as usize] += 1;
    }
    h
}

/// Smallest threshold `t` maximizing the between-class variance of the
/// split `{<= t} / {> t}`.
pub fn otsu_threshold(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &n)| v as f64 * n as f64).sum();
    let mut best_t = FLAT_THRESHOLD;
    let mut best = 0.0f64;
    let mut w0 = 0u64;
    let mut sum0 = 0.0f64;
    for t in 0..255usize {
        w0 += hist[t];
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let mu0 = sum0 / w0 as f64;
        let mu1 = (sum_all - sum0) / w1 as f64;
        let var = w0 as f64 * w1 as f64 * (mu0 - mu1) * (mu0 - mu1);
        if var > best {
            best = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Gray value at or below which a pixel counts as ink.
pub fn threshold_for(page: &PageImage, cfg: &ExtractionConfig) -> u8 {
    match cfg.binarize_threshold {
        Threshold::Fixed(t) => t,
        Threshold::Auto => otsu_threshold(&histogram(&page.pixels)),
    }
}

pub fn binarize(page: &PageImage, cfg: &ExtractionConfig) -> BinaryImage {
    let t = threshold_for(page, cfg);
    binarize_with(&page.pixels, page.width, page.height, t)
}

pub fn binarize_with(pixels: &[u8], width: u32, height: u32, threshold: u8) -> BinaryImage {
    BinaryImage::from_bits(width, height, pixels.iter().map(|&p| u8::from(p <= threshold)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Between-class variance computed from scratch for one threshold, via
    /// class means and weights over the raw pixels.
    fn variance_at(pixels: &[u8], t: u8) -> f64 {
        let (lo, hi): (Vec<f64>, Vec<f64>) = {
            let lo: Vec<f64> = pixels.iter().filter(|&&p| p <= t).map(|&p| p as f64).collect();
            let hi: Vec<f64> = pixels.iter().filter(|&&p| p > t).map(|&p| p as f64).collect();
            (lo, hi)
        };
        if lo.is_empty() || hi.is_empty() {
            return 0.0;
        }
        let n = pixels.len() as f64;
        let (w0, w1) = (lo.len() as f64 / n, hi.len() as f64 / n);
        let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
        let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
        w0 * w1 * (m0 - m1).powi(2)
    }

    fn brute_force(pixels: &[u8]) -> u8 {
        let mut best = (0.0f64, FLAT_THRESHOLD);
        for t in 0..=255u8 {
            let v = variance_at(pixels, t);
            if v > best.0 + 1e-9 * best.0.max(1.0) {
                best = (v, t);
            }
        }
        best.1
    }

    fn page(pixels: Vec<u8>, w: u32, h: u32) -> PageImage {
        PageImage::new(0, w, h, pixels, "t").unwrap()
    }

    #[test]
    fn blank_and_solid_pages() {
        let cfg = ExtractionConfig::default();
        assert_eq!(binarize(&page(vec![255; 64], 8, 8), &cfg).ink_count(), 0);
        assert_eq!(binarize(&page(vec![0; 64], 8, 8), &cfg).ink_count(), 64);
    }

    #[test]
    fn bimodal_matches_exhaustive_scan() {
        let pixels: Vec<u8> = (0..400).map(|i| if i % 2 == 0 { 30 } else { 220 }).collect();
        let t = otsu_threshold(&histogram(&pixels));
        assert_eq!(t, brute_force(&pixels));
        assert!((30..220).contains(&t));
        let img = binarize(&page(pixels, 20, 20), &ExtractionConfig::default());
        assert_eq!(img.ink_count(), 200);
    }

    #[test]
    fn noisy_histograms_match_exhaustive_scan() {
        // Deterministic LCG so the oracle sees varied, non-degenerate data.
        let mut s = 12345u64;
        for case in 0..20 {
            let pixels: Vec<u8> = (0..500)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let base = if (s >> 40) % 3 == 0 { 40 } else { 200 };
                    (base + ((s >> 20) % 50) as i32 - 25 + case) as u8
                })
                .collect();
            assert_eq!(otsu_threshold(&histogram(&pixels)), brute_force(&pixels), "case {case}");
        }
    }

    #[test]
    fn fixed_threshold() {
        let cfg = ExtractionConfig {
            binarize_threshold: Threshold::Fixed(100),
            ..Default::default()
        };
        let img = binarize(&page(vec![100, 101, 0, 255], 2, 2), &cfg);
        assert_eq!(img.bits(), &[1, 0, 1, 0]);
    }
}
