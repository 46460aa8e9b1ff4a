use aibat_core::BBox;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Threshold {
    /// Pick the threshold that maximizes between-class variance.
    #[default]
    Auto,
    /// Gray values `<=` this are ink.
    Fixed(u8),
}

/// Knobs for every extraction rule. Defaults are tuned on the synthetic
/// corpus; real drawings at other resolutions may need different values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub binarize_threshold: Threshold,
    /// Minimum width of an ink-free gap between columns, as a fraction of
    /// the notes region width.
    pub column_gap_min_frac: f64,
    /// A pixel row whose white fraction reaches this is blank.
    pub row_blank_white_frac: f64,
    /// Bands merge into one note while their gap is below this multiple of
    /// the typical line gap.
    pub note_gap_factor: f64,
    /// RDP tolerance as a fraction of the contour perimeter.
    pub rdp_epsilon_frac: f64,
    pub min_triangle_px: u32,
    /// Leading fraction of the crop width where flags can appear.
    pub flag_zone_frac: f64,
    pub morph_kernel: u32,
    pub morph_diff_frac: f64,
    /// Skip region detection and use this box.
    pub region_override: Option<BBox>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            binarize_threshold: Threshold::Auto,
            column_gap_min_frac: 0.05,
            row_blank_white_frac: 0.995,
            note_gap_factor: 1.8,
            rdp_epsilon_frac: 0.02,
            min_triangle_px: 12,
            flag_zone_frac: 0.15,
            morph_kernel: 3,
            morph_diff_frac: 0.005,
            region_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid extraction config: {0}")]
pub struct ConfigError(pub String);

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fractions = [
            ("column_gap_min_frac", self.column_gap_min_frac),
            ("row_blank_white_frac", self.row_blank_white_frac),
            ("rdp_epsilon_frac", self.rdp_epsilon_frac),
            ("flag_zone_frac", self.flag_zone_frac),
            ("morph_diff_frac", self.morph_diff_frac),
        ];
        for (name, v) in fractions {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError(format!("{name} must be in (0, 1), got {v}")));
            }
        }
        if !(self.note_gap_factor > 0.0) {
            return Err(ConfigError("note_gap_factor must be positive".into()));
        }
        if self.morph_kernel < 3 || self.morph_kernel % 2 == 0 {
            return Err(ConfigError(format!(
                "morph_kernel must be odd and >= 3, got {}",
                self.morph_kernel
            )));
        }
        Ok(())
    }

    /// Width in pixels of the flag zone for a crop of `width` pixels.
    pub fn flag_zone_width(&self, width: u32) -> u32 {
        ((self.flag_zone_frac * width as f64).ceil() as u32).clamp(1, width.max(1))
    }
}
