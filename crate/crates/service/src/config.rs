//! Service configuration. Precedence, lowest first: built-in defaults,
//! config file, environment, command-line flags.

use std::path::Path;

use aibat_core::eval::StdKind;
use aibat_core::PricingTable;
use aibat_extraction::ExtractionConfig;
use aibat_fixtures::pair;
use aibat_llm::{ActionLegend, ExampleSets, LlmConfig};
use serde::{Deserialize, Serialize};

pub const ENV_ENDPOINT_URL: &str = "AIBAT_ENDPOINT_URL";
pub const ENV_OCR_CMD: &str = "AIBAT_OCR_CMD";

#[derive(Debug, thiserror::Error)]
pub enum ConfigLoadError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub extraction: ExtractionConfig,
    pub llm: LlmConfig,
    pub pricing: PricingTable,
    /// Shell command for OCR; `{input}` is the crop PNG path.
    pub ocr_command: Option<String>,
    /// Shell command turning a PDF into `page-<n>.png` files, with
    /// `{input}`, `{dpi}` and `{outdir}` placeholders.
    pub rasterizer_command: Option<String>,
    pub dpi: u32,
    pub cer_std: StdKind,
    pub legend: ActionLegend,
    pub examples: ExampleSets,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            extraction: ExtractionConfig::default(),
            llm: LlmConfig::default(),
            pricing: PricingTable::hosted_default(),
            ocr_command: None,
            rasterizer_command: Some("pdftoppm -r {dpi} -gray -png {input} {outdir}/page".into()),
            dpi: aibat_extraction::io::DEFAULT_DPI,
            cer_std: StdKind::Sample,
            legend: pair::legend(),
            examples: pair::examples(),
        }
    }
}

/// Values given on the command line; `None` leaves lower layers alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub endpoint_url: Option<String>,
    pub ocr_command: Option<String>,
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigLoadError> {
        let err = |message: String| ConfigLoadError::File {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    /// Builds the effective config. `env` looks up environment variables
    /// so tests can supply their own.
    pub fn resolve(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        flags: &Overrides,
    ) -> Result<Self, ConfigLoadError> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(url) = env(ENV_ENDPOINT_URL).filter(|s| !s.is_empty()) {
            cfg.llm.endpoint_url = url;
        }
        if let Some(cmd) = env(ENV_OCR_CMD).filter(|s| !s.is_empty()) {
            cfg.ocr_command = Some(cmd);
        }
        if let Some(url) = &flags.endpoint_url {
            cfg.llm.endpoint_url = url.clone();
        }
        if let Some(cmd) = &flags.ocr_command {
            cfg.ocr_command = Some(cmd.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigLoadError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigLoadError::Invalid(e.to_string());
        self.extraction.validate().map_err(|e| invalid(&e))?;
        self.llm.validate().map_err(|e| invalid(&e))?;
        self.legend.validate().map_err(|e| invalid(&e))?;
        self.examples.validate().map_err(|e| invalid(&e))?;
        if !(self.pricing.prompt_price >= 0.0 && self.pricing.completion_price >= 0.0) {
            return Err(ConfigLoadError::Invalid("prices must be non-negative".into()));
        }
        if self.dpi == 0 {
            return Err(ConfigLoadError::Invalid("dpi must be positive".into()));
        }
        Ok(())
    }
}
