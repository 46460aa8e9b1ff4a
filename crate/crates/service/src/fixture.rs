//! Rendering fixture drawings together with everything needed to run them
//! offline.

use std::path::{Path, PathBuf};

use aibat_core::{IbatTemplate, PageImage};
use aibat_fixtures::{pair, render_corpus, CorpusSpec, GroundTruthManifest, MockSidecar};
use aibat_llm::ActionLegend;

use crate::stages::{write_json, StageError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MOCK_FILE: &str = "mock.json";
pub const TEMPLATE_FILE: &str = "template.json";
pub const SPEC_FILE: &str = "corpus-spec.json";

pub struct FixtureBundle {
    pub spec: CorpusSpec,
    pub pages: Vec<PageImage>,
    pub manifest: GroundTruthManifest,
    pub template: IbatTemplate,
    pub sidecar: MockSidecar,
}

/// Renders `spec`, or the built-in 22-note drawing when `None`.
pub fn build(spec: Option<CorpusSpec>, seed: u64, legend: &ActionLegend) -> Result<FixtureBundle, StageError> {
    let spec = spec.unwrap_or_else(pair::corpus_spec);
    let (pages, manifest) = render_corpus(&spec, seed).map_err(|e| StageError::Input(e.to_string()))?;
    let template = pair::template();
    let sidecar = pair::sidecar(&manifest, &template, legend);
    Ok(FixtureBundle {
        spec,
        pages,
        manifest,
        template,
        sidecar,
    })
}

/// Writes the bundle under `out`. Pages go to `out/<drawing id>/`, which
/// is the directory to hand to `extract`. Returns that directory.
pub fn write(bundle: &FixtureBundle, out: &Path) -> Result<PathBuf, StageError> {
    let page_dir = out.join(&bundle.manifest.drawing_id);
    std::fs::create_dir_all(&page_dir).map_err(|e| StageError::Io(format!("{}: {e}", page_dir.display())))?;
    for page in &bundle.pages {
        let path = page_dir.join(format!("page-{}.png", page.page_index));
        aibat_extraction::io::save_page(&path, page).map_err(|e| StageError::Io(e.to_string()))?;
    }
    write_json(&out.join(SPEC_FILE), &bundle.spec)?;
    write_json(&out.join(MANIFEST_FILE), &bundle.manifest)?;
    write_json(&out.join(MOCK_FILE), &bundle.sidecar)?;
    write_json(&out.join(TEMPLATE_FILE), &bundle.template)?;
    Ok(page_dir)
}
