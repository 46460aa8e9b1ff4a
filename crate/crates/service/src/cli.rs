//! The `aibat` command line.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use aibat_core::schema::{generated_step_schema, parsed_note_schema};
use aibat_core::{IbatTemplate, ReviewRecord};
use aibat_fixtures::{CorpusSpec, GroundTruthManifest, MockSidecar};
use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigLoadError, Overrides, ServiceConfig};
use crate::fixture;
use crate::job::JobStore;
use crate::stages::*;

/// Exit status for a usage or configuration error.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for a stage that could not run or failed.
pub const EXIT_STAGE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "aibat", version, about = "Drawing note extraction and IBAT step drafting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Completion endpoint URL; overrides the config file and AIBAT_ENDPOINT_URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Sidecar with canned OCR and model answers; replaces both engines.
    #[arg(long)]
    pub mock: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract notes from a directory of page-<n>.png files or a PDF.
    Extract {
        #[arg(long)]
        input: PathBuf,
        /// Drawing id; defaults to the input directory or file name.
        #[arg(long)]
        drawing: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Parse extracted notes into steps, information and entities.
    Parse {
        /// Directory holding notes.json, or the file itself.
        #[arg(long)]
        input: PathBuf,
        /// Output directory; defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Fill the IBAT template from parsed notes.
    Generate {
        /// Directory holding parsed.json, or the file itself.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compute metrics.json from the artifacts in a directory.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        /// Ground-truth manifest for CER and flag accuracy.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Render synthetic drawings with their manifest, template and canned answers.
    RenderFixtures {
        /// Corpus spec; the built-in 22-note drawing when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the REST API.
    Serve {
        /// Job store directory.
        #[arg(long, default_value = "aibat-jobs")]
        out: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8088")]
        addr: SocketAddr,
        #[command(flatten)]
        common: Common,
    },
    /// Write the JSON schemas enforced on model output.
    Schemas {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigLoadError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            _ => EXIT_STAGE,
        }
    }
}

fn load_config(common: &Common) -> Result<ServiceConfig, ConfigLoadError> {
    let flags = Overrides {
        endpoint_url: common.endpoint.clone(),
        ocr_command: None,
    };
    ServiceConfig::resolve(common.config.as_deref(), |k| std::env::var(k).ok(), &flags)
}

fn load_mock(common: &Common) -> Result<Option<MockSidecar>, StageError> {
    common.mock.as_deref().map(read_json).transpose()
}

/// `input` names either a directory holding `name` or the file itself.
fn resolve(input: &Path, name: &str) -> PathBuf {
    if input.is_dir() {
        input.join(name)
    } else {
        input.to_path_buf()
    }
}

fn out_dir(out: Option<PathBuf>, input: &Path) -> PathBuf {
    out.unwrap_or_else(|| {
        if input.is_dir() {
            input.to_path_buf()
        } else {
            input.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
        }
    })
}

fn drawing_id_of(input: &Path) -> String {
    let name = if input.is_dir() {
        input.file_name()
    } else {
        input.file_stem()
    };
    name.map_or_else(|| "drawing".into(), |n| n.to_string_lossy().into_owned())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract {
            input,
            drawing,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let mock = load_mock(&common)?;
            let drawing = drawing.unwrap_or_else(|| drawing_id_of(&input));
            let scratch = out.join(".pages");
            let pages = load_pages(&input, &drawing, &cfg, &scratch)?;
            let engine = ocr_engine(&cfg, mock.as_ref())?;
            let notes = run_extract(&drawing, &pages, &cfg, engine.as_ref())?;
            for w in &notes.warnings {
                eprintln!("warning: page {} column {} row {}: {}", w.page_index, w.column_index, w.row_order, w.message);
            }
            write_json(&out.join(NOTES_FILE), &notes)?;
            println!("{} notes written to {}", notes.notes.len(), out.join(NOTES_FILE).display());
        }
        Command::Parse { input, out, common } => {
            let cfg = load_config(&common)?;
            let notes: NotesArtifact = read_required(&resolve(&input, NOTES_FILE))?;
            let mock = load_mock(&common)?;
            let endpoint = llm_endpoint(&cfg, mock.as_ref())?;
            let parsed = run_parse(&notes, &cfg, endpoint.as_ref())?;
            for u in &parsed.unparsed {
                eprintln!("warning: note {} not parsed: {}", u.note_number, u.error);
            }
            let out = out_dir(out, &input);
            write_json(&out.join(PARSED_FILE), &parsed)?;
            println!("{} notes parsed, {} failed", parsed.parsed.len(), parsed.unparsed.len());
        }
        Command::Generate {
            input,
            template,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let parsed: ParsedArtifact = read_required(&resolve(&input, PARSED_FILE))?;
            let template: IbatTemplate = read_json(&template)?;
            let mock = load_mock(&common)?;
            let endpoint = llm_endpoint(&cfg, mock.as_ref())?;
            let generated = run_generate(&parsed, &template, &cfg, endpoint.as_ref())?;
            for f in &generated.failures {
                eprintln!("warning: {} for note {} failed: {}", f.substep_id, f.note_number, f.error);
            }
            let out = out_dir(out, &input);
            write_json(&out.join(GENERATED_FILE), &generated)?;
            println!(
                "{} substeps generated, {} failed, estimated cost ${:.4}",
                generated.generated.len(),
                generated.failures.len(),
                generated.cost.total_dollars
            );
        }
        Command::Evaluate {
            input,
            truth,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let dir = if input.is_dir() {
                input.clone()
            } else {
                out_dir(None, &input)
            };
            let notes: Option<NotesArtifact> = read_optional(&dir.join(NOTES_FILE))?;
            let parsed: Option<ParsedArtifact> = read_optional(&dir.join(PARSED_FILE))?;
            let generated: Option<GeneratedArtifact> = read_optional(&dir.join(GENERATED_FILE))?;
            let reviews: Vec<ReviewRecord> = read_optional(&dir.join(REVIEWS_FILE))?.unwrap_or_default();
            let truth: Option<GroundTruthManifest> = truth.as_deref().map(read_json).transpose()?;
            if notes.is_none() && parsed.is_none() && generated.is_none() {
                return Err(StageError::NotReady(format!("no artifacts in {}", dir.display())).into());
            }
            let report = compute_metrics(
                notes.as_ref(),
                parsed.as_ref(),
                generated.as_ref(),
                &reviews,
                truth.as_ref(),
                &cfg,
            )?;
            let out = out.unwrap_or(dir);
            write_json(&out.join(METRICS_FILE), &report)?;
            print!("{}", String::from_utf8_lossy(&to_bytes(&report)));
        }
        Command::RenderFixtures {
            input,
            seed,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let spec: Option<CorpusSpec> = input.as_deref().map(read_json).transpose()?;
            let bundle = fixture::build(spec, seed, &cfg.legend)?;
            let pages = fixture::write(&bundle, &out)?;
            println!(
                "{} pages, {} notes; pages in {}",
                bundle.pages.len(),
                bundle.manifest.notes.len(),
                pages.display()
            );
        }
        Command::Serve { out, addr, common } => {
            let cfg = load_config(&common)?;
            let store = JobStore::open(out, cfg).map_err(|e| CliError::Other(e.to_string()))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(e.to_string()))?;
            rt.block_on(crate::api::serve(Arc::new(store), addr))
                .map_err(|e| CliError::Other(e.to_string()))?;
        }
        Command::Schemas { out } => {
            write_json(&out.join("parsed-note.schema.json"), &parsed_note_schema())?;
            write_json(&out.join("generated-step.schema.json"), &generated_step_schema())?;
        }
    }
    Ok(())
}

/// Parses arguments and runs, mapping errors to exit codes. Bad flags
/// exit with clap's usage status, which is also 2.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
