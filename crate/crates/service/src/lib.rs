//! Job-oriented service around the pipeline: stage runners, an on-disk job
//! store, the REST API and the `aibat` command line.

pub mod api;
pub mod cli;
pub mod config;
pub mod fixture;
pub mod job;
pub mod stages;

pub use config::{Overrides, ServiceConfig};
pub use job::{Job, JobError, JobState, JobStore, NewJob, ReviewInput, Stage, StepView};
pub use stages::{GeneratedArtifact, NotesArtifact, ParsedArtifact, StageError};
