//! Synthetic drawings with exact ground truth, and the canned model answers
//! that let the whole pipeline run offline.

pub mod corpus;
pub mod degrade;
pub mod font;
pub mod pair;
pub mod published;
pub mod roundtrip;
pub mod synth;

pub use corpus::{
    render_corpus, without_flags, ColumnSpec, CorpusSpec, FixtureError, GroundTruthManifest, ManifestNote,
    ManifestPage, NoteSpec, PageSpec,
};
pub use degrade::{apply_deltas, degrade, DegradeOp, TextDelta};
pub use pair::MockSidecar;
pub use roundtrip::{score, RoundTripReport};
pub use synth::{round_trip_spec, synthetic_spec};
