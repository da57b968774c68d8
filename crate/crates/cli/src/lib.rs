//! Guest-side client for the gateway. Every command talks to the service
//! over HTTP only.

pub mod client;
pub mod commands;
pub mod error;

pub use client::Client;
pub use commands::{
    cmd_chat, cmd_replay_corpus, cmd_seed, cmd_walk, format_report, ChatOptions, SeedFile, SeedSummary,
    WalkOptions, WalkScript, WalkStep,
};
pub use error::CliError;

/// Bundled sample catalog: 3 restaurants, 12 dishes, 1 dedicated fence.
pub const SAMPLE_SEED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/seed.json");
/// 145 labeled inquiries shaped after a field study.
pub const STUDY_CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/study_corpus.ndjson");
/// A walk past the first restaurant of the sample seed.
pub const SAMPLE_WALK: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/walk.json");
