//! Offline build-path compiler.
//!
//! Stored LUT entries form a graph in which neighbours differ by one input element; a
//! spanning tree rooted at the zero entry gives one addition per entry, and scheduling the
//! tree edges in level order yields a program the construction pipeline can run without
//! hazard checks.

mod config;
mod format;
mod graph;
mod mst;
mod path;
mod schedule;
mod verify;

use thiserror::Error;

pub use config::{enumerate_entries, ChunkConfig, LutEntryId, LutMode, MAX_STORED_ENTRIES};
pub use format::{decode_path, encode_path, path_hash, path_to_json, PATH_MAGIC, PATH_VERSION};
pub use graph::{build_entry_graph, EntryEdge, EntryGraph};
pub use mst::{extract_spanning_tree, extract_spanning_tree_with, SpanningTree, TreeEdge};
pub use path::{BuildPath, CanonicalMap, PathInstr, PathStep};
pub use schedule::schedule_path;
pub use verify::{verify_path, VerifyReport, Violation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("invalid chunk config: {0}")]
    InvalidConfig(String),
    #[error("no build order keeps reads {required} steps behind writes (best found: {min_achievable_distance})")]
    Schedule {
        min_achievable_distance: usize,
        required: usize,
    },
    #[error("invalid canonical map: {0}")]
    InvalidMap(String),
    #[error("malformed build-path file: {0}")]
    Format(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Runs the whole compiler: enumerate, connect, span, schedule.
pub fn generate_path(config: &ChunkConfig) -> Result<BuildPath, PathError> {
    let graph = build_entry_graph(config, enumerate_entries(config))?;
    let tree = extract_spanning_tree(&graph)?;
    schedule_path(&graph, &tree, config)
}
