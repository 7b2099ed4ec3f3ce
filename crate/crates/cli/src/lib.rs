//! Pipeline orchestration and report rendering for the keep-list pruning
//! toolkit. The binary in this crate exposes every library operation as a
//! subcommand; the full experiment lives in [`pipeline::run_pipeline`].

pub mod config;
pub mod pipeline;
pub mod report;
