//! File formats, corpus writer and pipeline steps for the `atca` command.

pub mod atfx;
pub mod captions;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod ensemble_file;
pub mod error;
pub mod fsutil;
pub mod pipeline;
pub mod tsv;
pub mod wav;

pub use error::{Error, Result};

/// Version line including every binary format revision.
pub fn version_string() -> &'static str {
    static VERSION: std::sync::OnceLock<String> = std::sync::OnceLock::new();
    VERSION.get_or_init(|| {
        format!(
            "{} (formats: ATFX v{}, ATCK v{}, ATEN v{}, WAV PCM16 mono)",
            env!("CARGO_PKG_VERSION"),
            atfx::VERSION,
            checkpoint::VERSION,
            ensemble_file::VERSION
        )
    })
}
