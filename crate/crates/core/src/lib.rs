pub mod error;
pub mod geometry;
pub mod scene;
pub mod constraints;
pub mod visibility;
pub mod plausibility;
pub mod masks;
pub mod prompts;
pub mod bench;

pub use error::{Error, Result};

/// Crate version, reported by the command-line tool.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
