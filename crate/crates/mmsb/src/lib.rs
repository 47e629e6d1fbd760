//! File formats, reports, presets and timing around `mmsb-core`.

pub mod config;
pub mod error;
pub mod io;
pub mod presets;
pub mod report;
pub mod timing;

pub use error::{Error, Result};
