//! Command implementations behind the `bitwise-nn` binary.

pub mod bench;
pub mod commands;
pub mod fixtures;
pub mod model_file;

pub use model_file::{Model, ModelFileError, Phase};
