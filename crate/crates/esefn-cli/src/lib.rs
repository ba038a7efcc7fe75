//! Library half of the CLI, so integration tests can drive the variant
//! table and commands directly.

pub mod args;
pub mod commands;
pub mod variants;
