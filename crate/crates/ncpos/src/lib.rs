//! File formats and the command-line front end for `ncpos-core`.

pub mod cli;
pub mod format;
