//! Subcommands of the `sparsetopk` binary, usable as a library.

pub mod bench;
pub mod curve;
pub mod eval;
pub mod fmt;
pub mod gradcheck;
