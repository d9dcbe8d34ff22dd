//! File formats, multi-threaded drivers and dataset experiments on top of
//! [`resonet_core`].
//!
//! The `resonet` binary wraps these in a command-line tool; see the README
//! for the end-to-end workflow.

pub mod experiment;
pub mod io;
pub mod parallel;

pub use resonet_core;
