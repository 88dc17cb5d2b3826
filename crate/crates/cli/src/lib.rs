//! Configuration, artifact formats and pipeline stages behind the
//! `rodrecon` command.

pub mod artifacts;
pub mod config;
pub mod pipeline;

use rodrecon::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CHECKSUM: i32 = 3;
/// Benchmark finished but some baseline solves hit the iteration cap.
pub const EXIT_NOT_CONVERGED: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => EXIT_CONFIG,
        Error::ChecksumMismatch { .. } | Error::FormatVersionMismatch { .. } => EXIT_CHECKSUM,
        _ => EXIT_FAILURE,
    }
}
