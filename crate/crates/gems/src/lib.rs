//! Files, command line and HTTP service around `gems-core`.
//!
//! - [`format`]: graph JSON, corpus JSONL, vocabulary and embedding files
//! - [`checkpoint`]: the binary model container
//! - [`report`]: evaluation reports as JSON
//! - [`cli`]: the `gems` command
//! - [`service`]: the HTTP API

pub mod checkpoint;
pub mod cli;
pub mod format;
pub mod report;
pub mod service;
