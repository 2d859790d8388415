//! Command implementations and the acceptance suite behind the `ayang` binary.

pub mod commands;
pub mod oracles;
pub mod report;
pub mod selftest;
