//! Verification harness for the `ofdmrx-core` receiver: I/Q files, run
//! configuration, Monte-Carlo metrics, sweeps, benchmarking and the
//! differential comparison against the golden model.

pub mod config;
pub mod iq;
pub mod run;
pub mod bench;
pub mod compare;
pub mod dump;
pub mod sweep;
