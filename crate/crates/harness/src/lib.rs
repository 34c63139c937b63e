//! Command-line host for the tuning loop: configuration files, live chat
//! endpoints, transcripts, run directories, Monte Carlo tables and plot data.

pub mod chat;
pub mod commands;
pub mod config;
pub mod error;
pub mod logline;
pub mod montecarlo;
pub mod plotdata;
pub mod runlog;
pub mod transcript;

pub use error::{HarnessError, Result};
