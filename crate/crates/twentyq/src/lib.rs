//! File formats, experiment drivers, reports and the game service for the
//! `twentyq-core` agent.

pub mod agent;
pub mod config;
pub mod error;
pub mod experiment;
pub mod kb_file;
pub mod report;
pub mod service;

pub use error::{Error, Result};
