//! Configuration loading, run persistence, command line and HTTP API for
//! the careflow simulator.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod service;
pub mod store;

pub use error::{Error, FieldError, Result};
pub use store::{RunRecord, RunStatus, RunStore};
