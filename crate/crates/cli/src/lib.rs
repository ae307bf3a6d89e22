//! HTTP service and command-line front end for `sensorspace-core`.
//!
//! - [`service`]: axum router with the `{ok, data, error}` envelope.
//! - [`commands`]: the `sensorspace` subcommands.
//! - [`config`]: JSON config with `SENSORSPACE_*` environment overrides.
//! - [`store`]: on-disk layout of registered schemas.

#![forbid(unsafe_code)]

pub mod api;
pub mod commands;
pub mod config;
pub mod error;
pub mod service;
pub mod store;

pub use api::{ApiError, ErrorCode};
pub use config::Config;
pub use error::CliError;
