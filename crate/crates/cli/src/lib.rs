//! Command-line workflows and the HTTP session service.

pub mod commands;
pub mod service;
