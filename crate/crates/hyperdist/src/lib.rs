//! Command-line front end and serialization layer for the series engine.
//!
//! The core crate does the mathematics; this crate adds everything that
//! needs an operating system: a JSON schema for scalars, test functions,
//! and expression trees ([`json`]), a small text language for series
//! scalars ([`parse`]), named-object session files ([`session`]), and the
//! `hyperdist` batch CLI ([`cli`]).

pub mod cli;
pub mod json;
pub mod parse;
pub mod session;

pub use cli::run;
