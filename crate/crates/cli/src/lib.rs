//! Command-line runner for the sl2lab experiments.

pub mod app;
pub mod cmd;
pub mod output;
pub mod parse;
pub mod suite;
