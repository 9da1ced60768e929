//! Command-line front end: problem-file parsing, solve/check/rate
//! commands, and their report formats.

pub mod commands;
pub mod expr;
pub mod problem_file;
