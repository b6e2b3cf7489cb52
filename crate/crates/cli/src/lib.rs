//! Configuration parsing, report serialization and command implementations for `omx`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod report;
