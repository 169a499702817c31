//! Data movement distance of matrix-multiplication kernels.
//!
//! - [`kernels`]: exact element-level memory traces of six kernels
//! - [`stackdist`]: LRU reuse-distance distributions and miss-ratio curves
//! - [`rmm_model`]: closed-form reuse-distance distribution of recursive MM
//! - [`dmd`]: data movement distance, cost models, bounds and exponent fits
//! - [`cli`]: the `dmd` command-line tool

pub mod cli;
pub mod dmd;
pub mod kernels;
pub mod numfmt;
pub mod rmm_model;
pub mod stackdist;
