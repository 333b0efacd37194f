//! Privacy-preserving entity resolution on a data-oblivious abstract
//! machine.
//!
//! - [`machine`]: private values, decryption authorities, tracing and the
//!   oblivious building blocks (ternary selection, private indexing).
//! - [`backend`] and [`mpc`]: realizations of the machine primitives.
//! - [`intersect`]: private set-intersection sizes and Jaccard matching.
//! - [`blocking`]: bigram tokenization, MinHash and LSH blocking.
//! - [`pipeline`]: the end-to-end linkage protocol.
//! - [`evalkit`]: synthetic data, gold standards and quality metrics.
//! - [`config`]: run parameters as a flat key=value file.

pub mod backend;
pub mod blocking;
pub mod config;
pub mod error;
pub mod evalkit;
pub mod intersect;
pub mod machine;
pub mod mpc;
pub mod pipeline;
pub mod trace;
pub mod value;

pub use error::{Error, Result, TaintViolation};
