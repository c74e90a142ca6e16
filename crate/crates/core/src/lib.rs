//! Domain core of the AICoFe collaborative feedback workflow.
//!
//! Everything in this crate is a pure function over immutable values:
//! rubric-based evaluations and their aggregation, comment preprocessing and
//! anonymization, prompt assembly, output validation, and sentence-level
//! curation with provenance tracking. Storage, provider I/O and HTTP live in
//! the sibling crates.

pub mod analytics;
pub mod curation;
pub mod error;
pub mod lang;
pub mod model;
pub mod preprocess;
pub mod prompt;
pub mod text;
pub mod validation;

pub use error::{Error, Result};
