//! Reasoning with tuple-generating dependencies at desk scale.

pub mod approx;
pub mod chase;
pub mod classify;
pub mod decision;
pub mod error;
pub mod finite;
pub mod guarded;
mod engine;
pub mod hom;
pub mod linearize;
pub mod model;
pub mod reductions;
pub mod rewrite;
mod sets;
pub mod textio;
pub mod treewidth;
pub mod validate;

pub use error::{Error, Result};
pub use model::*;
pub use validate::{validate, Document, Violation};
