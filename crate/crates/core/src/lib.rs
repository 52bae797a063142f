//! Numerical checks of genericity for compositions `F_π ∘ f` of linearly
//! perturbed maps with immersions and injections.

pub mod diff;
pub mod error;
pub mod experiment;
pub mod jet;
pub mod linalg;
pub mod multi;
pub mod newton;
pub mod zoo;

pub use error::{Error, Result};
