//! Exact first- and second-order differentiation of user and catalog maps.

pub mod dual;
pub mod map;

pub use dual::Dual;
pub use map::{constant, identity, linear, HessianTensor, SmoothMap};
