//! Surrogate decision-tree explanations for black-box probabilistic
//! classifiers over binary interpretable representations.

// `!(x > 0.0)` style checks reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod blackbox;
pub mod domain;
pub mod error;
pub mod explain;
pub mod fidelity;
pub mod lime;
pub mod point;
pub mod sampling;
pub mod segmentation;
pub mod service;
pub mod tree;

pub use error::{Error, Result};
pub use point::InterpretablePoint;
