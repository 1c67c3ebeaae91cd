// Range checks are written as `!(x > 0.0)` so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod defaults;
pub mod error;
pub mod eval;
pub mod freespace;
pub mod geometry;
pub mod qa;
pub mod reward;
pub mod rng;
pub mod scene;
pub mod synth;

pub use defaults::Thresholds;
pub use error::{Error, Result};
