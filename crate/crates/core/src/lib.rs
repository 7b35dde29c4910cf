pub mod cli;
pub mod error;
pub mod evaluation;
pub mod feature_cross;
pub mod graph;
pub mod propagation;
pub mod se_gating;
pub mod training;

pub use error::{Error, Result};
