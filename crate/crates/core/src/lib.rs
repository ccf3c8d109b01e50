pub mod bayes;
pub mod bootstrap;
pub mod data;
pub mod error;
pub mod mle;
pub mod rng;
pub mod separate;
pub mod simstudy;
pub mod special;
mod weights;

pub use data::{Cause, Dataset, Observation, Outcome, RawTransformerRecord};
pub use error::{Error, Result};
pub use mle::{CommonShapeFit, SolverOptions};
pub use separate::SeparateShapeFit;
pub use weights::{w_functions, WSums};

/// The transformer data shipped with the crate, as CSV text.
pub const TRANSFORMER_CSV: &str = include_str!("../data/transformers.csv");
