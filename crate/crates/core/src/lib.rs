//! Navigation worlds, a navigation-hint dataset builder, a small
//! hint-generating navigation agent and the metrics used to evaluate both
//! its trajectories and its hints.

pub mod analysis;
pub mod error;
pub mod hints;
pub mod lexicon;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod text;
pub mod train;
pub mod world;

pub use error::{Error, Result};
