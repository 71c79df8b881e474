//! Global solutions of dynamic stochastic models by time iteration over
//! adaptive sparse grids and anchored dimension-decomposed sparse grids.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod hdmr;
pub mod irbc;
pub mod policy;
pub mod sparse_grid;
pub mod time_iteration;

pub use error::{Error, Result};
