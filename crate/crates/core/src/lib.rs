pub mod baseline;
pub mod error;
pub mod experiment;
pub mod generator;
pub mod heuristic;
pub mod instance;
pub mod io;
pub mod model;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
