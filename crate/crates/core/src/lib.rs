pub mod error;
pub mod assignment;
pub mod cli;
pub mod milp;
pub mod netmodel;
pub mod power;
pub mod solver;

pub use error::{Error, Result};
